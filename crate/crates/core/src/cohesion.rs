//! Gravity-style cohesion of a `k x k` grid of feature strengths.
//!
//! Every pair of cells attracts with `c0 * m1 * m2 / d^q`, where `d` is the
//! Euclidean index distance. The total cohesion of a grid is the sum over all
//! unordered pairs. Since the total is multilinear in the masses, its partial
//! derivative with respect to one mass is the sum of that cell's interactions
//! with unit mass in its place.
//!
//! For 3x3 grids this module also checks, by enumerating the corners of the box
//! `[1, 1 + eps]^9`, that raising the center mass raises cohesion more than
//! raising any direct neighbor, and that neighbors in turn beat corners.

use std::fmt;

use crate::error::{Error, Result};

/// Scaling constant and distance exponent of the pairwise force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceParams {
    c0: f64,
    q: f64,
}

impl ForceParams {
    pub fn new(c0: f64, q: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::param(format!("c0 must be positive, got {c0}")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::param(format!("q must be positive, got {q}")));
        }
        Ok(Self { c0, q })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `c0 / d^q` for a squared integer distance `d2 > 0`.
    #[inline]
    fn coupling(&self, d2: usize) -> f64 {
        let d2 = d2 as f64;
        if self.q == 2.0 {
            self.c0 / d2
        } else {
            self.c0 / d2.powf(self.q / 2.0)
        }
    }
}

impl Default for ForceParams {
    fn default() -> Self {
        Self { c0: 1.0, q: 2.0 }
    }
}

/// Force between two point masses at distance `d`; zero at `d == 0`.
pub fn pairwise_force(m1: f64, m2: f64, d: f64, params: &ForceParams) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    params.c0 * m1 * m2 / d.powf(params.q)
}

/// Non-negative feature strengths on an odd-sized square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MassGrid {
    k: usize,
    masses: Vec<f64>,
}

impl MassGrid {
    pub fn new(k: usize, masses: Vec<f64>) -> Result<Self> {
        if k < 3 || k % 2 == 0 {
            return Err(Error::param(format!("grid side must be odd and >= 3, got {k}")));
        }
        if masses.len() != k * k {
            return Err(Error::Shape(format!(
                "{k}x{k} grid needs {} masses, got {}",
                k * k,
                masses.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(Error::param(format!("masses must be finite and >= 0, got {m}")));
        }
        Ok(Self { k, masses })
    }

    pub fn uniform(k: usize, m: f64) -> Result<Self> {
        Self::new(k, vec![m; k * k])
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(3, rows.iter().flatten().copied().collect())
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.masses[row * self.k + col]
    }

    pub fn set(&mut self, row: usize, col: usize, m: f64) -> Result<()> {
        self.check_index(row, col)?;
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::param(format!("masses must be finite and >= 0, got {m}")));
        }
        self.masses[row * self.k + col] = m;
        Ok(())
    }

    pub fn center(&self) -> (usize, usize) {
        (self.k / 2, self.k / 2)
    }

    fn check_index(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.k || col >= self.k {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.k,
                cols: self.k,
            });
        }
        Ok(())
    }
}

#[inline]
fn squared_distance(a: (usize, usize), b: (usize, usize)) -> usize {
    let dr = a.0.abs_diff(b.0);
    let dc = a.1.abs_diff(b.1);
    dr * dr + dc * dc
}

/// Sum of pairwise forces over all unordered cell pairs.
pub fn total_cohesion(grid: &MassGrid, params: &ForceParams) -> f64 {
    let k = grid.k;
    let n = k * k;
    let mut total = 0.0;
    for a in 0..n {
        let ma = grid.masses[a];
        if ma == 0.0 {
            continue;
        }
        let pa = (a / k, a % k);
        for b in (a + 1)..n {
            let pb = (b / k, b % k);
            total += ma * grid.masses[b] * params.coupling(squared_distance(pa, pb));
        }
    }
    total
}

fn gradient_at(grid: &MassGrid, at: (usize, usize), params: &ForceParams) -> f64 {
    let k = grid.k;
    let mut g = 0.0;
    for (idx, &m) in grid.masses.iter().enumerate() {
        let p = (idx / k, idx % k);
        if p == at {
            continue;
        }
        g += m * params.coupling(squared_distance(at, p));
    }
    g
}

/// Partial derivative of [`total_cohesion`] with respect to the mass at `at`.
pub fn cohesion_gradient(grid: &MassGrid, at: (usize, usize), params: &ForceParams) -> Result<f64> {
    grid.check_index(at.0, at.1)?;
    Ok(gradient_at(grid, at, params))
}

/// The part of [`total_cohesion`] made of interactions involving the center
/// cell: `m_center * d(total)/d(m_center)`.
pub fn center_contribution(grid: &MassGrid, params: &ForceParams) -> f64 {
    let c = grid.center();
    grid.get(c.0, c.1) * gradient_at(grid, c, params)
}

/// Which ordering of cohesion gradients a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DominanceCase {
    /// The center must beat every direct neighbor.
    CenterVsNeighbor,
    /// A direct neighbor must beat the two corners next to it.
    NeighborVsAdjacentCorner,
    /// A direct neighbor must beat the two corners on the far side.
    NeighborVsFarCorner,
}

impl DominanceCase {
    pub const ALL: [DominanceCase; 3] = [
        DominanceCase::CenterVsNeighbor,
        DominanceCase::NeighborVsAdjacentCorner,
        DominanceCase::NeighborVsFarCorner,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DominanceCase::CenterVsNeighbor => "center_vs_neighbor",
            DominanceCase::NeighborVsAdjacentCorner => "neighbor_vs_adjacent_corner",
            DominanceCase::NeighborVsFarCorner => "neighbor_vs_far_corner",
        }
    }

    /// Ordered `(should_be_larger, should_be_smaller)` cell pairs of a 3x3 grid.
    fn pairs(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        match self {
            DominanceCase::CenterVsNeighbor => {
                for n in NEIGHBORS {
                    out.push((CENTER, n));
                }
            }
            DominanceCase::NeighborVsAdjacentCorner | DominanceCase::NeighborVsFarCorner => {
                let want = if *self == DominanceCase::NeighborVsAdjacentCorner { 1 } else { 5 };
                for n in NEIGHBORS {
                    for co in CORNERS {
                        if squared_distance(n, co) == want {
                            out.push((n, co));
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for DominanceCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DominanceCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DominanceCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::param(format!("unknown dominance case {s:?}")))
    }
}

const CENTER: (usize, usize) = (1, 1);
const NEIGHBORS: [(usize, usize); 4] = [(0, 1), (1, 0), (1, 2), (2, 1)];
const CORNERS: [(usize, usize); 4] = [(0, 0), (0, 2), (2, 0), (2, 2)];

/// A vertex of the mass box at which a required gradient ordering fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub masses: [f64; 9],
    pub case: DominanceCase,
    pub larger: (usize, usize),
    pub smaller: (usize, usize),
    /// `grad(larger) - grad(smaller)`; not positive for a violation.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub epsilon: f64,
    pub vertices_checked: usize,
    pub violations: Vec<Violation>,
}

impl DominanceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, case: DominanceCase) -> usize {
        self.violations.iter().filter(|v| v.case == case).count()
    }
}

fn vertex(mask: u32, epsilon: f64) -> [f64; 9] {
    let mut m = [1.0; 9];
    for (i, slot) in m.iter_mut().enumerate() {
        if mask & (1 << i) != 0 {
            *slot = 1.0 + epsilon;
        }
    }
    m
}

fn check_params(epsilon: f64, params: &ForceParams) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if params.q != 2.0 {
        return Err(Error::param(format!("dominance checks assume q = 2, got {}", params.q)));
    }
    Ok(())
}

fn scan(epsilon: f64, params: &ForceParams, cases: &[DominanceCase], stop_early: bool) -> (usize, Vec<Violation>) {
    let pairs: Vec<_> = cases.iter().map(|c| (*c, c.pairs())).collect();
    let mut violations = Vec::new();
    let mut checked = 0;
    for mask in 0..(1u32 << 9) {
        checked += 1;
        let masses = vertex(mask, epsilon);
        let grid = MassGrid { k: 3, masses: masses.to_vec() };
        let mut grads = [0.0; 9];
        for (idx, g) in grads.iter_mut().enumerate() {
            *g = gradient_at(&grid, (idx / 3, idx % 3), params);
        }
        for (case, case_pairs) in &pairs {
            for &(a, b) in case_pairs {
                let gap = grads[a.0 * 3 + a.1] - grads[b.0 * 3 + b.1];
                if gap <= 0.0 {
                    violations.push(Violation {
                        masses,
                        case: *case,
                        larger: a,
                        smaller: b,
                        gap,
                    });
                    if stop_early {
                        return (checked, violations);
                    }
                }
            }
        }
    }
    (checked, violations)
}

/// Checks every vertex of `[1, 1 + epsilon]^9` for violations of the
/// center > neighbor > corner ordering of cohesion gradients.
///
/// Gradients are linear in the masses, so every gap between two of them
/// attains its minimum over the box at a vertex.
pub fn verify_center_dominance(epsilon: f64, params: &ForceParams) -> Result<DominanceReport> {
    check_params(epsilon, params)?;
    let (checked, violations) = scan(epsilon, params, &DominanceCase::ALL, false);
    Ok(DominanceReport {
        epsilon,
        vertices_checked: checked,
        violations,
    })
}

fn violates(case: DominanceCase, epsilon: f64, params: &ForceParams) -> bool {
    !scan(epsilon, params, &[case], true).1.is_empty()
}

/// Smallest box width at which `case` has a violating vertex, bracketed to
/// within `tol` by bisection. The returned value is the violating end of the
/// final bracket.
pub fn critical_epsilon(case: DominanceCase, tol: f64, params: &ForceParams) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol must be positive, got {tol}")));
    }
    check_params(0.0, params)?;
    if violates(case, 0.0, params) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !violates(case, hi, params) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::param(format!("no violation of {case} found below {hi}")));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if violates(case, mid, params) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
