//! Placing fixed-size windows on a 2-D feature map.
//!
//! Two scores are supported: the plain sum of the covered values, and the
//! cohesion the covered patch contributes through its center cell. The
//! latter favors windows whose center is strong and surrounded by strong
//! close neighbors.

use std::fmt;
use std::str::FromStr;

use crate::cohesion::{center_contribution, ForceParams, MassGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap2D {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureMap2D {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("feature map must be non-empty".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} map needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::param(format!("feature map values must be finite and >= 0, got {v}")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged feature map rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    fn window_fits(&self, center: (usize, usize), k: usize) -> bool {
        let h = k / 2;
        center.0 >= h && center.1 >= h && center.0 + h < self.rows && center.1 + h < self.cols
    }

    fn patch(&self, center: (usize, usize), k: usize) -> Vec<f64> {
        let h = k / 2;
        let mut out = Vec::with_capacity(k * k);
        for r in center.0 - h..=center.0 + h {
            let start = r * self.cols + center.1 - h;
            out.extend_from_slice(&self.values[start..start + k]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Sum,
    Cohesion,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Sum => "sum",
            Strategy::Cohesion => "cohesion",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Strategy::Sum),
            "cohesion" => Ok(Strategy::Cohesion),
            other => Err(Error::param(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub center: (usize, usize),
    pub score: f64,
    pub strategy: Strategy,
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::param(format!("window size must be odd and >= 3, got {k}")));
    }
    Ok(())
}

fn score_unchecked(map: &FeatureMap2D, center: (usize, usize), k: usize, strategy: Strategy, params: &ForceParams) -> f64 {
    let patch = map.patch(center, k);
    match strategy {
        Strategy::Sum => patch.iter().sum(),
        Strategy::Cohesion => {
            // values were validated non-negative on construction
            let grid = MassGrid::new(k, patch).expect("patch is a valid mass grid");
            center_contribution(&grid, params)
        }
    }
}

/// Score of the `k x k` window centered at `center`.
pub fn patch_score(
    map: &FeatureMap2D,
    center: (usize, usize),
    k: usize,
    strategy: Strategy,
    params: &ForceParams,
) -> Result<f64> {
    check_k(k)?;
    if !map.window_fits(center, k) {
        return Err(Error::WindowOutOfBounds {
            row: center.0,
            col: center.1,
            k,
            rows: map.rows,
            cols: map.cols,
        });
    }
    Ok(score_unchecked(map, center, k, strategy, params))
}

/// Scores of every valid window center, row-major.
pub fn score_all(map: &FeatureMap2D, k: usize, strategy: Strategy, params: &ForceParams) -> Result<Vec<Placement>> {
    check_k(k)?;
    let h = k / 2;
    if map.rows < k || map.cols < k {
        return Err(Error::Shape(format!(
            "{}x{} map is smaller than a {k}x{k} window",
            map.rows, map.cols
        )));
    }
    let mut out = Vec::with_capacity((map.rows - 2 * h) * (map.cols - 2 * h));
    for r in h..map.rows - h {
        for c in h..map.cols - h {
            out.push(Placement {
                center: (r, c),
                score: score_unchecked(map, (r, c), k, strategy, params),
                strategy,
            });
        }
    }
    Ok(out)
}

/// Greedily places `n` windows, each at the highest-scoring center still
/// available. Ties go to the smallest `(row, col)`. Without overlap, a center
/// is unavailable once its window would intersect an earlier one; with
/// overlap, only previously chosen centers are excluded.
pub fn locate_features(
    map: &FeatureMap2D,
    k: usize,
    n: usize,
    strategy: Strategy,
    params: &ForceParams,
    overlap_allowed: bool,
) -> Result<Vec<Placement>> {
    if n == 0 {
        return Err(Error::param("number of features must be >= 1"));
    }
    let candidates = score_all(map, k, strategy, params)?;
    let mut chosen: Vec<Placement> = Vec::with_capacity(n);
    while chosen.len() < n {
        let blocked = |c: (usize, usize)| {
            chosen.iter().any(|p| {
                if overlap_allowed {
                    p.center == c
                } else {
                    p.center.0.abs_diff(c.0) < k && p.center.1.abs_diff(c.1) < k
                }
            })
        };
        let mut best: Option<&Placement> = None;
        for cand in candidates.iter().filter(|p| !blocked(p.center)) {
            if best.is_none_or(|b| cand.score > b.score) {
                best = Some(cand);
            }
        }
        match best {
            Some(p) => chosen.push(*p),
            None => {
                return Err(Error::Infeasible {
                    requested: n,
                    placed: chosen.len(),
                })
            }
        }
    }
    Ok(chosen)
}
