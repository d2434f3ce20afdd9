//! Locality statistics over the kernels of a trained network.
//!
//! For each kernel `w` and two distance classes `I`, `I'` the difference of
//! class means `s(w) = m(w, I) - m(w, I')` is divided by the population
//! standard deviation of `s` across its layer. The standardized values are
//! pooled across the selected layers and tested for a positive mean.

mod schedule;
mod student_t;

use std::fmt;
use std::str::FromStr;

pub use schedule::{derive_schedule, modulation, parse_schedule, write_schedule, ScheduleEntry};
pub use student_t::{stars, student_t_cdf, student_t_upper_tail, t_test_one_sided, TTest};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelLayer, KernelSet};

/// Cells of a `k x k` grid at one squared distance from the center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexClass {
    pub squared_distance: usize,
    pub cells: Vec<(usize, usize)>,
}

impl IndexClass {
    /// Conventional label: `I_c`, `I_n`, `I_co`, `I_2`, `I_sqrt5`, ...
    pub fn label(&self) -> String {
        class_label(self.squared_distance)
    }
}

pub fn class_label(d2: usize) -> String {
    match d2 {
        0 => "I_c".into(),
        1 => "I_n".into(),
        2 => "I_co".into(),
        d2 => {
            let r = (d2 as f64).sqrt().round() as usize;
            if r * r == d2 {
                format!("I_{r}")
            } else {
                format!("I_sqrt{d2}")
            }
        }
    }
}

/// Parses a class label back to its squared distance.
pub fn parse_class_label(label: &str) -> Result<usize> {
    match label {
        "I_c" | "c" => Ok(0),
        "I_n" | "n" => Ok(1),
        "I_co" | "co" => Ok(2),
        other => {
            let rest = other.strip_prefix("I_").unwrap_or(other);
            if let Some(d2) = rest.strip_prefix("sqrt") {
                d2.parse().map_err(|_| Error::Parse(format!("bad class label {label:?}")))
            } else {
                rest.parse::<usize>()
                    .map(|r| r * r)
                    .map_err(|_| Error::Parse(format!("bad class label {label:?}")))
            }
        }
    }
}

/// Partition of a `k x k` grid into distance classes, ordered by distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexClasses {
    k: usize,
    classes: Vec<IndexClass>,
}

impl IndexClasses {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k % 2 == 0 {
            return Err(Error::param(format!("kernel size must be odd, got {k}")));
        }
        let c = k / 2;
        let mut classes: Vec<IndexClass> = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let d2 = i.abs_diff(c).pow(2) + j.abs_diff(c).pow(2);
                match classes.iter_mut().find(|cl| cl.squared_distance == d2) {
                    Some(cl) => cl.cells.push((i, j)),
                    None => classes.push(IndexClass {
                        squared_distance: d2,
                        cells: vec![(i, j)],
                    }),
                }
            }
        }
        classes.sort_by_key(|cl| cl.squared_distance);
        Ok(Self { k, classes })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn classes(&self) -> &[IndexClass] {
        &self.classes
    }

    pub fn get(&self, squared_distance: usize) -> Option<&IndexClass> {
        self.classes.iter().find(|c| c.squared_distance == squared_distance)
    }
}

/// Mean of the (optionally absolute) weights over `cells`.
pub fn group_mean(kernel: &Kernel, cells: &[(usize, usize)], use_abs: bool) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::param("empty index set"));
    }
    let k = kernel.size();
    let mut acc = 0.0;
    for &(i, j) in cells {
        if i >= k || j >= k {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                rows: k,
                cols: k,
            });
        }
        let w = kernel.get(i, j);
        acc += if use_abs { w.abs() } else { w };
    }
    Ok(acc / cells.len() as f64)
}

/// Layer standard deviations below this are treated as zero.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerObservations {
    /// `s(w) / sigma` for every kernel, in kernel order.
    Standardized { values: Vec<f64>, sigma: f64 },
    /// All `s(w)` (nearly) equal; the layer carries no usable spread.
    Degenerate { sigma: f64 },
}

/// Standardized class-mean differences for one layer.
pub fn layer_profile(
    kernels: &[Kernel],
    class_a: &[(usize, usize)],
    class_b: &[(usize, usize)],
    use_abs: bool,
) -> Result<LayerObservations> {
    if kernels.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: kernels.len(),
        });
    }
    let diffs = kernels
        .iter()
        .map(|w| Ok(group_mean(w, class_a, use_abs)? - group_mean(w, class_b, use_abs)?))
        .collect::<Result<Vec<f64>>>()?;
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sigma = (diffs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sigma >= DEGENERATE_SIGMA) {
        return Ok(LayerObservations::Degenerate { sigma });
    }
    Ok(LayerObservations::Standardized {
        values: diffs.into_iter().map(|s| s / sigma).collect(),
        sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSubset {
    All,
    LowerHalf,
    UpperHalf,
}

impl LayerSubset {
    pub const ALL: [LayerSubset; 3] = [LayerSubset::All, LayerSubset::LowerHalf, LayerSubset::UpperHalf];

    pub fn name(&self) -> &'static str {
        match self {
            LayerSubset::All => "all",
            LayerSubset::LowerHalf => "lower_half",
            LayerSubset::UpperHalf => "upper_half",
        }
    }
}

impl fmt::Display for LayerSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(LayerSubset::All),
            "lower" | "lower_half" => Ok(LayerSubset::LowerHalf),
            "upper" | "upper_half" => Ok(LayerSubset::UpperHalf),
            other => Err(Error::param(format!("unknown layer subset {other:?}"))),
        }
    }
}

/// One line of a locality table.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub class_a: String,
    pub class_b: String,
    pub subset: LayerSubset,
    /// Pooled mean of standardized differences.
    pub mean: f64,
    pub n: usize,
    pub t: f64,
    pub p: f64,
    pub stars: &'static str,
    /// Layers in the subset skipped for zero spread.
    pub degenerate_layers: Vec<String>,
}

impl ProfileRow {
    pub const CSV_HEADER: &'static str = "class_a,class_b,subset,mean,n,t,p,stars,degenerate_layers";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.class_a,
            self.class_b,
            self.subset,
            self.mean,
            self.n,
            self.t,
            self.p,
            self.stars,
            self.degenerate_layers.join(";")
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse(format!("expected 9 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let p = num(f[6])?;
        Ok(Self {
            class_a: f[0].to_string(),
            class_b: f[1].to_string(),
            subset: f[2].parse()?,
            mean: num(f[3])?,
            n: f[4].parse().map_err(|e| Error::Parse(format!("{:?}: {e}", f[4])))?,
            t: num(f[5])?,
            p,
            stars: stars(p),
            degenerate_layers: if f[8].is_empty() {
                Vec::new()
            } else {
                f[8].split(';').map(str::to_string).collect()
            },
        })
    }
}

/// Layers usable for a comparison: spatial (`k >= 3`), at least two kernels,
/// and containing both classes.
fn eligible_layers(set: &KernelSet, d2_a: usize, d2_b: usize) -> Vec<(&KernelLayer, IndexClasses)> {
    set.layers
        .iter()
        .filter(|l| l.kernel_size() >= 3 && l.kernel_size() % 2 == 1 && l.len() >= 2)
        .filter_map(|l| {
            let classes = IndexClasses::new(l.kernel_size()).ok()?;
            (classes.get(d2_a).is_some() && classes.get(d2_b).is_some()).then_some((l, classes))
        })
        .collect()
}

/// Pools standardized differences between classes `d2_a` and `d2_b` (given as
/// squared distances) over a subset of layers and runs a one-sided t-test.
///
/// The lower half is the first `ceil(L / 2)` eligible layers by depth, the
/// upper half the rest.
pub fn aggregate_profile(
    set: &KernelSet,
    d2_a: usize,
    d2_b: usize,
    subset: LayerSubset,
    use_abs: bool,
) -> Result<ProfileRow> {
    let eligible = eligible_layers(set, d2_a, d2_b);
    let split = eligible.len().div_ceil(2);
    let chosen = match subset {
        LayerSubset::All => &eligible[..],
        LayerSubset::LowerHalf => &eligible[..split],
        LayerSubset::UpperHalf => &eligible[split..],
    };
    let mut pooled = Vec::new();
    let mut degenerate = Vec::new();
    for (layer, classes) in chosen {
        let a = &classes.get(d2_a).expect("checked eligible").cells;
        let b = &classes.get(d2_b).expect("checked eligible").cells;
        match layer_profile(&layer.kernels, a, b, use_abs)? {
            LayerObservations::Standardized { values, .. } => pooled.extend(values),
            LayerObservations::Degenerate { .. } => degenerate.push(layer.name.clone()),
        }
    }
    if pooled.is_empty() {
        return Err(Error::NoEligibleLayers);
    }
    let test = t_test_one_sided(&pooled)?;
    Ok(ProfileRow {
        class_a: class_label(d2_a),
        class_b: class_label(d2_b),
        subset,
        mean: test.mean,
        n: test.n,
        t: test.t,
        p: test.p,
        stars: stars(test.p),
        degenerate_layers: degenerate,
    })
}

/// Rows for the standard comparisons `(I_c, I_n)` and `(I_n, I_co)` over all
/// three subsets; subsets without layers are skipped.
pub fn locality_table(set: &KernelSet, use_abs: bool, subsets: &[LayerSubset]) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::new();
    for (a, b) in [(0, 1), (1, 2)] {
        for &subset in subsets {
            match aggregate_profile(set, a, b, subset, use_abs) {
                Ok(row) => rows.push(row),
                Err(Error::NoEligibleLayers) if subset != LayerSubset::All => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}
