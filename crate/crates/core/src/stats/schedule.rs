//! Per-layer LOCO-REG factors derived from the weight magnitudes of
//! previously trained models.

use std::fmt::Write as _;

use super::{group_mean, IndexClasses};
use crate::error::{Error, Result};
use crate::kernel::{KernelLayer, KernelSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub layer: String,
    pub gamma: f64,
    pub eta: f64,
    pub c: f64,
}

/// `1 + c (r - 1)`.
pub fn modulation(r: f64, c: f64) -> f64 {
    1.0 + c * (r - 1.0)
}

fn ratio_of_sums(layer: &KernelLayer, num: &[(usize, usize)], den: &[(usize, usize)], use_abs: bool) -> Result<f64> {
    let mut top = 0.0;
    let mut bottom = 0.0;
    for w in &layer.kernels {
        top += group_mean(w, num, use_abs)?;
        bottom += group_mean(w, den, use_abs)?;
    }
    if !(bottom > 0.0) {
        return Err(Error::NonPositiveDenominator {
            layer: layer.name.clone(),
        });
    }
    Ok(top / bottom)
}

fn three_by_three(set: &KernelSet) -> Vec<&KernelLayer> {
    set.layers.iter().filter(|l| l.kernel_size() == 3).collect()
}

/// Derives `(gamma_l, eta_l)` for every 3x3 layer.
///
/// For each model the neighbor-to-center and neighbor-to-corner ratios of
/// summed class means are computed per layer and averaged over models; then
/// `gamma_l = a(r(I_n, I_c), c)` and `eta_l = 1 / a(r(I_n, I_co), c)` with
/// `a(r, c) = 1 + c (r - 1)`.
pub fn derive_schedule(models: &[KernelSet], c: f64, use_abs: bool) -> Result<Vec<ScheduleEntry>> {
    if models.is_empty() {
        return Err(Error::param("need at least one model"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("modulation constant must be positive, got {c}")));
    }
    let reference: Vec<&KernelLayer> = three_by_three(&models[0]);
    if reference.is_empty() {
        return Err(Error::NoEligibleLayers);
    }
    for m in &models[1..] {
        let layers = three_by_three(m);
        let same = layers.len() == reference.len() && layers.iter().zip(&reference).all(|(a, b)| a.name == b.name);
        if !same {
            return Err(Error::Shape(format!(
                "model {} does not share the 3x3 layer structure of {}",
                m.model, models[0].model
            )));
        }
    }
    let classes = IndexClasses::new(3)?;
    let center = &classes.get(0).expect("3x3 has a center").cells;
    let neighbors = &classes.get(1).expect("3x3 has neighbors").cells;
    let corners = &classes.get(2).expect("3x3 has corners").cells;

    let mut out = Vec::with_capacity(reference.len());
    for (idx, layer) in reference.iter().enumerate() {
        let mut r_nc = 0.0;
        let mut r_nco = 0.0;
        for m in models {
            let l = three_by_three(m)[idx];
            r_nc += ratio_of_sums(l, neighbors, center, use_abs)?;
            r_nco += ratio_of_sums(l, neighbors, corners, use_abs)?;
        }
        let count = models.len() as f64;
        let a_gamma = modulation(r_nc / count, c);
        let a_eta = modulation(r_nco / count, c);
        if !(a_gamma > 0.0 && a_eta > 0.0) {
            return Err(Error::param(format!(
                "layer {}: modulated ratios ({a_gamma}, {a_eta}) must be positive",
                layer.name
            )));
        }
        out.push(ScheduleEntry {
            layer: layer.name.clone(),
            gamma: a_gamma,
            eta: 1.0 / a_eta,
            c,
        });
    }
    Ok(out)
}

const HEADER: &str = "layer,gamma,eta,c";

/// CSV with header `layer,gamma,eta,c`.
pub fn write_schedule(entries: &[ScheduleEntry]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(s, "{},{},{},{}", e.layer, e.gamma, e.eta, e.c);
    }
    s
}

pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleEntry>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(HEADER) => {}
        other => return Err(Error::Parse(format!("expected header {HEADER:?}, got {other:?}"))),
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("expected 4 fields in {line:?}")));
            }
            let entry = ScheduleEntry {
                layer: f[0].to_string(),
                gamma: num(f[1])?,
                eta: num(f[2])?,
                c: num(f[3])?,
            };
            if !(entry.gamma > 0.0 && entry.eta > 0.0) {
                return Err(Error::Parse(format!("non-positive factors in {line:?}")));
            }
            Ok(entry)
        })
        .collect()
}
