//! Browser bindings for three small views of the `locality` crate: feature
//! localization on an editable grid, the LOCO-REG penalty map and the
//! center-dominance check.
//!
//! The exported functions take and return plain numbers so the page needs no
//! glue beyond what `wasm-bindgen` generates. Each one wraps a native
//! function of the same name with a `_native` suffix.

use locality::cohesion::{critical_epsilon, verify_center_dominance, DominanceCase, ForceParams};
use locality::localization::{locate_features, FeatureMap2D, Strategy};
use locality::regularizer::RegSpec;
use locality::fixtures;
use wasm_bindgen::prelude::*;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Row-major values of the bundled 6x16 two-feature map.
#[wasm_bindgen]
pub fn sample_map() -> Vec<f64> {
    fixtures::two_feature_map().values().to_vec()
}

pub fn locate_native(
    values: &[f64],
    rows: usize,
    cols: usize,
    k: usize,
    n: usize,
    strategy: &str,
    overlap: bool,
) -> Result<Vec<f64>, String> {
    let map = FeatureMap2D::new(rows, cols, values.to_vec()).map_err(|e| e.to_string())?;
    let strategy: Strategy = strategy.parse().map_err(|e: locality::Error| e.to_string())?;
    let found = locate_features(&map, k, n, strategy, &ForceParams::default(), overlap).map_err(|e| e.to_string())?;
    Ok(found
        .iter()
        .flat_map(|p| [p.center.0 as f64, p.center.1 as f64, p.score])
        .collect())
}

/// Placements as a flat `[row, col, score, row, col, score, ...]` array.
#[wasm_bindgen]
pub fn locate(
    values: &[f64],
    rows: usize,
    cols: usize,
    k: usize,
    n: usize,
    strategy: &str,
    overlap: bool,
) -> Result<Vec<f64>, JsError> {
    locate_native(values, rows, cols, k, n, strategy, overlap).map_err(js)
}

pub fn penalty_map_native(gamma: f64, eta: f64) -> Result<Vec<f64>, String> {
    let spec = RegSpec::l2(1.0, gamma, eta).map_err(|e| e.to_string())?;
    Ok(spec.cell_coefficients().to_vec())
}

/// Per-cell LOCO-REG coefficients of a 3x3 kernel at `lambda = 1`.
#[wasm_bindgen]
pub fn penalty_map(gamma: f64, eta: f64) -> Result<Vec<f64>, JsError> {
    penalty_map_native(gamma, eta).map_err(js)
}

pub fn dominance_native(epsilon: f64, q: f64) -> Result<Vec<f64>, String> {
    let params = ForceParams::new(1.0, q).map_err(|e| e.to_string())?;
    let report = verify_center_dominance(epsilon, &params).map_err(|e| e.to_string())?;
    let mut out = vec![report.vertices_checked as f64];
    for case in DominanceCase::ALL {
        out.push(report.count(case) as f64);
        out.push(critical_epsilon(case, 1e-9, &params).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// `[vertices, violations_1, critical_1, violations_2, critical_2,
/// violations_3, critical_3]` for the center, adjacent-corner and
/// far-corner orderings.
#[wasm_bindgen]
pub fn dominance(epsilon: f64, q: f64) -> Result<Vec<f64>, JsError> {
    dominance_native(epsilon, q).map_err(js)
}
