//! Reference inputs: classic denoising/sharpening filters and a small
//! feature map with two obvious features.

use crate::kernel::Kernel;
use crate::localization::FeatureMap2D;

/// 3x3 Gaussian smoothing filter.
pub fn gaussian() -> Kernel {
    Kernel::from_rows([[0.06, 0.12, 0.06], [0.12, 0.25, 0.12], [0.06, 0.12, 0.06]])
}

/// 3x3 Laplacian sharpening filter.
pub fn laplacian() -> Kernel {
    Kernel::from_rows([[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]])
}

pub const TWO_FEATURE_ROWS: [[u8; 16]; 6] = [
    [0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 1, 2, 2, 1, 0, 2, 3, 1, 1, 1, 0],
    [1, 0, 0, 0, 1, 2, 6, 3, 1, 1, 2, 5, 1, 2, 1, 0],
    [0, 0, 0, 0, 1, 1, 3, 2, 2, 3, 2, 3, 2, 0, 0, 0],
    [0, 1, 0, 0, 0, 1, 2, 2, 2, 2, 3, 2, 2, 1, 0, 0],
    [0, 0, 0, 1, 0, 1, 1, 1, 2, 3, 3, 2, 1, 1, 0, 0],
];

/// 6x16 map whose two strict peaks (6 at (2, 6), 5 at (2, 11)) sit in
/// clusters of moderate values.
pub fn two_feature_map() -> FeatureMap2D {
    let values = TWO_FEATURE_ROWS.iter().flatten().map(|&v| v as f64).collect();
    FeatureMap2D::new(6, 16, values).expect("fixture is valid")
}
