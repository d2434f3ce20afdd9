//! Spatial kernels and named collections of them.

use crate::error::{Error, Result};

/// One `k x k` spatial weight matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    k: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(k: usize, weights: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("kernel size must be positive"));
        }
        if weights.len() != k * k {
            return Err(Error::Shape(format!(
                "{k}x{k} kernel needs {} weights, got {}",
                k * k,
                weights.len()
            )));
        }
        Ok(Self { k, weights })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            weights: vec![0.0; k * k],
        }
    }

    pub fn from_rows<const K: usize>(rows: [[f64; K]; K]) -> Self {
        Self {
            k: K,
            weights: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.weights[i * self.k + j] = v;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            k: self.k,
            weights: self.weights.iter().map(|w| w * t).collect(),
        }
    }

    /// Center index for odd `k`.
    pub fn center(&self) -> usize {
        self.k / 2
    }
}

/// All spatial kernels of one convolution layer.
///
/// A layer of shape `[k, k, c_in, c_out]` holds `c_in * c_out` kernels,
/// ordered so that kernel `f * c_in + c` is the slice for input channel `c`
/// of output filter `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelLayer {
    pub name: String,
    pub depth: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernels: Vec<Kernel>,
}

impl KernelLayer {
    pub fn new(
        name: impl Into<String>,
        depth: usize,
        in_channels: usize,
        out_channels: usize,
        kernels: Vec<Kernel>,
    ) -> Result<Self> {
        let name = name.into();
        if kernels.is_empty() {
            return Err(Error::Shape(format!("layer {name} has no kernels")));
        }
        if kernels.len() != in_channels * out_channels {
            return Err(Error::Shape(format!(
                "layer {name}: {} kernels for {in_channels}x{out_channels} channels",
                kernels.len()
            )));
        }
        let k = kernels[0].size();
        if kernels.iter().any(|w| w.size() != k) {
            return Err(Error::Shape(format!("layer {name}: mixed kernel sizes")));
        }
        Ok(Self {
            name,
            depth,
            in_channels,
            out_channels,
            kernels,
        })
    }

    /// Convenience constructor treating every kernel as its own output filter.
    pub fn from_kernels(name: impl Into<String>, depth: usize, kernels: Vec<Kernel>) -> Result<Self> {
        let n = kernels.len();
        Self::new(name, depth, 1, n, kernels)
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels[0].size()
    }

    pub fn kernel(&self, input: usize, filter: usize) -> &Kernel {
        &self.kernels[filter * self.in_channels + input]
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// The spatial kernels of a model, layers ordered by depth.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub model: String,
    pub dataset: Option<String>,
    pub layers: Vec<KernelLayer>,
}

impl KernelSet {
    pub fn new(model: impl Into<String>, dataset: Option<String>, mut layers: Vec<KernelLayer>) -> Self {
        layers.sort_by_key(|l| l.depth);
        Self {
            model: model.into(),
            dataset,
            layers,
        }
    }

    pub fn kernel_count(&self) -> usize {
        self.layers.iter().map(KernelLayer::len).sum()
    }
}
