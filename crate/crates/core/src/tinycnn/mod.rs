//! A small CPU convolutional network with hand-written gradients.
//!
//! Every `Conv` spec expands to a 3x3 convolution (cross-correlation, zero
//! "same" padding, no bias) followed by batch normalization and ReLU. Dense
//! layers are followed by ReLU except the last one, whose outputs are the
//! logits of a softmax cross-entropy loss. Activations are NCHW `f64`.
//!
//! Optimization is SGD with momentum in the form `v = mu v + g`,
//! `w -= lr v`. Convolution kernels are regularized either with plain L2 or
//! with LOCO-REG (one `(gamma, eta)` pair per convolution); dense weights
//! always get plain L2 and batch-norm parameters and biases are not
//! regularized.

mod data;
mod layers;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use data::{synthetic_shapes, Dataset, Sample, SHAPE_NAMES};
pub use layers::{softmax, softmax_cross_entropy, Tensor};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelLayer, KernelSet};
use crate::regularizer::{loco_grad_into, loco_loss, uniform_l2, uniform_l2_grad_into, RegSpec};
use crate::stats::ScheduleEntry;
use layers::{BatchNorm, BnCache, Conv, Dense, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { out_channels: usize },
    MaxPool,
    Dense { units: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNetConfig {
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    /// Multiplier on He-normal initialization.
    pub init_scale: f64,
}

impl TinyNetConfig {
    /// conv(8) - pool - conv(16) - pool - dense(classes).
    pub fn desk(channels: usize, height: usize, width: usize, classes: usize, seed: u64) -> Self {
        Self {
            input: (channels, height, width),
            layers: vec![
                LayerSpec::Conv { out_channels: 8 },
                LayerSpec::MaxPool,
                LayerSpec::Conv { out_channels: 16 },
                LayerSpec::MaxPool,
                LayerSpec::Dense { units: classes },
            ],
            seed,
            init_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegMode {
    Uniform,
    /// One `(gamma, eta)` per convolution, in network order.
    Loco(Vec<(f64, f64)>),
}

impl RegMode {
    pub fn loco_shared(gamma: f64, eta: f64, conv_layers: usize) -> Self {
        RegMode::Loco(vec![(gamma, eta); conv_layers])
    }

    /// Matches schedule entries to convolutions by name when every name is
    /// present, otherwise takes the first entries in order.
    pub fn from_schedule(entries: &[ScheduleEntry], conv_names: &[String]) -> Result<Self> {
        let by_name: Option<Vec<(f64, f64)>> = conv_names
            .iter()
            .map(|n| entries.iter().find(|e| &e.layer == n).map(|e| (e.gamma, e.eta)))
            .collect();
        if let Some(f) = by_name {
            return Ok(RegMode::Loco(f));
        }
        if entries.len() < conv_names.len() {
            return Err(Error::Shape(format!(
                "schedule has {} entries for {} convolutions",
                entries.len(),
                conv_names.len()
            )));
        }
        Ok(RegMode::Loco(entries.iter().take(conv_names.len()).map(|e| (e.gamma, e.eta)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_decay: f64,
    /// Epochs (0-based) at which the rate is multiplied by `lr_decay`.
    pub decay_epochs: Vec<usize>,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub reg: RegMode,
    pub flip: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            lr_decay: 0.316,
            decay_epochs: vec![2, 4],
            momentum: 0.9,
            batch_size: 32,
            epochs: 5,
            lambda: 0.0005,
            reg: RegMode::Uniform,
            flip: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("bad lambda {}", self.lambda)));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.learning_rate * self.lr_decay.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv(Conv),
    BatchNorm(BatchNorm),
    Relu,
    MaxPool,
    Dense(Dense),
}

enum Cache {
    Input(Tensor),
    Bn(BnCache),
    Output(Tensor),
    Pool(Tensor, Vec<usize>),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Result of a forward pass; caches are opaque and only feed `backward`.
pub struct Forward {
    pub logits: Tensor,
    caches: Vec<Cache>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub data: f64,
    pub reg: f64,
}

impl StepLoss {
    pub fn total(&self) -> f64 {
        self.data + self.reg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    input: (usize, usize, usize),
    layers: Vec<Layer>,
}

impl TinyNet {
    pub fn new(config: &TinyNetConfig) -> Result<Self> {
        let (mut c, mut h, mut w) = config.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::param("input dimensions must be positive"));
        }
        if !(config.init_scale >= 0.0 && config.init_scale.is_finite()) {
            return Err(Error::param(format!("bad init scale {}", config.init_scale)));
        }
        match config.layers.last() {
            Some(LayerSpec::Dense { .. }) => {}
            _ => return Err(Error::param("the last layer must be dense")),
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut normal = |n: usize, std: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * std
                })
                .collect()
        };
        let mut layers = Vec::new();
        let (mut convs, mut denses) = (0, 0);
        let count = config.layers.len();
        for (idx, spec) in config.layers.iter().enumerate() {
            match *spec {
                LayerSpec::Conv { out_channels } => {
                    if out_channels == 0 {
                        return Err(Error::param("convolution needs at least one channel"));
                    }
                    convs += 1;
                    let std = config.init_scale * (2.0 / (9 * c) as f64).sqrt();
                    layers.push(Layer::Conv(Conv {
                        name: format!("conv{convs}"),
                        c_in: c,
                        c_out: out_channels,
                        weight: Param::new(normal(out_channels * c * 9, std)),
                    }));
                    layers.push(Layer::BatchNorm(BatchNorm::new(out_channels)));
                    layers.push(Layer::Relu);
                    c = out_channels;
                }
                LayerSpec::MaxPool => {
                    if h < 2 || w < 2 {
                        return Err(Error::param(format!("cannot pool a {h}x{w} map")));
                    }
                    layers.push(Layer::MaxPool);
                    h /= 2;
                    w /= 2;
                }
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(Error::param("dense layer needs at least one unit"));
                    }
                    denses += 1;
                    let inputs = c * h * w;
                    let std = config.init_scale * (2.0 / inputs as f64).sqrt();
                    layers.push(Layer::Dense(Dense {
                        name: format!("fc{denses}"),
                        inputs,
                        outputs: units,
                        weight: Param::new(normal(units * inputs, std)),
                        bias: Param::new(vec![0.0; units]),
                    }));
                    if idx + 1 < count {
                        layers.push(Layer::Relu);
                    }
                    (c, h, w) = (units, 1, 1);
                }
            }
        }
        Ok(Self {
            input: config.input,
            layers,
        })
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense(d)) => d.outputs,
            _ => unreachable!("constructor guarantees a final dense layer"),
        }
    }

    pub fn conv_names(&self) -> Vec<String> {
        self.convs().map(|c| c.name.clone()).collect()
    }

    fn convs(&self) -> impl Iterator<Item = &Conv> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
    }

    /// Copies the convolution weights of one layer; kernel `f * c_in + c`.
    pub fn conv_kernels(&self, index: usize) -> Option<Vec<Kernel>> {
        let conv = self.convs().nth(index)?;
        Some(
            conv.weight
                .value
                .chunks(9)
                .map(|w| Kernel::new(3, w.to_vec()).expect("9 weights"))
                .collect(),
        )
    }

    /// Overwrites one kernel of a convolution, `(filter, input)` indexed.
    pub fn set_conv_kernel(&mut self, index: usize, filter: usize, input: usize, kernel: &Kernel) -> Result<()> {
        let conv = self
            .layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Conv(c) => Some(c),
                _ => None,
            })
            .nth(index)
            .ok_or_else(|| Error::param(format!("no convolution {index}")))?;
        if filter >= conv.c_out || input >= conv.c_in || kernel.size() != 3 {
            return Err(Error::Shape("kernel does not fit the convolution".into()));
        }
        let off = (filter * conv.c_in + input) * 9;
        conv.weight.value[off..off + 9].copy_from_slice(kernel.weights());
        Ok(())
    }

    pub fn kernel_set(&self, model: &str, dataset: Option<String>) -> Result<KernelSet> {
        let layers = self
            .convs()
            .enumerate()
            .map(|(depth, conv)| {
                let kernels = conv
                    .weight
                    .value
                    .chunks(9)
                    .map(|w| Kernel::new(3, w.to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                KernelLayer::new(conv.name.clone(), depth, conv.c_in, conv.c_out, kernels)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelSet::new(model, dataset, layers))
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv(c) => out.push(&c.weight),
                Layer::BatchNorm(b) => {
                    out.push(&b.gamma);
                    out.push(&b.beta);
                }
                Layer::Dense(d) => {
                    out.push(&d.weight);
                    out.push(&d.bias);
                }
                Layer::Relu | Layer::MaxPool => {}
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv(c) => out.push(&mut c.weight),
                Layer::BatchNorm(b) => {
                    out.push(&mut b.gamma);
                    out.push(&mut b.beta);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weight);
                    out.push(&mut d.bias);
                }
                Layer::Relu | Layer::MaxPool => {}
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// All trainable values, in layer order.
    pub fn parameters(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "{} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut off = 0;
        for p in self.params_mut() {
            let n = p.value.len();
            p.value.copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Gradients from the last `backward`/`regularize`, same order as
    /// [`TinyNet::parameters`].
    pub fn gradients(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Forward> {
        let (c, h, w) = self.input;
        if (x.c, x.h, x.w) != (c, h, w) || x.n == 0 {
            return Err(Error::Shape(format!(
                "expected batch of {c}x{h}x{w}, got {}x{}x{}x{}",
                x.n, x.c, x.h, x.w
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::Conv(conv) => (conv.forward(&cur), Cache::Input(cur)),
                Layer::BatchNorm(bn) => match mode {
                    Mode::Train => {
                        let (y, c) = bn.forward_train(&cur);
                        (y, Cache::Bn(c))
                    }
                    Mode::Eval => (bn.forward_eval(&cur), Cache::None),
                },
                Layer::Relu => {
                    let y = layers::relu_forward(&cur);
                    (y.clone(), Cache::Output(y))
                }
                Layer::MaxPool => {
                    let (y, arg) = layers::maxpool_forward(&cur);
                    (y, Cache::Pool(cur, arg))
                }
                Layer::Dense(d) => (d.forward(&cur), Cache::Input(cur)),
            };
            caches.push(cache);
            cur = next;
        }
        Ok(Forward { logits: cur, caches })
    }

    /// Back-propagates `dlogits` through a training-mode forward pass and
    /// stores parameter gradients.
    pub fn backward(&mut self, fwd: &Forward, dlogits: &Tensor) -> Result<()> {
        let mut d = dlogits.clone();
        for (layer, cache) in self.layers.iter_mut().zip(&fwd.caches).rev() {
            d = match (layer, cache) {
                (Layer::Conv(conv), Cache::Input(x)) => conv.backward(x, &d),
                (Layer::BatchNorm(bn), Cache::Bn(c)) => bn.backward(c, &d),
                (Layer::Relu, Cache::Output(y)) => layers::relu_backward(y, &d),
                (Layer::MaxPool, Cache::Pool(x, arg)) => layers::maxpool_backward(x, arg, &d),
                (Layer::Dense(dense), Cache::Input(x)) => dense.backward(x, &d),
                _ => return Err(Error::param("backward needs a training-mode forward pass")),
            };
        }
        Ok(())
    }

    fn reg_specs(&self, lambda: f64, reg: &RegMode) -> Result<Vec<Option<RegSpec>>> {
        let n_conv = self.convs().count();
        match reg {
            RegMode::Uniform => Ok(vec![None; n_conv]),
            RegMode::Loco(factors) => {
                if factors.len() != n_conv {
                    return Err(Error::Shape(format!(
                        "{} (gamma, eta) pairs for {n_conv} convolutions",
                        factors.len()
                    )));
                }
                factors.iter().map(|&(g, e)| RegSpec::l2(lambda, g, e).map(Some)).collect()
            }
        }
    }

    /// Regularization loss alone, summed in the same order as [`TinyNet::regularize`].
    pub fn regularization_loss(&self, lambda: f64, reg: &RegMode) -> Result<f64> {
        let specs = self.reg_specs(lambda, reg)?;
        let mut loss = 0.0;
        let mut conv_idx = 0;
        for layer in &self.layers {
            match layer {
                Layer::Conv(conv) => {
                    let spec = &specs[conv_idx];
                    conv_idx += 1;
                    for w in conv.weight.value.chunks(9) {
                        loss += match spec {
                            None => uniform_l2(w, lambda),
                            Some(s) => loco_loss(&Kernel::new(3, w.to_vec())?, s)?,
                        };
                    }
                }
                Layer::Dense(d) => loss += uniform_l2(&d.weight.value, lambda),
                _ => {}
            }
        }
        Ok(loss)
    }

    /// Adds the regularization gradient to the stored gradients and returns
    /// the regularization loss.
    pub fn regularize(&mut self, lambda: f64, reg: &RegMode) -> Result<f64> {
        let specs = self.reg_specs(lambda, reg)?;
        let mut loss = 0.0;
        let mut scratch = [0.0; 9];
        let mut conv_idx = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(conv) => {
                    let spec = &specs[conv_idx];
                    conv_idx += 1;
                    let p = &mut conv.weight;
                    for (w, g) in p.value.chunks(9).zip(p.grad.chunks_mut(9)) {
                        match spec {
                            None => {
                                loss += uniform_l2(w, lambda);
                                uniform_l2_grad_into(w, lambda, &mut scratch);
                            }
                            Some(s) => {
                                loss += loco_loss(&Kernel::new(3, w.to_vec())?, s)?;
                                loco_grad_into(w, s, &mut scratch)?;
                            }
                        }
                        for (gi, si) in g.iter_mut().zip(&scratch) {
                            *gi += si;
                        }
                    }
                }
                Layer::Dense(d) => {
                    let p = &mut d.weight;
                    loss += uniform_l2(&p.value, lambda);
                    let coef = 2.0 * lambda;
                    for (g, w) in p.grad.iter_mut().zip(&p.value) {
                        *g += coef * w;
                    }
                }
                _ => {}
            }
        }
        Ok(loss)
    }

    /// Training-mode loss without touching gradients or running statistics.
    pub fn loss(&self, x: &Tensor, labels: &[usize], lambda: f64, reg: &RegMode) -> Result<StepLoss> {
        let fwd = self.forward(x, Mode::Train)?;
        let (data, _) = softmax_cross_entropy(&fwd.logits, labels)?;
        Ok(StepLoss {
            data,
            reg: self.regularization_loss(lambda, reg)?,
        })
    }

    /// Data loss plus regularization, with gradients left in the network.
    pub fn loss_and_gradient(&mut self, x: &Tensor, labels: &[usize], lambda: f64, reg: &RegMode) -> Result<StepLoss> {
        let fwd = self.forward(x, Mode::Train)?;
        let (data, dlogits) = softmax_cross_entropy(&fwd.logits, labels)?;
        self.backward(&fwd, &dlogits)?;
        let reg = self.regularize(lambda, reg)?;
        self.update_running_stats(&fwd);
        Ok(StepLoss { data, reg })
    }

    fn update_running_stats(&mut self, fwd: &Forward) {
        for (layer, cache) in self.layers.iter_mut().zip(&fwd.caches) {
            if let (Layer::BatchNorm(bn), Cache::Bn(c)) = (layer, cache) {
                let count = c.xhat.len() / bn.c;
                bn.update_running(c, count);
            }
        }
    }

    /// Eval-mode class probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(softmax(&self.forward(x, Mode::Eval)?.logits))
    }

    fn sgd(&mut self, lr: f64, momentum: f64) {
        for p in self.params_mut() {
            for ((w, v), g) in p.value.iter_mut().zip(p.velocity.iter_mut()).zip(&p.grad) {
                *v = momentum * *v + g;
                *w -= lr * *v;
            }
        }
    }
}

/// One optimization step on a batch; `step` only labels diagnostics.
pub fn train_step(
    net: &mut TinyNet,
    x: &Tensor,
    labels: &[usize],
    config: &TrainConfig,
    lr: f64,
    step: usize,
) -> Result<StepLoss> {
    let loss = net.loss_and_gradient(x, labels, config.lambda, &config.reg)?;
    if !loss.total().is_finite() {
        return Err(Error::NonFiniteLoss {
            loss: loss.total(),
            step,
        });
    }
    net.sgd(lr, config.momentum);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Sample-weighted mean of data plus regularization loss.
    pub train_loss: f64,
    pub data_loss: f64,
    pub reg_loss: f64,
    pub test_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub kernels: KernelSet,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,lr,train_loss,data_loss,reg_loss,test_error";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for e in &self.epochs {
            let err = e.test_error.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e.epoch, e.learning_rate, e.train_loss, e.data_loss, e.reg_loss, err
            );
        }
        s
    }

    pub fn final_test_error(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.test_error)
    }
}

fn gather(samples: &[Sample], idx: &[usize], dims: (usize, usize, usize), flips: Option<&[bool]>) -> (Tensor, Vec<usize>) {
    let (c, h, w) = dims;
    let len = c * h * w;
    let mut data = Vec::with_capacity(idx.len() * len);
    let mut labels = Vec::with_capacity(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let s = &samples[i];
        if flips.is_some_and(|f| f[k]) {
            for row in s.pixels.chunks(w) {
                data.extend(row.iter().rev());
            }
        } else {
            data.extend_from_slice(&s.pixels);
        }
        labels.push(s.label);
    }
    (Tensor { n: idx.len(), c, h, w, data }, labels)
}

/// Fraction of misclassified samples in eval mode.
pub fn error_rate(net: &TinyNet, samples: &[Sample], dims: (usize, usize, usize)) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut wrong = 0;
    for chunk in idx.chunks(256) {
        let (x, labels) = gather(samples, chunk, dims, None);
        let logits = net.forward(&x, Mode::Eval)?.logits;
        let k = logits.sample_len();
        for (row, &y) in logits.data.chunks(k).zip(&labels) {
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            if best != y {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / samples.len() as f64)
}

/// Trains a fresh network. Initialization uses `net_config.seed`; data
/// order and flips use `train_config.seed`.
pub fn train(net_config: &TinyNetConfig, train_config: &TrainConfig, dataset: &Dataset) -> Result<TrainReport> {
    train_config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = (dataset.channels, dataset.height, dataset.width);
    if net_config.input != dims {
        return Err(Error::Shape(format!(
            "network expects {:?} inputs, dataset has {dims:?}",
            net_config.input
        )));
    }
    let mut net = TinyNet::new(net_config)?;
    if net.classes() != dataset.classes {
        return Err(Error::Shape(format!(
            "network has {} outputs for {} classes",
            net.classes(),
            dataset.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut epochs = Vec::with_capacity(train_config.epochs);
    let mut step = 0;
    for epoch in 0..train_config.epochs {
        let lr = train_config.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut data_sum, mut reg_sum) = (0.0, 0.0);
        for batch in order.chunks(train_config.batch_size) {
            let flips: Vec<bool> = batch
                .iter()
                .map(|_| train_config.flip && rng.gen::<bool>())
                .collect();
            let (x, labels) = gather(&dataset.train, batch, dims, Some(&flips));
            let loss = train_step(&mut net, &x, &labels, train_config, lr, step)?;
            step += 1;
            data_sum += loss.data * batch.len() as f64;
            reg_sum += loss.reg * batch.len() as f64;
        }
        let n = dataset.train.len() as f64;
        let test_error = if dataset.test.is_empty() {
            None
        } else {
            Some(error_rate(&net, &dataset.test, dims)?)
        };
        epochs.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: (data_sum + reg_sum) / n,
            data_loss: data_sum / n,
            reg_loss: reg_sum / n,
            test_error,
        });
    }
    let kernels = net.kernel_set("tinycnn", Some("synthetic".into()))?;
    Ok(TrainReport { epochs, kernels })
}
