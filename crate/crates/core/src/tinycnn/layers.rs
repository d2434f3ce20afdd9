use crate::error::{Error, Result};

/// Dense NCHW activation buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "{n}x{c}x{h}x{w} tensor needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    fn like(&self) -> Self {
        Self::zeros(self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Self {
            value,
            grad: vec![0.0; n],
            velocity: vec![0.0; n],
        }
    }
}

/// 3x3 cross-correlation with zero "same" padding and no bias.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    /// `[c_out][c_in][3][3]`
    pub weight: Param,
}

// rows of the output whose tap `i` lands inside the input
#[inline]
fn valid(i: usize, len: usize) -> (usize, usize) {
    (1usize.saturating_sub(i), (len + 1).saturating_sub(i).min(len))
}

impl Conv {
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (h, w) = (x.h, x.w);
        let mut out = Tensor::zeros(x.n, self.c_out, h, w);
        for n in 0..x.n {
            for f in 0..self.c_out {
                let o = &mut out.data[(n * self.c_out + f) * h * w..][..h * w];
                for c in 0..self.c_in {
                    let inp = &x.data[(n * self.c_in + c) * h * w..][..h * w];
                    let kw = &self.weight.value[(f * self.c_in + c) * 9..][..9];
                    for i in 0..3 {
                        let (y0, y1) = valid(i, h);
                        for j in 0..3 {
                            let (x0, x1) = valid(j, w);
                            let k = kw[i * 3 + j];
                            for y in y0..y1 {
                                let src = &inp[(y + i - 1) * w..][..w];
                                let dst = &mut o[y * w..][..w];
                                for xx in x0..x1 {
                                    dst[xx] += k * src[xx + j - 1];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Writes the weight gradient and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor, dout: &Tensor) -> Tensor {
        let (h, w) = (x.h, x.w);
        let mut dx = x.like();
        self.weight.grad.iter_mut().for_each(|g| *g = 0.0);
        for n in 0..x.n {
            for f in 0..self.c_out {
                let d = &dout.data[(n * self.c_out + f) * h * w..][..h * w];
                for c in 0..self.c_in {
                    let base = (n * self.c_in + c) * h * w;
                    let widx = (f * self.c_in + c) * 9;
                    for i in 0..3 {
                        let (y0, y1) = valid(i, h);
                        for j in 0..3 {
                            let (x0, x1) = valid(j, w);
                            let k = self.weight.value[widx + i * 3 + j];
                            let mut acc = 0.0;
                            for y in y0..y1 {
                                let row = base + (y + i - 1) * w;
                                let src = &x.data[row..][..w];
                                let dst = &mut dx.data[row..][..w];
                                let dr = &d[y * w..][..w];
                                for xx in x0..x1 {
                                    acc += dr[xx] * src[xx + j - 1];
                                    dst[xx + j - 1] += k * dr[xx];
                                }
                            }
                            self.weight.grad[widx + i * 3 + j] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BatchNorm {
    pub c: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            gamma: Param::new(vec![1.0; c]),
            beta: Param::new(vec![0.0; c]),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let hw = x.h * x.w;
        let mut out = x.clone();
        for n in 0..x.n {
            for c in 0..self.c {
                let inv = 1.0 / (self.running_var[c] + self.eps).sqrt();
                let (g, b, m) = (self.gamma.value[c], self.beta.value[c], self.running_mean[c]);
                for v in &mut out.data[(n * self.c + c) * hw..][..hw] {
                    *v = g * ((*v - m) * inv) + b;
                }
            }
        }
        out
    }

    pub fn forward_train(&self, x: &Tensor) -> (Tensor, BnCache) {
        let hw = x.h * x.w;
        let count = (x.n * hw) as f64;
        let mut mean = vec![0.0; self.c];
        let mut var = vec![0.0; self.c];
        for c in 0..self.c {
            let mut s = 0.0;
            for n in 0..x.n {
                s += x.data[(n * self.c + c) * hw..][..hw].iter().sum::<f64>();
            }
            mean[c] = s / count;
            let mut ss = 0.0;
            for n in 0..x.n {
                ss += x.data[(n * self.c + c) * hw..][..hw]
                    .iter()
                    .map(|v| (v - mean[c]).powi(2))
                    .sum::<f64>();
            }
            var[c] = ss / count;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = vec![0.0; x.data.len()];
        let mut out = x.like();
        for n in 0..x.n {
            for c in 0..self.c {
                let off = (n * self.c + c) * hw;
                for k in off..off + hw {
                    xhat[k] = (x.data[k] - mean[c]) * inv_std[c];
                    out.data[k] = self.gamma.value[c] * xhat[k] + self.beta.value[c];
                }
            }
        }
        (out, BnCache { xhat, inv_std, mean, var })
    }

    pub fn backward(&mut self, cache: &BnCache, dout: &Tensor) -> Tensor {
        let hw = dout.h * dout.w;
        let m = (dout.n * hw) as f64;
        let mut dx = dout.like();
        for c in 0..self.c {
            let (mut sum_d, mut sum_dx) = (0.0, 0.0);
            for n in 0..dout.n {
                let off = (n * self.c + c) * hw;
                for k in off..off + hw {
                    sum_d += dout.data[k];
                    sum_dx += dout.data[k] * cache.xhat[k];
                }
            }
            self.gamma.grad[c] = sum_dx;
            self.beta.grad[c] = sum_d;
            let g = self.gamma.value[c];
            let scale = g * cache.inv_std[c] / m;
            for n in 0..dout.n {
                let off = (n * self.c + c) * hw;
                for k in off..off + hw {
                    dx.data[k] = scale * (m * dout.data[k] - sum_d - cache.xhat[k] * sum_dx);
                }
            }
        }
        dx
    }

    pub fn update_running(&mut self, cache: &BnCache, count: usize) {
        let unbias = if count > 1 {
            count as f64 / (count - 1) as f64
        } else {
            1.0
        };
        for c in 0..self.c {
            self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * cache.mean[c];
            self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * cache.var[c] * unbias;
        }
    }
}

pub(crate) fn relu_forward(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    // NaN passes through so divergence surfaces in the loss
    out.data.iter_mut().filter(|v| **v < 0.0).for_each(|v| *v = 0.0);
    out
}

pub(crate) fn relu_backward(out: &Tensor, dout: &Tensor) -> Tensor {
    let mut dx = dout.clone();
    for (d, &o) in dx.data.iter_mut().zip(&out.data) {
        if o <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub(crate) fn maxpool_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.n, x.c, oh, ow);
    let mut arg = vec![0; out.data.len()];
    for nc in 0..x.n * x.c {
        let base = nc * x.h * x.w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * y * x.w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let k = base + (2 * y + dy) * x.w + 2 * xx + dx;
                    if x.data[k] > x.data[best] {
                        best = k;
                    }
                }
                let o = (nc * oh + y) * ow + xx;
                out.data[o] = x.data[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

pub(crate) fn maxpool_backward(input: &Tensor, arg: &[usize], dout: &Tensor) -> Tensor {
    let mut dx = input.like();
    for (o, &k) in arg.iter().enumerate() {
        dx.data[k] += dout.data[o];
    }
    dx
}

/// Fully connected layer over the flattened sample.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs][inputs]`
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let d = x.sample_len();
        let mut out = Tensor::zeros(x.n, self.outputs, 1, 1);
        for n in 0..x.n {
            let xi = &x.data[n * d..][..d];
            for o in 0..self.outputs {
                let row = &self.weight.value[o * d..][..d];
                let mut acc = self.bias.value[o];
                for (a, b) in row.iter().zip(xi) {
                    acc += a * b;
                }
                out.data[n * self.outputs + o] = acc;
            }
        }
        out
    }

    pub fn backward(&mut self, x: &Tensor, dout: &Tensor) -> Tensor {
        let d = x.sample_len();
        let mut dx = x.like();
        self.weight.grad.iter_mut().for_each(|g| *g = 0.0);
        self.bias.grad.iter_mut().for_each(|g| *g = 0.0);
        for n in 0..x.n {
            let xi = &x.data[n * d..][..d];
            for o in 0..self.outputs {
                let g = dout.data[n * self.outputs + o];
                self.bias.grad[o] += g;
                let wg = &mut self.weight.grad[o * d..][..d];
                for (wgk, xk) in wg.iter_mut().zip(xi) {
                    *wgk += g * xk;
                }
                let row = &self.weight.value[o * d..][..d];
                let dxi = &mut dx.data[n * d..][..d];
                for (dk, wk) in dxi.iter_mut().zip(row) {
                    *dk += g * wk;
                }
            }
        }
        dx
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let k = logits.sample_len();
    if labels.len() != logits.n {
        return Err(Error::Shape(format!("{} labels for {} samples", labels.len(), logits.n)));
    }
    let probs = softmax(logits);
    let mut grad = probs.clone();
    let mut loss = 0.0;
    let scale = 1.0 / logits.n as f64;
    for (n, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Shape(format!("label {y} with {k} classes")));
        }
        let row = &logits.data[n * k..][..k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[y] - max - lse;
        grad.data[n * k + y] -= 1.0;
    }
    grad.data.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Row-wise softmax over the flattened sample.
pub fn softmax(logits: &Tensor) -> Tensor {
    let k = logits.sample_len();
    let mut out = logits.clone();
    for row in out.data.chunks_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_ranges() {
        assert_eq!(valid(0, 5), (1, 5));
        assert_eq!(valid(1, 5), (0, 5));
        assert_eq!(valid(2, 5), (0, 4));
        assert_eq!(valid(0, 1), (1, 1));
        assert_eq!(valid(2, 1), (0, 0));
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let x = Tensor::from_vec(1, 1, 2, 4, vec![1.0, 5.0, 0.0, 0.0, 2.0, 3.0, 0.0, 7.0]).unwrap();
        let (y, arg) = maxpool_forward(&x);
        assert_eq!(y.data, vec![5.0, 7.0]);
        let dx = maxpool_backward(&x, &arg, &Tensor::from_vec(1, 1, 1, 2, vec![1.0, 2.0]).unwrap());
        assert_eq!(dx.data, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let logits = Tensor::zeros(2, 4, 1, 1);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert!((grad.data[0] + 0.375).abs() < 1e-15);
        assert!((grad.data[1] - 0.125).abs() < 1e-15);
        assert!(softmax_cross_entropy(&logits, &[4, 0]).is_err());
    }
}
