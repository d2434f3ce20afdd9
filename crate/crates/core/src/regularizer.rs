//! Locality-promoting L2 regularization (LOCO-REG).
//!
//! Each weight of a 3x3 kernel is penalized with a factor depending on its
//! distance from the center: `gamma` at the center, 1 at the four direct
//! neighbors and `eta` at the four corners. Factors are normalized by their
//! mean `Z = (gamma + 4 (1 + eta)) / 9`, so the total regularization mass over
//! a kernel stays `lambda` per cell on average and `(gamma, eta) = (1, 1)` is
//! plain L2.
//!
//! The `k x k` generalization keys factors by squared distance from the center.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormExponent {
    L1,
    L2,
}

impl NormExponent {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(NormExponent::L1),
            2 => Ok(NormExponent::L2),
            other => Err(Error::param(format!("norm exponent must be 1 or 2, got {other}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            NormExponent::L1 => 1,
            NormExponent::L2 => 2,
        }
    }

    #[inline]
    fn apply(self, w: f64) -> f64 {
        match self {
            NormExponent::L1 => w.abs(),
            NormExponent::L2 => w * w,
        }
    }
}

/// `(gamma + 4 (1 + eta)) / 9`.
pub fn normalization_z(gamma: f64, eta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param(format!("eta must be positive, got {eta}")));
    }
    Ok((gamma + 4.0 * (1.0 + eta)) / 9.0)
}

/// Regularization strength and 3x3 locality factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegSpec {
    lambda: f64,
    gamma: f64,
    eta: f64,
    p: NormExponent,
    z: f64,
}

impl RegSpec {
    pub fn new(lambda: f64, gamma: f64, eta: f64, p: NormExponent) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let z = normalization_z(gamma, eta)?;
        Ok(Self {
            lambda,
            gamma,
            eta,
            p,
            z,
        })
    }

    pub fn l2(lambda: f64, gamma: f64, eta: f64) -> Result<Self> {
        Self::new(lambda, gamma, eta, NormExponent::L2)
    }

    pub fn uniform(lambda: f64) -> Result<Self> {
        Self::l2(lambda, 1.0, 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p(&self) -> NormExponent {
        self.p
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.gamma, self.eta, self.p)
    }

    /// Unnormalized factor of cell `(i, j)` of a 3x3 kernel.
    #[inline]
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        match (i == 1, j == 1) {
            (true, true) => self.gamma,
            (true, false) | (false, true) => 1.0,
            (false, false) => self.eta,
        }
    }

    /// Normalized share `g(i, j)` of the regularization mass; sums to 1.
    pub fn share(&self, i: usize, j: usize) -> f64 {
        self.factor(i, j) / (9.0 * self.z)
    }

    /// Effective per-cell penalty coefficients `lambda * factor / Z`, row-major.
    pub fn cell_coefficients(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (idx, c) in out.iter_mut().enumerate() {
            *c = self.lambda * self.factor(idx / 3, idx % 3) / self.z;
        }
        out
    }

    /// Key-value text block, one `key = value` line per field.
    pub fn to_text(&self) -> String {
        format!(
            "lambda = {}\ngamma = {}\neta = {}\np = {}\n",
            self.lambda,
            self.gamma,
            self.eta,
            self.p.as_int()
        )
    }
}

impl FromStr for RegSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lambda = None;
        let mut gamma = None;
        let mut eta = None;
        let mut p = NormExponent::L2;
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            let num = || value.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}")));
            match key.trim() {
                "lambda" => lambda = Some(num()?),
                "gamma" => gamma = Some(num()?),
                "eta" => eta = Some(num()?),
                "p" => {
                    let v = value.parse::<u32>().map_err(|e| Error::Parse(format!("p: {e}")))?;
                    p = NormExponent::from_int(v)?;
                }
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Parse(format!("missing {name}")));
        RegSpec::new(need(lambda, "lambda")?, need(gamma, "gamma")?, need(eta, "eta")?, p)
    }
}

impl fmt::Display for RegSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn require_3x3(kernel: &Kernel) -> Result<()> {
    if kernel.size() != 3 {
        return Err(Error::Shape(format!("expected a 3x3 kernel, got {0}x{0}", kernel.size())));
    }
    Ok(())
}

/// `lambda / Z * (gamma w_c^p + sum_n w^p + eta sum_co w^p)`.
pub fn loco_loss(kernel: &Kernel, spec: &RegSpec) -> Result<f64> {
    require_3x3(kernel)?;
    let mut acc = 0.0;
    for (idx, &w) in kernel.weights().iter().enumerate() {
        acc += spec.factor(idx / 3, idx % 3) * spec.p.apply(w);
    }
    Ok(spec.lambda / spec.z * acc)
}

/// Gradient of [`loco_loss`] for `p = 2`.
pub fn loco_grad(kernel: &Kernel, spec: &RegSpec) -> Result<Kernel> {
    require_3x3(kernel)?;
    let mut grad = kernel.clone();
    loco_grad_into(kernel.weights(), spec, grad.weights_mut())?;
    Ok(grad)
}

/// Writes the [`loco_loss`] gradient of a row-major 3x3 weight slice into `out`.
pub fn loco_grad_into(weights: &[f64], spec: &RegSpec, out: &mut [f64]) -> Result<()> {
    if spec.p != NormExponent::L2 {
        return Err(Error::param("gradient is only defined for p = 2"));
    }
    if weights.len() != 9 || out.len() != 9 {
        return Err(Error::Shape("expected 9 weights".into()));
    }
    for (idx, (g, &w)) in out.iter_mut().zip(weights).enumerate() {
        let coef = 2.0 * spec.lambda * spec.factor(idx / 3, idx % 3) / spec.z;
        *g = coef * w;
    }
    Ok(())
}

/// Plain `lambda * sum w^2` over a slice.
pub fn uniform_l2(weights: &[f64], lambda: f64) -> f64 {
    let mut acc = 0.0;
    for &w in weights {
        acc += w * w;
    }
    lambda * acc
}

/// Gradient of [`uniform_l2`], written into `out`.
pub fn uniform_l2_grad_into(weights: &[f64], lambda: f64, out: &mut [f64]) {
    let coef = 2.0 * lambda;
    for (g, &w) in out.iter_mut().zip(weights) {
        *g = coef * w;
    }
}

/// Positive factors keyed by squared distance from the kernel center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceClassSpec {
    factors: BTreeMap<usize, f64>,
}

impl DistanceClassSpec {
    pub fn new(factors: BTreeMap<usize, f64>) -> Result<Self> {
        if let Some((d2, f)) = factors.iter().find(|(_, f)| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::param(format!("factor for squared distance {d2} must be positive, got {f}")));
        }
        Ok(Self { factors })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::new(pairs.iter().copied().collect())
    }

    /// The 3x3 classes `{0: gamma, 1: 1, 2: eta}`.
    pub fn three_by_three(gamma: f64, eta: f64) -> Result<Self> {
        Self::from_pairs(&[(0, gamma), (1, 1.0), (2, eta)])
    }

    pub fn factors(&self) -> &BTreeMap<usize, f64> {
        &self.factors
    }

    /// Normalized shares `g(i, j)` over a `k x k` grid, row-major; they sum to 1.
    pub fn shares(&self, k: usize) -> Result<Vec<f64>> {
        let raw = self.raw_factors(k)?;
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|f| f / total).collect())
    }

    fn raw_factors(&self, k: usize) -> Result<Vec<f64>> {
        if k % 2 == 0 || k == 0 {
            return Err(Error::param(format!("kernel size must be odd, got {k}")));
        }
        let c = k / 2;
        let mut out = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let d2 = i.abs_diff(c).pow(2) + j.abs_diff(c).pow(2);
                let f = self.factors.get(&d2).ok_or(Error::MissingClassFactor(d2))?;
                out.push(*f);
            }
        }
        Ok(out)
    }
}

/// Squared distances from the center that occur in a `k x k` grid, ascending.
pub fn squared_distance_classes(k: usize) -> Vec<usize> {
    let c = k / 2;
    let mut out: Vec<usize> = (0..k)
        .flat_map(|i| (0..k).map(move |j| i.abs_diff(c).pow(2) + j.abs_diff(c).pow(2)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Distance-class regularizer for any odd `k`.
///
/// The per-cell coefficient is `lambda * k^2 * g(i, j)`, i.e. the factor divided
/// by the mean factor, so equal factors give plain `lambda * sum |w|^p` and the
/// 3x3 classes `{gamma, 1, eta}` give [`loco_loss`].
pub fn distance_class_loss(kernel: &Kernel, lambda: f64, classes: &DistanceClassSpec, p: NormExponent) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let k = kernel.size();
    let raw = classes.raw_factors(k)?;
    let mean = raw.iter().sum::<f64>() / (k * k) as f64;
    let mut acc = 0.0;
    for (f, &w) in raw.iter().zip(kernel.weights()) {
        acc += f * p.apply(w);
    }
    Ok(lambda / mean * acc)
}

/// Elementwise `m(j) * l(j)`, the best-aligned pattern under a locality
/// weighting `l` that is symmetric and strictly decreasing away from its
/// center.
pub fn pattern_weights(m: &[f64], l: &[f64]) -> Result<Vec<f64>> {
    if m.len() != l.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", m.len(), l.len())));
    }
    if l.len() % 2 == 0 {
        return Err(Error::Shape(format!("locality weighting must have odd length, got {}", l.len())));
    }
    let c = l.len() / 2;
    for d in 0..c {
        if l[c - d] != l[c + d] {
            return Err(Error::param(format!("locality weighting not symmetric at offset {d}")));
        }
        if !(l[c + d] > l[c + d + 1]) {
            return Err(Error::param(format!("locality weighting not strictly decreasing at offset {d}")));
        }
    }
    if l[0] != l[l.len() - 1] {
        return Err(Error::param("locality weighting not symmetric"));
    }
    Ok(m.iter().zip(l).map(|(a, b)| a * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Kernel {
        Kernel::from_rows([[1.0, -2.0, 3.0], [0.5, 4.0, -1.5], [2.0, 0.25, -3.0]])
    }

    #[test]
    fn z_examples() {
        assert_eq!(normalization_z(1.0, 1.0).unwrap(), 1.0);
        assert!((normalization_z(0.5, 2.0).unwrap() - 12.5 / 9.0).abs() < 1e-15);
        assert!(normalization_z(9.0, 0.0).is_err());
        assert!(normalization_z(-1.0, 1.0).is_err());
    }

    #[test]
    fn shares_sum_to_one() {
        let s = RegSpec::l2(1.0, 0.5, 2.0).unwrap();
        let total: f64 = (0..9).map(|i| s.share(i / 3, i % 3)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_case_is_plain_l2() {
        let s = RegSpec::uniform(0.3).unwrap();
        let k = ramp();
        assert_eq!(loco_loss(&k, &s).unwrap(), uniform_l2(k.weights(), 0.3));
        let g = loco_grad(&k, &s).unwrap();
        let mut want = [0.0; 9];
        uniform_l2_grad_into(k.weights(), 0.3, &mut want);
        assert_eq!(g.weights(), &want);
    }

    #[test]
    fn example_coefficients() {
        let s = RegSpec::l2(1.0, 0.5, 2.0).unwrap();
        let c = s.cell_coefficients();
        assert!((c[4] - 0.36).abs() < 1e-12);
        assert!((c[1] - 0.72).abs() < 1e-12);
        assert!((c[0] - 1.44).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel() {
        let s = RegSpec::l2(2.0, 0.5, 2.0).unwrap();
        assert_eq!(loco_loss(&Kernel::zeros(3), &s).unwrap(), 0.0);
        assert!(loco_grad(&Kernel::zeros(3), &s).unwrap().weights().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn wrong_size_rejected() {
        let s = RegSpec::uniform(1.0).unwrap();
        assert!(matches!(loco_loss(&Kernel::zeros(5), &s), Err(Error::Shape(_))));
        assert!(loco_grad(&Kernel::zeros(1), &s).is_err());
        let l1 = RegSpec::new(1.0, 1.0, 1.0, NormExponent::L1).unwrap();
        assert!(loco_grad(&ramp(), &l1).is_err());
    }

    #[test]
    fn l1_variant_uses_abs() {
        let s = RegSpec::new(1.0, 1.0, 1.0, NormExponent::L1).unwrap();
        let want: f64 = ramp().weights().iter().map(|w| w.abs()).sum();
        assert_eq!(loco_loss(&ramp(), &s).unwrap(), want);
    }

    #[test]
    fn distance_classes_reproduce_loco() {
        let spec = RegSpec::l2(0.7, 0.5, 2.0).unwrap();
        let classes = DistanceClassSpec::three_by_three(0.5, 2.0).unwrap();
        let a = loco_loss(&ramp(), &spec).unwrap();
        let b = distance_class_loss(&ramp(), 0.7, &classes, NormExponent::L2).unwrap();
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn five_by_five_classes() {
        assert_eq!(squared_distance_classes(5), vec![0, 1, 2, 4, 5, 8]);
        assert_eq!(squared_distance_classes(3), vec![0, 1, 2]);
        assert_eq!(squared_distance_classes(1), vec![0]);
        let ones = DistanceClassSpec::from_pairs(&[(0, 1.0), (1, 1.0), (2, 1.0), (4, 1.0), (5, 1.0), (8, 1.0)]).unwrap();
        let shares = ones.shares(5).unwrap();
        assert!(shares.iter().all(|g| (g - 1.0 / 25.0).abs() < 1e-15));
        let w = Kernel::new(5, (0..25).map(|i| i as f64 * 0.1 - 1.0).collect()).unwrap();
        let got = distance_class_loss(&w, 2.0, &ones, NormExponent::L2).unwrap();
        let want = 2.0 * w.weights().iter().map(|x| x * x).sum::<f64>();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn missing_class_reported() {
        let c = DistanceClassSpec::three_by_three(1.0, 1.0).unwrap();
        assert!(matches!(
            distance_class_loss(&Kernel::zeros(5), 1.0, &c, NormExponent::L2),
            Err(Error::MissingClassFactor(8))
        ));
        assert!(DistanceClassSpec::from_pairs(&[(0, 0.0)]).is_err());
    }

    #[test]
    fn one_by_one_is_uniform() {
        let c = DistanceClassSpec::from_pairs(&[(0, 3.0)]).unwrap();
        let w = Kernel::new(1, vec![2.0]).unwrap();
        assert_eq!(distance_class_loss(&w, 0.5, &c, NormExponent::L2).unwrap(), 2.0);
        assert!(distance_class_loss(&Kernel::zeros(2), 0.5, &c, NormExponent::L2).is_err());
    }

    #[test]
    fn pattern_weight_examples() {
        assert_eq!(pattern_weights(&[1.0, 1.0, 1.0], &[0.5, 1.0, 0.5]).unwrap(), vec![0.5, 1.0, 0.5]);
        assert_eq!(pattern_weights(&[0.0; 3], &[0.5, 1.0, 0.5]).unwrap(), vec![0.0; 3]);
        assert!(pattern_weights(&[2.0, 4.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(pattern_weights(&[1.0, 1.0], &[1.0, 1.0, 0.5]).is_err());
        assert!(pattern_weights(&[1.0; 3], &[0.4, 1.0, 0.5]).is_err());
    }

    #[test]
    fn regspec_text_roundtrip() {
        let s = RegSpec::new(0.0005, 0.7, 0.77, NormExponent::L2).unwrap();
        let back: RegSpec = s.to_text().parse().unwrap();
        assert_eq!(back, s);
        assert!("lambda = 1\ngamma = 1".parse::<RegSpec>().is_err());
        assert!("lambda = 1\ngamma = 1\neta = 1\nmu = 2".parse::<RegSpec>().is_err());
        assert!("lambda = 1\ngamma = 1\neta = 1\np = 3".parse::<RegSpec>().is_err());
    }
}
