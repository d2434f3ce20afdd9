//! Locating a single feature on a noisy 1-D feature map.
//!
//! The map is `m(x) = g(x) + e_x` with a symmetric, peaked strength profile
//! `g` (peak at 0) and i.i.d. zero-mean noise `e_x`. A window `w` of length
//! `2k + 1` scores each position by `f(x, w) = sum_j w_j * m(x + j)` and the
//! estimated location is the argmax of `f`.
//!
//! Noise is drawn from a [`ChaCha8Rng`] seeded with the 64-bit seed of the
//! [`NoiseSpec`], transformed to standard normals by the ziggurat sampler of
//! `rand_distr::StandardNormal`, and scaled by `s`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Noise-free feature strength as a function of offset from the true
/// location.
#[derive(Clone)]
pub struct StrengthProfile {
    g: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
    half_width: usize,
}

impl fmt::Debug for StrengthProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrengthProfile")
            .field("half_width", &self.half_width)
            .finish_non_exhaustive()
    }
}

impl StrengthProfile {
    /// Wraps `g`, checking symmetry, strict decrease away from 0 and strictly
    /// shrinking decrements on `0..=half_width + 2`.
    pub fn new(g: impl Fn(i64) -> f64 + Send + Sync + 'static, half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::param("profile half-width must be >= 1"));
        }
        let hw = half_width as i64;
        for x in 0..=hw + 2 {
            let (a, b, c) = (g(x), g(x + 1), g(x + 2));
            if !a.is_finite() || g(-x) != a {
                return Err(Error::param(format!("profile not symmetric at {x}")));
            }
            if !(a > b) {
                return Err(Error::param(format!("profile not strictly decreasing at {x}")));
            }
            if !(a - b > b - c) {
                return Err(Error::param(format!("profile decrements do not shrink at {x}")));
            }
        }
        Ok(Self {
            g: Arc::new(g),
            half_width,
        })
    }

    /// `amplitude * 2^-|x|`.
    pub fn halving(amplitude: f64, half_width: usize) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::param("amplitude must be positive"));
        }
        Self::new(move |x| amplitude * 0.5f64.powi(x.unsigned_abs() as i32), half_width)
    }

    #[inline]
    pub fn eval(&self, x: i64) -> f64 {
        (self.g)(x)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Samples `g` on `-half_width..=half_width`.
    pub fn sample(&self) -> Vec<f64> {
        let hw = self.half_width as i64;
        (-hw..=hw).map(|x| self.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub s: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(s: f64, seed: u64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::param(format!("noise sd must be finite and >= 0, got {s}")));
        }
        Ok(Self { s, seed })
    }
}

/// Weights `w_{-k}..=w_k` of a centered 1-D window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window1D {
    half_width: usize,
    weights: Vec<f64>,
}

impl Window1D {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() % 2 == 0 {
            return Err(Error::Shape(format!("window length must be odd, got {}", weights.len())));
        }
        Ok(Self {
            half_width: weights.len() / 2,
            weights,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `j` in `-k..=k`.
    #[inline]
    pub fn at(&self, j: i64) -> f64 {
        self.weights[(j + self.half_width as i64) as usize]
    }

    pub fn norm(&self) -> f64 {
        self.sum_sq().sqrt()
    }

    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    fn offsets(&self) -> impl Iterator<Item = i64> {
        let k = self.half_width as i64;
        -k..=k
    }
}

/// Index of the position maximizing `f(x, w)` over all positions where the
/// window fits entirely. Ties go to the smallest index.
pub fn convolve_and_locate(map: &[f64], window: &Window1D) -> Result<usize> {
    let len = window.weights.len();
    if map.len() < len {
        return Err(Error::TooShort {
            needed: len,
            got: map.len(),
        });
    }
    let k = window.half_width;
    let mut best = (k, f64::NEG_INFINITY);
    for x in k..map.len() - k {
        let f: f64 = window
            .weights
            .iter()
            .zip(&map[x - k..=x + k])
            .map(|(w, m)| w * m)
            .sum();
        if f > best.1 {
            best = (x, f);
        }
    }
    Ok(best.0)
}

/// `E[f(0, w) - f(x, w)] = sum_j w_j (g(j) - g(x + j))`.
pub fn expectation_gap(profile: &StrengthProfile, window: &Window1D, x: i64) -> Result<f64> {
    if x == 0 {
        return Err(Error::param("offset must be nonzero"));
    }
    Ok(window
        .offsets()
        .map(|j| window.at(j) * (profile.eval(j) - profile.eval(x + j)))
        .sum())
}

/// Smallest expectation gap over offsets `1..=half_width` in both directions.
pub fn worst_case_gap(profile: &StrengthProfile, window: &Window1D) -> f64 {
    let hw = profile.half_width() as i64;
    (-hw..=hw)
        .filter(|&x| x != 0)
        .map(|x| expectation_gap(profile, window, x).expect("x is nonzero"))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowObjective {
    /// Best worst-case expectation gap.
    Expectation,
    /// Smallest variance of the gap under a unit-norm constraint.
    Variance,
}

/// The unit-norm window optimal for `mode`.
pub fn optimal_window(mode: WindowObjective, k: usize) -> Result<Window1D> {
    if k == 0 {
        return Err(Error::param("window half-width must be >= 1"));
    }
    let n = 2 * k + 1;
    let weights = match mode {
        WindowObjective::Expectation => {
            let mut w = vec![0.0; n];
            w[k] = 1.0;
            w
        }
        WindowObjective::Variance => vec![1.0 / (n as f64).sqrt(); n],
    };
    Window1D::new(weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMoments {
    pub mean: f64,
    pub variance: f64,
    pub trials: usize,
}

impl GapMoments {
    /// Standard error of the sample variance for Gaussian data with true
    /// variance `sigma2`.
    pub fn variance_standard_error(&self, sigma2: f64) -> f64 {
        sigma2 * (2.0 / (self.trials as f64 - 1.0)).sqrt()
    }
}

/// What the score at an offset is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// The noise-free score `sum_j w_j g(j)` at the true location.
    Clean,
    /// The score at the true location computed from the same noisy map.
    Noisy,
}

/// Exact variance of `f(x, w) - reference` for i.i.d. noise with sd `s`.
///
/// Against a clean reference this is `s^2 * sum_j w_j^2`. Against a noisy
/// reference the two windows share noise where they overlap, giving
/// `s^2 * sum_p (w_{p - x} - w_p)^2`, which is twice the clean value once
/// `|x| > 2k`.
pub fn gap_variance(window: &Window1D, x: i64, s: f64, reference: Reference) -> f64 {
    let s2 = s * s;
    match reference {
        Reference::Clean => s2 * window.sum_sq(),
        Reference::Noisy => {
            let k = window.half_width as i64;
            let w = |j: i64| if j.abs() <= k { window.at(j) } else { 0.0 };
            let lo = (-k).min(x - k);
            let hi = k.max(x + k);
            s2 * (lo..=hi).map(|p| (w(p - x) - w(p)).powi(2)).sum::<f64>()
        }
    }
}

/// Monte-Carlo moments of `f(x, w) - f(0, w)` where only the score at `x`
/// sees noise, i.e. [`simulate_gap_variance_against`] with
/// [`Reference::Clean`].
pub fn simulate_gap_variance(
    profile: &StrengthProfile,
    window: &Window1D,
    noise: &NoiseSpec,
    x: i64,
    trials: usize,
) -> Result<GapMoments> {
    simulate_gap_variance_against(profile, window, noise, x, trials, Reference::Clean)
}

/// Monte-Carlo moments of `f(x, w) - f(0, w)` over fresh noise draws.
///
/// Each trial draws one noise value per map position covered by either
/// window, so with a noisy reference overlapping windows share samples.
pub fn simulate_gap_variance_against(
    profile: &StrengthProfile,
    window: &Window1D,
    noise: &NoiseSpec,
    x: i64,
    trials: usize,
    reference: Reference,
) -> Result<GapMoments> {
    if trials < 2 {
        return Err(Error::param("need at least 2 trials"));
    }
    if x == 0 {
        return Err(Error::param("offset must be nonzero"));
    }
    let k = window.half_width as i64;
    let lo = (-k).min(x - k);
    let hi = k.max(x + k);
    let clean: Vec<f64> = (lo..=hi).map(|p| profile.eval(p)).collect();
    let score = |map: &[f64], center: i64| -> f64 {
        window
            .offsets()
            .map(|j| window.at(j) * map[(center + j - lo) as usize])
            .sum()
    };
    let clean_reference = score(&clean, 0);

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut map = vec![0.0; clean.len()];
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..trials {
        for (slot, g) in map.iter_mut().zip(&clean) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *slot = g + noise.s * z;
        }
        let reference = match reference {
            Reference::Clean => clean_reference,
            Reference::Noisy => score(&map, 0),
        };
        let d = score(&map, x) - reference;
        let delta = d - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (d - mean);
    }
    Ok(GapMoments {
        mean,
        variance: m2 / (trials - 1) as f64,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g8() -> StrengthProfile {
        StrengthProfile::halving(8.0, 4).unwrap()
    }

    #[test]
    fn profile_invariants_enforced() {
        assert!(StrengthProfile::new(|x| -(x.abs() as f64), 3).is_err());
        assert!(StrengthProfile::new(|x| if x >= 0 { 1.0 / (1 + x) as f64 } else { 0.0 }, 3).is_err());
        assert!(StrengthProfile::new(|x| 10.0 - x.abs() as f64, 3).is_err());
        assert_eq!(g8().sample(), vec![0.5, 1.0, 2.0, 4.0, 8.0, 4.0, 2.0, 1.0, 0.5]);
    }

    #[test]
    fn locate_examples() {
        let delta = Window1D::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(convolve_and_locate(&[0.0, 0.0, 5.0, 0.0, 0.0], &delta).unwrap(), 2);
        let u = optimal_window(WindowObjective::Variance, 1).unwrap();
        assert_eq!(convolve_and_locate(&[1.0, 1.0, 1.0], &u).unwrap(), 1);
        assert_eq!(convolve_and_locate(&g8().sample(), &delta).unwrap(), 4);
        assert!(matches!(
            convolve_and_locate(&[1.0, 2.0], &delta),
            Err(Error::TooShort { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn locate_ties_go_left() {
        let delta = Window1D::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(convolve_and_locate(&[0.0, 3.0, 3.0, 0.0], &delta).unwrap(), 1);
    }

    #[test]
    fn gap_examples() {
        let delta = optimal_window(WindowObjective::Expectation, 1).unwrap();
        assert_eq!(expectation_gap(&g8(), &delta, 1).unwrap(), 4.0);
        let zero = Window1D::new(vec![0.0; 3]).unwrap();
        assert_eq!(expectation_gap(&g8(), &zero, 2).unwrap(), 0.0);
        let u = Window1D::new(vec![1.0 / 3f64.sqrt(); 3]).unwrap();
        let got = expectation_gap(&g8(), &u, 2).unwrap();
        assert!((got - 9.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(expectation_gap(&g8(), &u, 0).is_err());
    }

    #[test]
    fn optimal_windows() {
        let e = optimal_window(WindowObjective::Expectation, 1).unwrap();
        assert_eq!(e.weights(), &[0.0, 1.0, 0.0]);
        let v = optimal_window(WindowObjective::Variance, 2).unwrap();
        assert_eq!(v.weights().len(), 5);
        for w in v.weights() {
            assert!((w - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        }
        for k in 1..10 {
            for mode in [WindowObjective::Expectation, WindowObjective::Variance] {
                assert!((optimal_window(mode, k).unwrap().norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(optimal_window(WindowObjective::Variance, 0).is_err());
    }

    #[test]
    fn noiseless_variance_is_zero() {
        let u = optimal_window(WindowObjective::Variance, 1).unwrap();
        let noise = NoiseSpec::new(0.0, 7).unwrap();
        let m = simulate_gap_variance(&g8(), &u, &noise, 3, 100).unwrap();
        assert_eq!(m.variance, 0.0);
        let gap = expectation_gap(&g8(), &u, 3).unwrap();
        assert!((m.mean + gap).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_seeded() {
        let u = optimal_window(WindowObjective::Variance, 1).unwrap();
        let noise = NoiseSpec::new(1.0, 42).unwrap();
        let a = simulate_gap_variance(&g8(), &u, &noise, 4, 500).unwrap();
        let b = simulate_gap_variance(&g8(), &u, &noise, 4, 500).unwrap();
        assert_eq!(a, b);
        assert!(simulate_gap_variance(&g8(), &u, &noise, 4, 1).is_err());
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn scaled_delta_variance() {
        let delta = optimal_window(WindowObjective::Expectation, 1).unwrap();
        let noise = NoiseSpec::new(2.0, 3).unwrap();
        let m = simulate_gap_variance(&g8(), &delta, &noise, 3, 20_000).unwrap();
        let want = gap_variance(&delta, 3, 2.0, Reference::Clean);
        assert_eq!(want, 4.0);
        assert!((m.variance - want).abs() < 4.0 * m.variance_standard_error(want));
    }

    #[test]
    fn noisy_reference_variance_closed_form() {
        let u = optimal_window(WindowObjective::Variance, 1).unwrap();
        // disjoint: two independent windows
        assert!((gap_variance(&u, 3, 1.0, Reference::Noisy) - 2.0).abs() < 1e-12);
        // x = 1 shares two positions: weights differ only at the two ends
        assert!((gap_variance(&u, 1, 1.0, Reference::Noisy) - 2.0 / 3.0).abs() < 1e-12);
        let noise = NoiseSpec::new(1.0, 11).unwrap();
        for x in [1, 2, 3, -2] {
            let want = gap_variance(&u, x, 1.0, Reference::Noisy);
            let m = simulate_gap_variance_against(&g8(), &u, &noise, x, 20_000, Reference::Noisy).unwrap();
            assert!((m.variance - want).abs() < 4.0 * m.variance_standard_error(want), "x={x}");
        }
    }
}
