use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let upper = student_t_upper_tail(t, df);
    1.0 - upper
}

/// `P(T > t)`, evaluated directly so small tails keep their precision.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let half_tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub mean: f64,
    pub n: usize,
}

/// One-sided one-sample t-test of `mean > 0`.
pub fn t_test_one_sided(samples: &[f64]) -> Result<TTest> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (sd / nf.sqrt());
    let df = nf - 1.0;
    Ok(TTest {
        t,
        p: student_t_upper_tail(t, df),
        df,
        mean,
        n,
    })
}

/// Significance marker: `***` below .001, `**` below .01, `*` below .1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}
