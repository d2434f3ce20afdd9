//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gamma at `n / 2` for positive integer `n`, by recursion from 1 and sqrt(pi).
pub fn gamma_half(n: u32) -> f64 {
    assert!(n > 0);
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while x < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

pub fn t_density(x: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * PI).sqrt() * gamma_half(df));
    c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0)
}

/// Student-t CDF by composite Simpson integration of the density on [0, t].
pub fn t_cdf_simpson(t: f64, df: u32) -> f64 {
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = t_density(0.0, df) + t_density(t.abs(), df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(i as f64 * h, df);
    }
    let half = s * h / 3.0;
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Total pairwise cohesion by direct double loop over ordered pairs.
pub fn brute_cohesion(masses: &[f64], k: usize, c0: f64, q: f64) -> f64 {
    let mut total = 0.0;
    for a in 0..k * k {
        for b in 0..k * k {
            if a == b {
                continue;
            }
            let (ra, ca) = ((a / k) as f64, (a % k) as f64);
            let (rb, cb) = ((b / k) as f64, (b % k) as f64);
            let d = ((ra - rb).powi(2) + (ca - cb).powi(2)).sqrt();
            total += c0 * masses[a] * masses[b] / d.powf(q);
        }
    }
    total / 2.0
}

/// Center cell's share `m_c * sum_j c0 m_j / d^q` of a `k x k` patch.
pub fn brute_center_contribution(patch: &[f64], k: usize, c0: f64, q: f64) -> f64 {
    let c = k / 2;
    let mc = patch[c * k + c];
    let mut s = 0.0;
    for r in 0..k {
        for col in 0..k {
            if (r, col) == (c, c) {
                continue;
            }
            let d = (((r as f64) - c as f64).powi(2) + ((col as f64) - c as f64).powi(2)).sqrt();
            s += c0 * patch[r * k + col] / d.powf(q);
        }
    }
    mc * s
}

/// Sequential exhaustive argmax placement: at each step scan every center,
/// skip invalid ones, keep the first maximum in row-major order.
pub fn brute_placements(
    values: &[f64],
    rows: usize,
    cols: usize,
    k: usize,
    n: usize,
    score: impl Fn(&[f64]) -> f64,
    overlap: bool,
) -> Option<Vec<(usize, usize)>> {
    let h = k / 2;
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for _ in 0..n {
        let mut best: Option<((usize, usize), f64)> = None;
        for r in h..rows - h {
            for c in h..cols - h {
                let blocked = chosen.iter().any(|&(cr, cc)| {
                    if overlap {
                        (cr, cc) == (r, c)
                    } else {
                        cr.abs_diff(r) < k && cc.abs_diff(c) < k
                    }
                });
                if blocked {
                    continue;
                }
                let mut patch = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        patch.push(values[(r + i - h) * cols + (c + j - h)]);
                    }
                }
                let s = score(&patch);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some(((r, c), s));
                }
            }
        }
        chosen.push(best?.0);
    }
    Some(chosen)
}

/// Relative error of two vectors in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(f64::MIN_POSITIVE)
}
