use std::fmt::Write as _;

use locality::cohesion::{critical_epsilon, verify_center_dominance, DominanceCase, ForceParams};
use locality::noise::{
    convolve_and_locate, expectation_gap, gap_variance, optimal_window, simulate_gap_variance_against,
    worst_case_gap, NoiseSpec, Reference, StrengthProfile, WindowObjective,
};
use locality::Result;

use crate::{Outcome, Status, VerifyArgs};

pub fn run(a: &VerifyArgs) -> Outcome {
    match a.theorem {
        1 => dominance(a),
        _ => noisy_localization(a),
    }
}

fn dominance(a: &VerifyArgs) -> Outcome {
    let params = ForceParams::new(a.c0, a.q)?;
    let report = verify_center_dominance(a.eps, &params)?;
    let mut s = format!("center dominance at eps = {} (c0 = {}, q = {})\n", a.eps, a.c0, a.q);
    let _ = writeln!(
        s,
        "{} violations / {} vertices",
        report.violations.len(),
        report.vertices_checked
    );
    for v in &report.violations {
        let masses: Vec<String> = v.masses.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(
            s,
            "violation {}: {:?} vs {:?}, gap {:e}, masses [{}]",
            v.case,
            v.larger,
            v.smaller,
            v.gap,
            masses.join(" ")
        );
    }
    s.push_str("\ncase,critical_eps\n");
    for case in DominanceCase::ALL {
        let _ = writeln!(s, "{case},{}", critical_epsilon(case, 1e-9, &params)?);
    }
    let status = if report.is_clean() { Status::Ok } else { Status::Failed };
    Ok((s, status))
}

struct Row {
    check: &'static str,
    setting: String,
    expected: f64,
    observed: f64,
    tolerance: f64,
    pass: bool,
}

impl Row {
    fn within(check: &'static str, setting: String, expected: f64, observed: f64, tolerance: f64) -> Self {
        Row {
            check,
            setting,
            expected,
            observed,
            tolerance,
            pass: (observed - expected).abs() <= tolerance,
        }
    }
}

fn window_name(mode: WindowObjective) -> &'static str {
    match mode {
        WindowObjective::Expectation => "peak",
        WindowObjective::Variance => "flat",
    }
}

fn noise_rows(a: &VerifyArgs) -> Result<Vec<Row>> {
    let profile = StrengthProfile::halving(8.0, 8)?;
    let mut rows = Vec::new();

    for k in 1..=3 {
        let w = optimal_window(WindowObjective::Expectation, k)?;
        let found = convolve_and_locate(&profile.sample(), &w)?;
        rows.push(Row::within("locate", format!("peak k={k} s=0"), 8.0, found as f64, 0.0));
    }

    for k in 1..=3 {
        let peak = worst_case_gap(&profile, &optimal_window(WindowObjective::Expectation, k)?);
        let flat = worst_case_gap(&profile, &optimal_window(WindowObjective::Variance, k)?);
        rows.push(Row {
            check: "minimax",
            setting: format!("peak vs flat k={k}"),
            expected: flat,
            observed: peak,
            tolerance: 0.0,
            pass: peak > flat,
        });
    }

    let cases = [
        (WindowObjective::Expectation, 1, 1.0),
        (WindowObjective::Variance, 1, 1.0),
        (WindowObjective::Variance, 2, 1.0),
        (WindowObjective::Expectation, 1, 2.0),
        (WindowObjective::Variance, 2, 2.0),
        (WindowObjective::Variance, 1, 0.0),
    ];
    let mut seed = a.seed;
    for (mode, k, s) in cases {
        let w = optimal_window(mode, k)?;
        let disjoint = 2 * k as i64 + 1;
        for (x, reference) in [(disjoint, Reference::Clean), (1, Reference::Noisy), (disjoint, Reference::Noisy)] {
            let m = simulate_gap_variance_against(&profile, &w, &NoiseSpec::new(s, seed)?, x, a.trials, reference)?;
            seed = seed.wrapping_add(1);
            let law = gap_variance(&w, x, s, reference);
            let tag = match reference {
                Reference::Clean => "clean",
                Reference::Noisy => "noisy",
            };
            let setting = format!("{} k={k} s={s} x={x} {tag}", window_name(mode));
            let mean_want = -expectation_gap(&profile, &w, x)?;
            let mean_tol = 4.0 * (law / a.trials as f64).sqrt() + 1e-9;
            rows.push(Row::within("mean", setting.clone(), mean_want, m.mean, mean_tol));
            let var_tol = 4.0 * m.variance_standard_error(law) + 1e-12;
            rows.push(Row::within("variance", setting, law, m.variance, var_tol));
        }
    }
    Ok(rows)
}

fn noisy_localization(a: &VerifyArgs) -> Outcome {
    let rows = noise_rows(a)?;
    let mut s = format!(
        "noisy localization, g(x) = 8 * 2^-|x|, {} trials per row, seed {}\n",
        a.trials, a.seed
    );
    let _ = writeln!(
        s,
        "{:<9} {:<28} {:>12} {:>12} {:>10}  result",
        "check", "setting", "expected", "observed", "tolerance"
    );
    for r in &rows {
        let tol = if r.check == "minimax" {
            "observed >".to_string()
        } else {
            format!("{:.2e}", r.tolerance)
        };
        let _ = writeln!(
            s,
            "{:<9} {:<28} {:>12.6} {:>12.6} {:>10}  {}",
            r.check,
            r.setting,
            r.expected,
            r.observed,
            tol,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(s, "{passed}/{} checks passed", rows.len());
    let status = if passed == rows.len() { Status::Ok } else { Status::Failed };
    Ok((s, status))
}
