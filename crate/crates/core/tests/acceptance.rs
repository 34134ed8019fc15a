//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! `TOBIT_ACCEPTANCE_SEED` overrides the master seed; `TOBIT_CHF_EUR_CSV`
//! points at a cached `date,value` CSV of the CHF/EUR reference rate for the
//! empirical check.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use tobit_core::estimation::{build_regressors, fit_series, fwl_check, ols_fit, select_lag, InfoCriterion};
use tobit_core::inference::{
    size_power_experiment, tabulate_null, tstat_distributions, unit_root_test, CvTable, Cutoffs,
    DistGrid, DistModel, DistSpec, LagChoice, McConfig, NullBackend, SimOptions, TestOptions,
};
use tobit_core::io::{read_series_csv, ReadOptions};
use tobit_core::limit::{regulate, simulate_k, Theta};
use tobit_core::model::{simulate_tobit, ModelParams, Series};
use tobit_core::rng::{substream, InnovationLaw};
use tobit_core::stability::{
    companion_pair, explosion_probe, jsr_bounds, phi_from_polynomial, poly_mul, JsrVerdict, Trajectory,
};

const REPS: u64 = 100_000;

#[derive(PartialEq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: u32,
    outcome: Outcome,
    detail: String,
}

fn check(id: u32, ok: bool, detail: String) -> Line {
    Line { id, outcome: if ok { Outcome::Pass } else { Outcome::Fail }, detail }
}

fn report(line: &Line) {
    let tag = match line.outcome {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
        Outcome::Skip => "SKIP",
    };
    println!("criterion {}: {tag}: {}", line.id, line.detail);
}

fn seed() -> u64 {
    std::env::var("TOBIT_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20_240_917)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Criteria 1-4; writes result files into `dir`.
fn simulation_criteria(dir: &Path, threads: usize, seed: u64) -> Vec<Line> {
    fs::create_dir_all(dir).unwrap();
    let mut out = Vec::new();

    // 1. Null tabulation at T = 1e5.
    let started = Instant::now();
    let cfg = McConfig::new(REPS, 100_000, seed).with_threads(threads);
    let table = tabulate_null(&cfg, &[0.0, 0.5, 1.0, 2.0]).unwrap();
    table.write(&dir.join("table.csv")).unwrap();
    let reference = CvTable::reference();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for row in &table.rows {
        let want = reference.rows.iter().find(|r| r.ratio == row.ratio).unwrap();
        for j in 0..3 {
            let gap = (row.q[j] - want.q[j]).abs();
            worst = worst.max(gap);
            ok &= gap <= 0.05;
        }
    }
    let adf_gap = (0..3).map(|j| (table.adf_row[j] - reference.adf_row[j]).abs()).fold(0.0, f64::max);
    ok &= adf_gap <= 0.03;
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{}: {:.3}/{:.3}/{:.3}", r.ratio, r.q[0], r.q[1], r.q[2]))
        .collect();
    out.push(check(
        1,
        ok,
        format!(
            "{}; ADF {:.3}/{:.3}/{:.3}; max row gap {worst:.3} (tol 0.05), ADF gap {adf_gap:.3} (tol 0.03); {:.0}s",
            rows.join("; "),
            table.adf_row[0],
            table.adf_row[1],
            table.adf_row[2],
            started.elapsed().as_secs_f64()
        ),
    ));

    // 2 and 3. Mean t_beta and rejection rates at T = 1000.
    let cfg = McConfig::new(REPS, 1000, seed.wrapping_add(1)).with_threads(threads);
    let res = size_power_experiment(&[-5.0, 0.0, 5.0], &[-5.0, 0.0, 5.0], &cfg, Cutoffs { tobit: -3.77, adf: -2.86 })
        .unwrap();
    fs::write(dir.join("power.json"), serde_json::to_string_pretty(&res).unwrap()).unwrap();
    let m00 = res.cell(0.0, 0.0).unwrap();
    let m55 = res.cell(-5.0, -5.0).unwrap();
    let p55 = res.cell(5.0, 5.0).unwrap();
    out.push(check(
        2,
        within(m00.mean_t_beta, -2.06, 0.02) && within(m55.mean_t_beta, -6.09, 0.05) && within(p55.mean_t_beta, 193.14, 2.0),
        format!(
            "mean t_beta (0,0) {:.4} [-2.06 +/- 0.02], (-5,-5) {:.4} [-6.09 +/- 0.05], (5,5) {:.3} [193.14 +/- 2]",
            m00.mean_t_beta, m55.mean_t_beta, p55.mean_t_beta
        ),
    ));
    out.push(check(
        3,
        within(m00.reject_adf, 0.20, 0.01) && within(m00.reject_tobit, 0.05, 0.005),
        format!(
            "Tobit null b0 = 0, T = 1000: reject at -2.86 {:.4} [0.20 +/- 0.01], at -3.77 {:.4} [0.05 +/- 0.005]",
            m00.reject_adf, m00.reject_tobit
        ),
    ));

    // 4. Linear CDF below the Tobit (b0 = 0) CDF.
    let cfg = McConfig::new(REPS, 1000, seed.wrapping_add(2)).with_threads(threads);
    let specs = [DistSpec::null(DistModel::Tobit, 0.0, 1000), DistSpec::null(DistModel::Linear, 0.0, 1000)];
    let dists = tstat_distributions(&cfg, &specs, DistGrid::default()).unwrap();
    fs::write(dir.join("dist.json"), serde_json::to_string_pretty(&dists).unwrap()).unwrap();
    let (tobit, linear) = (&dists[0], &dists[1]);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_at = 0.0;
    for i in 0..tobit.cdf.len() {
        let se = (tobit.cdf_se(i).powi(2) + linear.cdf_se(i).powi(2)).sqrt();
        let excess = linear.cdf[i] - tobit.cdf[i] - 2.0 * se;
        if excess > worst_excess {
            worst_excess = excess;
            worst_at = tobit.edges[i];
        }
    }
    let max_gap = tobit.cdf.iter().zip(&linear.cdf).map(|(t, l)| t - l).fold(0.0, f64::max);
    out.push(check(
        4,
        worst_excess <= 0.0,
        format!(
            "{} grid points; max(F_lin - F_tobit - 2 SE) = {worst_excess:.5} at {worst_at:.2}; largest dominance gap {max_gap:.4}",
            tobit.cdf.len()
        ),
    ));
    out
}

fn jsr_criterion(seed: u64) -> Line {
    let cert = jsr_bounds(&companion_pair(&[1.3, -0.8]), 12, 1e-3).unwrap();
    let mut ok = cert.lower >= 1.013 && cert.verdict == JsrVerdict::Violated;
    let mut detail = format!("(1.3,-0.8): lower {:.5} via {} ({:?})", cert.lower, cert.lower_witness, cert.verdict);

    let mut rng = substream(seed, 5);
    let mut failures = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=5usize);
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
        let big_phi = rng.random_range(0.01..0.99);
        let phi: Vec<f64> = raw.iter().map(|v| v * big_phi / total).collect();
        let phi_sum: f64 = phi.iter().map(|v| v.abs()).sum();
        let cert = jsr_bounds(&companion_pair(&phi), 6, 1e-6).unwrap();
        let cap = phi_sum.powf(1.0 / m as f64);
        if !(cert.verdict == JsrVerdict::Stable && cert.upper <= cap + 1e-12 && cert.lower <= cert.upper) {
            failures += 1;
        }
    }
    ok &= failures == 0;
    detail += &format!("; sum|phi| < 1: {failures}/1000 not certified with upper <= Phi^(1/(k-1))");

    let poly = poly_mul(&[1.0, -1.0, 0.9], &[1.0, -1.3, 0.9]);
    let phi_b1 = phi_from_polynomial(&poly).unwrap();
    let probe = |phi: Vec<f64>| {
        let params = ModelParams { alpha: 0.0, beta: 1.0, phi, sigma: 1.0, lower_bound: 0.0, init: vec![0.0] };
        explosion_probe(&params, 1000, 200, seed).unwrap()
    };
    let b1 = probe(phi_b1.clone());
    let b2 = probe(vec![1.3, -0.8]);
    ok &= b1.classification == Trajectory::Explosive && b2.classification == Trajectory::Bounded;
    detail += &format!(
        "; B.1 phi={phi_b1:?}: {:?} (median growth {:.3e}); B.2: {:?} (median growth {:.3})",
        b1.classification, b1.growth_ratio_quantiles[1], b2.classification, b2.growth_ratio_quantiles[1]
    );
    check(5, ok, detail)
}

fn identity_criterion(seed: u64) -> Line {
    let n = 1000;
    let mut rng = substream(seed, 6);
    let mut fails = [0u32; 6];
    let names = ["censoring", "decomposition", "running-max", "FWL", "bound-shift", "t-scale"];
    for _ in 0..n {
        // Random Tobit AR(k) with a random bound.
        let k = rng.random_range(1..=4usize);
        let bound = rng.random_range(-3.0..3.0);
        let phi: Vec<f64> = (1..k).map(|_| rng.random_range(-0.3..0.3)).collect();
        let init: Vec<f64> = (0..k).map(|_| bound + rng.random_range(0.0..2.0)).collect();
        let params = ModelParams {
            alpha: rng.random_range(-0.5..0.5),
            beta: rng.random_range(0.8..1.05),
            phi,
            sigma: 1.0,
            lower_bound: bound,
            init,
        };
        let t = rng.random_range(20..300usize);
        let u = InnovationLaw::Gaussian.draw(&mut rng, 1.0, t);
        let sim = simulate_tobit(&params, &u).unwrap();
        if sim.y.iter().zip(&sim.y_minus).any(|(y, m)| (y - bound) * m != 0.0 || *y < bound || *m > 0.0) {
            fails[0] += 1;
        }
        // Direct recursion oracle for y + y^- = argument.
        let mut levels = params.initial_levels();
        let mut bad = false;
        for (i, ut) in u.iter().enumerate() {
            let p = levels.len();
            let mut arg = params.alpha + params.beta * levels[p - 1] + ut;
            for (j, ph) in params.phi.iter().enumerate() {
                arg += ph * (levels[p - 1 - j] - levels[p - 2 - j]);
            }
            let direct = arg.max(bound);
            let scale = 1.0 + arg.abs();
            if (sim.y[i] + sim.y_minus[i] - arg).abs() > 1e-10 * scale || (sim.y[i] - direct).abs() > 1e-10 * scale {
                bad = true;
            }
            levels.push(sim.y[i]);
        }
        fails[1] += bad as u32;

        // Running maximum representation of the reflected walk.
        let x0 = rng.random_range(0.0..3.0);
        let v = InnovationLaw::Gaussian.draw(&mut rng, 1.0, t);
        let walk = simulate_tobit(&ModelParams::random_walk(x0), &v).unwrap().y;
        let (mut s, mut m) = (0.0f64, 0.0f64);
        let mut bad = false;
        for (i, vt) in v.iter().enumerate() {
            s += vt;
            m = m.max(-x0 - s);
            let closed = x0 + s + m;
            if (walk[i] - closed).abs() > 1e-10 * (1.0 + x0 + s.abs()) {
                bad = true;
            }
        }
        fails[2] += bad as u32;

        // FWL identity on an AR(1) Tobit path.
        let mut values = vec![x0];
        values.extend(&walk);
        let series = Series::new(values).unwrap();
        let reg = build_regressors(&series, 1).unwrap();
        if let Ok(fit) = ols_fit(&reg) {
            if fwl_check(&reg, &fit).unwrap() > 1e-10 * (1.0 + (fit.beta_hat - 1.0).abs()) {
                fails[3] += 1;
            }
        }

        // Bound shift: bit-exact against the zero-bound run on shifted parameters.
        let zero = simulate_tobit(&params.shifted_to_zero(), &u).unwrap();
        if sim.y.iter().zip(&zero.y).any(|(a, b)| *a != bound + b) {
            fails[4] += 1;
        }

        // Scale invariance of t_beta.
        let s = rng.random_range(0.01..100.0);
        let mut values = params.initial_levels();
        values.extend(&sim.y);
        let a = Series::with_bound(values, bound).unwrap();
        if let (Ok(fa), Ok(fb)) = (fit_series(&a, k), fit_series(&a.scaled(s), k)) {
            if let (Some(ta), Some(tb)) = (fa.t_beta, fb.t_beta) {
                if (ta - tb).abs() > 1e-10 * ta.abs().max(1.0) {
                    fails[5] += 1;
                }
            }
        }
    }
    let detail: Vec<String> = names.iter().zip(fails).map(|(n, f)| format!("{n} {f}/1000 fail")).collect();
    check(6, fails.iter().all(|f| *f == 0), detail.join(", "))
}

fn reflected_bm_criterion(seed: u64) -> Line {
    let draws = 100_000u64;
    let n = 10_000;
    let theta = Theta::null(0.0, 1.0);
    let mut ends: Vec<f64> = McConfig::new(draws, n, seed.wrapping_add(7))
        .run(1.0, |_, xi| regulate(&simulate_k(&theta, xi).unwrap(), 0.0).end())
        .unwrap();
    ends.sort_by(|a, b| a.total_cmp(b));
    let normal = Normal::new(0.0, 1.0).unwrap();
    let half_normal = |x: f64| (2.0 * normal.cdf(x) - 1.0).max(0.0);
    let nf = ends.len() as f64;
    let ks = ends
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = half_normal(x);
            (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
        })
        .fold(0.0, f64::max);
    check(7, ks < 0.01, format!("KS distance of J(1) vs half-normal, {draws} draws, n = {n}: {ks:.5} (< 0.01)"))
}

fn empirical_criterion() -> Line {
    let Some(path) = std::env::var_os("TOBIT_CHF_EUR_CSV").map(PathBuf::from) else {
        return Line {
            id: 8,
            outcome: Outcome::Skip,
            detail: "no CHF/EUR data (set TOBIT_CHF_EUR_CSV, e.g. from `tobit fetch-ecb`); unverified".into(),
        };
    };
    let opts = ReadOptions { log: true, bound: Some(1.2f64.ln()), bound_raw: None };
    let series = match read_series_csv(&path, &opts) {
        Ok(s) => s,
        Err(e) => return check(8, false, format!("cannot read {}: {e}", path.display())),
    };
    let shifted = tobit_core::model::shift_bound(&series).0;
    let aic = select_lag(&shifted, 15, InfoCriterion::Aic).unwrap().k;
    let bic = select_lag(&shifted, 15, InfoCriterion::Bic).unwrap().k;
    let opts = TestOptions {
        lag: LagChoice::Fixed { k: 1 },
        simulate: Some(SimOptions { config: McConfig::new(REPS, 100_000, seed()), backend: NullBackend::FiniteSample }),
        bootstrap: None,
    };
    let report = unit_root_test(&series, &CvTable::reference(), &opts).unwrap();
    let p = report.p_value_sim.as_ref().unwrap().p_value;
    let p0 = report.p_value_sim_b0_zero.as_ref().unwrap().p_value;
    check(
        8,
        aic == 1 && bic == 1 && within(report.t_beta, -2.87, 0.02) && (0.17..=0.22).contains(&p),
        format!(
            "n = {}, AIC k = {aic}, BIC k = {bic}, t_beta {:.4}, ratio {:.3}, p(b0 estimated) {p:.4}, p(b0 = 0) {p0:.4}",
            series.len(),
            report.t_beta,
            report.ratio
        ),
    )
}

fn compare_dirs(a: &Path, b: &Path) -> (bool, String) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut diffs = Vec::new();
    for name in &names {
        if fs::read(a.join(name)).unwrap() != fs::read(b.join(name)).ok().unwrap_or_default() {
            diffs.push(name.to_string_lossy().into_owned());
        }
    }
    let listed: Vec<String> = names.iter().map(|n| n.to_string_lossy().into_owned()).collect();
    (diffs.is_empty(), format!("files [{}]; differing [{}]", listed.join(", "), diffs.join(", ")))
}

fn main() -> ExitCode {
    // Under `cargo test -- --list` and similar, do nothing.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let seed = seed();
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    let (dir1, dir2) = (root.join("threads-1"), root.join("threads-3"));

    println!("acceptance (seed {seed})");
    let mut lines = Vec::new();
    let mut push = |line: Line| {
        report(&line);
        lines.push(line);
    };
    for line in simulation_criteria(&dir1, 1, seed) {
        push(line);
    }
    push(jsr_criterion(seed));
    push(identity_criterion(seed));
    push(reflected_bm_criterion(seed));
    push(empirical_criterion());
    let started = Instant::now();
    simulation_criteria(&dir2, 3, seed);
    let (same, detail) = compare_dirs(&dir1, &dir2);
    push(check(
        9,
        same,
        format!("criteria 1-4 rerun with 1 and 3 worker threads: {detail}; {:.0}s", started.elapsed().as_secs_f64()),
    ));

    if lines.iter().any(|l| l.outcome == Outcome::Fail) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
