//! Replication-parallel Monte Carlo engine: null tabulation, size/power
//! grids, t-statistic distributions and simulated-null p-values.
//!
//! Replication `r` draws its innovations from `substream(seed, r)` and all
//! designs evaluated in one run share those innovations (common random
//! numbers). Results are collected in replication order before any
//! reduction, so output does not depend on the number of worker threads.

use std::sync::atomic::{AtomicU64, Ordering};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};
use crate::estimation::{fit_series, Ar1Accumulator};
use crate::inference::table::{CvRow, CvTable, Level, Provenance};
use crate::limit::{limit_tstat_draw, Theta};
use crate::model::{simulate_linear_ar, simulate_tobit, ModelParams, Series};
use crate::rng::{substream, InnovationLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: u64,
    /// Number of simulated observations after the initial level(s).
    pub t: usize,
    pub seed: u64,
    #[serde(default)]
    pub law: InnovationLaw,
    /// Worker threads; `None` uses the ambient rayon pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(replications: u64, t: usize, seed: u64) -> McConfig {
        McConfig { replications, t, seed, law: InnovationLaw::Gaussian, threads: None }
    }

    pub fn with_threads(mut self, threads: usize) -> McConfig {
        self.threads = Some(threads);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(TobitError::invalid("replications must be >= 1"));
        }
        if self.t < 10 {
            return Err(TobitError::invalid(format!("sample length must be >= 10, got {}", self.t)));
        }
        if self.threads == Some(0) {
            return Err(TobitError::invalid("threads must be >= 1"));
        }
        self.law.validate()
    }

    /// Maps `f` over replication indices `0..R` on the configured pool,
    /// keeping results in index order. `f` receives a scratch buffer of
    /// length `T` filled with that replication's innovations.
    pub fn run<T, F>(&self, sigma: f64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &[f64]) -> T + Sync + Send,
    {
        self.validate()?;
        let total = self.replications;
        let done = AtomicU64::new(0);
        let step = (total / 10).max(1);
        let work = || {
            (0..total)
                .into_par_iter()
                .map_init(
                    || vec![0.0; self.t],
                    |buf, r| {
                        self.law.fill(&mut substream(self.seed, r), sigma, buf);
                        let out = f(r, buf);
                        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if n % step == 0 {
                            info!("{n}/{total} replications");
                        }
                        out
                    },
                )
                .collect::<Vec<T>>()
        };
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| TobitError::invalid(format!("thread pool: {e}")))?;
                Ok(pool.install(work))
            }
            None => Ok(work()),
        }
    }
}

/// Lower empirical quantile: the order statistic at (1-based) index
/// `ceil(q * n)` of an ascending sample.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[idx - 1]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `t_beta` of the AR(1) regression on a path of
/// `y_t = max{L, alpha + beta y_{t-1} + u_t}` (no max when `lower` is
/// `None`) started from `y0`; the regression includes `y0` as the first lag.
#[inline]
pub fn ar1_tstat(alpha: f64, beta: f64, lower: Option<f64>, y0: f64, u: &[f64]) -> Option<f64> {
    let mut acc = Ar1Accumulator::new(y0);
    let mut y = y0;
    match lower {
        Some(l) => {
            for &ut in u {
                let next = (alpha + beta * y + ut).max(l);
                acc.push(y, next);
                y = next;
            }
        }
        None => {
            for &ut in u {
                let next = alpha + beta * y + ut;
                acc.push(y, next);
                y = next;
            }
        }
    }
    acc.t_beta()
}

/// `t_beta` of a unit-root random walk censored at zero, started at
/// `y0 = ratio * sqrt(T)`; `sigma = 1` so the ratio is `b0`.
#[inline]
fn null_tobit_tstat(ratio: f64, u: &[f64]) -> Option<f64> {
    ar1_tstat(0.0, 1.0, Some(0.0), ratio * (u.len() as f64).sqrt(), u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSamples {
    /// Valid draws for each ratio, in replication order.
    pub tobit: Vec<Vec<f64>>,
    /// Valid draws of the uncensored random walk.
    pub linear: Vec<f64>,
    /// Degenerate draws per ratio, then for the linear model.
    pub degenerate: Vec<u64>,
}

/// Null `t_beta` draws for every ratio and for the linear random walk, all on
/// common innovations.
pub fn null_tstat_samples(config: &McConfig, ratios: &[f64]) -> Result<NullSamples> {
    let m = ratios.len();
    let per_rep: Vec<Vec<Option<f64>>> = config.run(1.0, |_, u| {
        let mut out: Vec<Option<f64>> = ratios.iter().map(|&r| null_tobit_tstat(r, u)).collect();
        out.push(ar1_tstat(0.0, 1.0, None, 0.0, u));
        out
    })?;
    let mut tobit = vec![Vec::with_capacity(per_rep.len()); m];
    let mut linear = Vec::with_capacity(per_rep.len());
    let mut degenerate = vec![0u64; m + 1];
    for rep in per_rep {
        for (j, t) in rep.into_iter().enumerate() {
            match (t, j < m) {
                (Some(t), true) => tobit[j].push(t),
                (Some(t), false) => linear.push(t),
                (None, _) => degenerate[j] += 1,
            }
        }
    }
    Ok(NullSamples { tobit, linear, degenerate })
}

fn quantile_row(sample: Vec<f64>) -> Result<[f64; 3]> {
    if sample.is_empty() {
        return Err(TobitError::invalid("every draw was degenerate"));
    }
    let s = sorted(sample);
    Ok(Level::ALL.map(|l| empirical_quantile(&s, l.probability())))
}

/// Simulates the null distribution of `t_beta` under
/// `y_t = [y_{t-1} + u_t]_+`, `y_0 = r sqrt(T)`, for each ratio `r`, plus the
/// ADF row from the uncensored random walk.
pub fn tabulate_null(config: &McConfig, ratios: &[f64]) -> Result<CvTable> {
    if ratios.is_empty() {
        return Err(TobitError::invalid("ratio grid is empty"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(TobitError::invalid("ratios must be finite and >= 0"));
    }
    if ratios.windows(2).any(|w| w[1] < w[0]) {
        return Err(TobitError::invalid("ratio grid must be nondecreasing"));
    }
    if config.replications < 100 {
        return Err(TobitError::invalid("tabulation needs at least 100 replications"));
    }
    let mut grid = ratios.to_vec();
    grid.dedup();

    let samples = null_tstat_samples(config, &grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (ratio, sample) in grid.iter().zip(samples.tobit) {
        rows.push(CvRow { ratio: *ratio, q: quantile_row(sample)? });
    }
    let adf_row = quantile_row(samples.linear)?;
    let provenance = Provenance {
        t: config.t,
        replications: config.replications,
        grid: None,
        seed: Some(config.seed),
        innovation_law: config.law.label(),
        source: "simulated".into(),
        degenerate_draws: samples.degenerate,
        notes: Vec::new(),
    };
    let mut table = CvTable::new(rows, adf_row, provenance)?;
    let violations = table.monotonicity_violations();
    for v in &violations {
        warn!("tabulated quantiles not monotone in ratio: {v}");
    }
    table.provenance.notes = violations;
    Ok(table)
}

/// 5% cutoffs used by the size/power experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    /// Censoring-adjusted cutoff (ratio-0 row).
    pub tobit: f64,
    /// Conventional ADF cutoff.
    pub adf: f64,
}

impl Cutoffs {
    pub fn from_table(table: &CvTable, level: Level) -> Cutoffs {
        Cutoffs { tobit: table.lookup(0.0, level), adf: table.adf_row[level.index()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub a: f64,
    pub c: f64,
    pub mean_t_beta: f64,
    pub sd_t_beta: f64,
    pub reject_tobit: f64,
    pub reject_adf: f64,
    pub valid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub t: usize,
    pub replications: u64,
    pub seed: u64,
    pub innovation_law: String,
    pub cutoffs: Cutoffs,
    pub a_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    /// Row-major over `a_grid` then `c_grid`.
    pub cells: Vec<PowerCell>,
}

impl PowerResult {
    pub fn cell(&self, a: f64, c: f64) -> Option<&PowerCell> {
        self.cells.iter().find(|x| x.a == a && x.c == c)
    }
}

/// For each `(a, c)`: `R` paths of `y_t = [a/sqrt(T) + (1 + c/T) y_{t-1} + u_t]_+`
/// from `y_0 = 0`, reporting the mean of `t_beta` and rejection frequencies
/// at both cutoffs (reject when `t_beta <= cutoff`).
pub fn size_power_experiment(a_grid: &[f64], c_grid: &[f64], config: &McConfig, cutoffs: Cutoffs) -> Result<PowerResult> {
    if a_grid.is_empty() || c_grid.is_empty() {
        return Err(TobitError::invalid("a and c grids must be nonempty"));
    }
    let tf = config.t as f64;
    let cells: Vec<(f64, f64)> = a_grid.iter().flat_map(|&a| c_grid.iter().map(move |&c| (a, c))).collect();
    let per_rep: Vec<Vec<Option<f64>>> = config.run(1.0, |_, u| {
        cells
            .iter()
            .map(|&(a, c)| ar1_tstat(a / tf.sqrt(), 1.0 + c / tf, Some(0.0), 0.0, u))
            .collect()
    })?;
    let mut out = Vec::with_capacity(cells.len());
    for (j, &(a, c)) in cells.iter().enumerate() {
        let draws: Vec<f64> = per_rep.iter().filter_map(|rep| rep[j]).collect();
        let n = draws.len() as f64;
        if draws.is_empty() {
            return Err(TobitError::invalid(format!("every draw was degenerate at a = {a}, c = {c}")));
        }
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        let rej = |cv: f64| draws.iter().filter(|&&t| t <= cv).count() as f64 / n;
        out.push(PowerCell {
            a,
            c,
            mean_t_beta: mean,
            sd_t_beta: var.sqrt(),
            reject_tobit: rej(cutoffs.tobit),
            reject_adf: rej(cutoffs.adf),
            valid: draws.len() as u64,
        });
    }
    Ok(PowerResult {
        t: config.t,
        replications: config.replications,
        seed: config.seed,
        innovation_law: config.law.label(),
        cutoffs,
        a_grid: a_grid.to_vec(),
        c_grid: c_grid.to_vec(),
        cells: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistModel {
    Tobit,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub model: DistModel,
    pub params: ModelParams,
}

impl DistSpec {
    /// Unit-root design with `b0 = ratio`, `sigma = 1`, on a path of length `t`.
    pub fn null(model: DistModel, ratio: f64, t: usize) -> DistSpec {
        DistSpec { model, params: ModelParams::random_walk(ratio * (t as f64).sqrt()) }
    }

    fn tstat(&self, u: &[f64]) -> Option<f64> {
        let p = &self.params;
        let lower = match self.model {
            DistModel::Tobit => Some(p.lower_bound),
            DistModel::Linear => None,
        };
        if p.k() == 1 {
            return ar1_tstat(p.alpha, p.beta, lower, p.init[p.init.len() - 1], u);
        }
        let mut values = p.initial_levels();
        match self.model {
            DistModel::Tobit => values.extend(simulate_tobit(p, u).ok()?.y),
            DistModel::Linear => values.extend(simulate_linear_ar(p, u).ok()?),
        }
        let series = Series { values, dates: None, lower_bound: p.lower_bound };
        fit_series(&series, p.k()).ok()?.t_beta
    }
}

/// Histogram bins on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for DistGrid {
    fn default() -> Self {
        DistGrid { lo: -8.0, hi: 4.0, bins: 240 }
    }
}

impl DistGrid {
    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins).map(|i| self.lo + w * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TstatDistribution {
    pub model: DistModel,
    pub params: ModelParams,
    /// Bin edges; `cdf[i]` is the fraction of draws `<= edges[i]`.
    pub edges: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Density estimate on `[edges[i], edges[i+1])`.
    pub pdf: Vec<f64>,
    pub below: u64,
    pub above: u64,
    pub valid: u64,
    pub degenerate: u64,
    pub mean: f64,
}

impl TstatDistribution {
    /// Binomial standard error of `cdf[i]`.
    pub fn cdf_se(&self, i: usize) -> f64 {
        let f = self.cdf[i];
        (f * (1.0 - f) / self.valid as f64).sqrt()
    }
}

/// Empirical distributions of `t_beta` for several designs on common
/// innovations (innovations are scaled by the first design's sigma).
pub fn tstat_distributions(config: &McConfig, specs: &[DistSpec], grid: DistGrid) -> Result<Vec<TstatDistribution>> {
    if specs.is_empty() {
        return Err(TobitError::invalid("no designs given"));
    }
    if !(grid.hi > grid.lo) || grid.bins == 0 {
        return Err(TobitError::invalid("distribution grid needs hi > lo and bins >= 1"));
    }
    for s in specs {
        s.params.validate()?;
    }
    let sigma = specs[0].params.sigma;
    if specs.iter().any(|s| s.params.sigma != sigma) {
        return Err(TobitError::invalid("designs sharing innovations must share sigma"));
    }
    let per_rep: Vec<Vec<Option<f64>>> = config.run(sigma, |_, u| specs.iter().map(|s| s.tstat(u)).collect())?;
    let edges = grid.edges();
    let width = (grid.hi - grid.lo) / grid.bins as f64;
    let mut out = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        let draws: Vec<f64> = per_rep.iter().filter_map(|rep| rep[j]).collect();
        let degenerate = per_rep.len() as u64 - draws.len() as u64;
        let n = draws.len();
        let mean = if n > 0 { draws.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let s = sorted(draws);
        let count_le = |x: f64| s.partition_point(|v| *v <= x);
        let cdf: Vec<f64> = edges.iter().map(|&e| if n > 0 { count_le(e) as f64 / n as f64 } else { 0.0 }).collect();
        let pdf: Vec<f64> = edges
            .windows(2)
            .map(|w| {
                let inside = s.partition_point(|v| *v < w[1]) - s.partition_point(|v| *v < w[0]);
                if n > 0 {
                    inside as f64 / (n as f64 * width)
                } else {
                    0.0
                }
            })
            .collect();
        out.push(TstatDistribution {
            model: spec.model,
            params: spec.params.clone(),
            below: s.partition_point(|v| *v < grid.lo) as u64,
            above: (n - s.partition_point(|v| *v < grid.hi)) as u64,
            edges: edges.clone(),
            cdf,
            pdf,
            valid: n as u64,
            degenerate,
            mean,
        });
    }
    Ok(out)
}

pub fn tstat_distribution(config: &McConfig, spec: &DistSpec, grid: DistGrid) -> Result<TstatDistribution> {
    Ok(tstat_distributions(config, std::slice::from_ref(spec), grid)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum NullBackend {
    /// Finite-sample recursion at the configured `T`.
    FiniteSample,
    /// Discretized limit functional on an `n`-step grid (Gaussian).
    Limit { grid: usize },
}

impl Default for NullBackend {
    fn default() -> Self {
        NullBackend::FiniteSample
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPValue {
    /// Fraction of null draws at or below the observed statistic.
    pub p_value: f64,
    pub t_beta: f64,
    pub ratio: f64,
    pub backend: NullBackend,
    pub t: usize,
    pub replications: u64,
    pub seed: u64,
    pub valid: u64,
    pub discarded: u64,
}

/// p-value of `t_obs` against the simulated null at nuisance ratio `ratio`.
pub fn simulated_p_value(t_obs: f64, ratio: f64, config: &McConfig, backend: NullBackend) -> Result<SimulatedPValue> {
    let ratio = ratio.max(0.0);
    let (draws, discarded): (Vec<f64>, u64) = match backend {
        NullBackend::FiniteSample => {
            let s = null_tstat_samples(config, &[ratio])?;
            (s.tobit.into_iter().next().unwrap_or_default(), s.degenerate[0])
        }
        NullBackend::Limit { grid } => {
            let theta = Theta::null(ratio, 1.0);
            let limit_cfg = McConfig { t: 10, ..config.clone() };
            limit_cfg.validate()?;
            let run = || -> Result<Vec<(f64, u64)>> {
                (0..config.replications)
                    .into_par_iter()
                    .map(|r| {
                        let d = limit_tstat_draw(&theta, 1.0, grid, &mut substream(config.seed, r))?;
                        Ok((d.t_beta, d.rejected as u64))
                    })
                    .collect()
            };
            let draws = match config.threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| TobitError::invalid(format!("thread pool: {e}")))?
                    .install(run)?,
                None => run()?,
            };
            let discarded = draws.iter().map(|d| d.1).sum();
            (draws.into_iter().map(|d| d.0).collect(), discarded)
        }
    };
    if draws.is_empty() {
        return Err(TobitError::invalid("every null draw was degenerate"));
    }
    let below = draws.iter().filter(|&&t| t <= t_obs).count();
    Ok(SimulatedPValue {
        p_value: below as f64 / draws.len() as f64,
        t_beta: t_obs,
        ratio,
        backend,
        t: config.t,
        replications: config.replications,
        seed: config.seed,
        valid: draws.len() as u64,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_convention() {
        let s: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(empirical_quantile(&s, 0.05), 5.0);
        assert_eq!(empirical_quantile(&s, 0.051), 6.0);
        assert_eq!(empirical_quantile(&s, 0.0), 1.0);
        assert_eq!(empirical_quantile(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn fast_path_matches_general_fit() {
        let cfg = McConfig::new(20, 300, 5);
        let tobit = DistSpec::null(DistModel::Tobit, 0.3, 300);
        let fast: Vec<Option<f64>> = cfg.run(1.0, |_, u| tobit.tstat(u)).unwrap();
        let slow: Vec<Option<f64>> = cfg
            .run(1.0, |_, u| {
                let mut values = vec![tobit.params.init[0]];
                values.extend(simulate_tobit(&tobit.params, u).unwrap().y);
                fit_series(&Series::new(values).unwrap(), 1).unwrap().t_beta
            })
            .unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let base = McConfig::new(300, 200, 9);
        let a = tabulate_null(&base.clone().with_threads(1), &[0.0, 1.0]).unwrap();
        let b = tabulate_null(&base.with_threads(3), &[0.0, 1.0]).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn tabulation_rejects_bad_grids() {
        let cfg = McConfig::new(200, 50, 1);
        assert!(tabulate_null(&cfg, &[]).is_err());
        assert!(tabulate_null(&cfg, &[1.0, 0.5]).is_err());
        assert!(tabulate_null(&cfg, &[-0.1]).is_err());
        assert!(tabulate_null(&McConfig::new(50, 50, 1), &[0.0]).is_err());
        let t = tabulate_null(&cfg, &[0.0, 0.0, 0.5]).unwrap();
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 100, 1).validate().is_err());
        assert!(McConfig::new(1, 9, 1).validate().is_err());
        assert!(McConfig::new(1, 10, 1).with_threads(0).validate().is_err());
    }

    #[test]
    fn single_replication_gives_single_atom() {
        let spec = DistSpec::null(DistModel::Linear, 0.0, 100);
        let d = tstat_distribution(&McConfig::new(1, 100, 3), &spec, DistGrid::default()).unwrap();
        assert_eq!(d.valid, 1);
        let jumps = d.cdf.windows(2).filter(|w| w[1] > w[0]).count();
        assert_eq!(jumps, 1);
        assert_eq!(*d.cdf.last().unwrap(), 1.0);
        let mass: f64 = d.pdf.iter().sum::<f64>() * 12.0 / 240.0;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_rises_as_a_falls() {
        let cfg = McConfig::new(2000, 200, 21);
        let a_grid = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0];
        let res = size_power_experiment(&a_grid, &[0.0], &cfg, Cutoffs::from_table(&CvTable::reference(), Level::Five)).unwrap();
        for w in res.cells.windows(2) {
            let se = (w[0].reject_tobit * (1.0 - w[0].reject_tobit) / 2000.0).sqrt().max(1e-3);
            assert!(w[1].reject_tobit <= w[0].reject_tobit + 2.0 * se, "{:?}", res.cells);
        }
    }

    #[test]
    fn simulated_p_value_extremes() {
        let cfg = McConfig::new(200, 100, 4);
        assert_eq!(simulated_p_value(-50.0, 0.0, &cfg, NullBackend::FiniteSample).unwrap().p_value, 0.0);
        assert_eq!(simulated_p_value(50.0, 0.0, &cfg, NullBackend::FiniteSample).unwrap().p_value, 1.0);
        let lim = simulated_p_value(-2.0, 0.5, &cfg, NullBackend::Limit { grid: 200 }).unwrap();
        assert!(lim.p_value > 0.0 && lim.p_value < 1.0);
    }
}
