//! Parametric bootstrap of the null `t_beta` distribution.
//!
//! Bootstrap paths start at `y1* = sqrt(T') phi_hat(1) y1 / sqrt(T)` and follow
//! `y*_t = [y*_{t-1} + u*_t]_+` with `u*_t ~ N(0, sigma_hat^2)`, so they share
//! the fitted nuisance ratio. For `k > 1` the paths are still generated as
//! AR(1) and only the re-estimation uses `k` lags.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};
use crate::estimation::{fit_series, OlsFit};
use crate::inference::montecarlo::{ar1_tstat, McConfig};
use crate::model::{shift_bound, Series};
use crate::rng::InnovationLaw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replications: u64,
    /// Simulated length; defaults to the observed length.
    pub t_prime: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub p_value: f64,
    pub t_beta: f64,
    pub replications: u64,
    pub t_prime: usize,
    pub seed: u64,
    pub valid: u64,
    pub y1_star: f64,
    pub sigma_hat: f64,
    pub k: usize,
    /// Set when `k > 1`: the AR(1) generating recipe is applied with a `k`-lag
    /// re-estimation.
    pub k_extension: bool,
}

/// `(1 + #{draws <= t_obs}) / (n + 1)`.
pub fn bootstrap_p_value(t_obs: f64, draws: &[f64]) -> f64 {
    let below = draws.iter().filter(|&&t| t <= t_obs).count();
    (1 + below) as f64 / (draws.len() + 1) as f64
}

/// Bootstrap p-value of the fitted `t_beta`; `series` is the observed series
/// with its declared bound, `fit` the OLS fit on it.
pub fn parametric_bootstrap(fit: &OlsFit, series: &Series, opts: &BootstrapOptions) -> Result<BootstrapResult> {
    if opts.replications < 99 {
        return Err(TobitError::invalid("the bootstrap needs at least 99 replications"));
    }
    let t_obs = fit.t_beta_or_err()?;
    let (shifted, _) = shift_bound(series);
    let t = shifted.len();
    let t_prime = opts.t_prime.unwrap_or(t);
    if t_prime < t {
        return Err(TobitError::invalid(format!("bootstrap length {t_prime} is shorter than the sample ({t})")));
    }
    let sigma_hat = fit.sigma_hat();
    let y1 = shifted.values[0];
    let y1_star = ((t_prime as f64).sqrt() * fit.phi1_hat * y1 / (t as f64).sqrt()).max(0.0);
    let k = fit.k;

    let config = McConfig {
        replications: opts.replications,
        t: t_prime - 1,
        seed: opts.seed,
        law: InnovationLaw::Gaussian,
        threads: opts.threads,
    };
    let draws: Vec<Option<f64>> = config.run(sigma_hat, |_, u| {
        if k == 1 {
            return ar1_tstat(0.0, 1.0, Some(0.0), y1_star, u);
        }
        let mut values = Vec::with_capacity(t_prime);
        let mut y = y1_star;
        values.push(y);
        for &ut in u {
            y = (y + ut).max(0.0);
            values.push(y);
        }
        fit_series(&Series { values, dates: None, lower_bound: 0.0 }, k).ok()?.t_beta
    })?;
    let draws: Vec<f64> = draws.into_iter().flatten().collect();
    if draws.is_empty() {
        return Err(TobitError::invalid("every bootstrap draw was degenerate"));
    }
    Ok(BootstrapResult {
        p_value: bootstrap_p_value(t_obs, &draws),
        t_beta: t_obs,
        replications: opts.replications,
        t_prime,
        seed: opts.seed,
        valid: draws.len() as u64,
        y1_star,
        sigma_hat,
        k,
        k_extension: k > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_tobit, ModelParams};
    use crate::rng::substream;

    fn null_series(seed: u64, t: usize) -> Series {
        let u = InnovationLaw::Gaussian.draw(&mut substream(seed, 0), 1.0, t - 1);
        let mut values = vec![3.0];
        values.extend(simulate_tobit(&ModelParams::random_walk(3.0), &u).unwrap().y);
        Series::new(values).unwrap()
    }

    #[test]
    fn p_value_formula() {
        let draws: Vec<f64> = (0..199).map(|i| -3.0 + i as f64 * 0.02).collect();
        assert_eq!(bootstrap_p_value(-10.0, &draws), 1.0 / 200.0);
        assert_eq!(bootstrap_p_value(5.0, &draws), 1.0);
    }

    #[test]
    fn extreme_statistics() {
        let series = null_series(1, 300);
        let mut fit = fit_series(&series, 1).unwrap();
        let opts = BootstrapOptions { replications: 199, t_prime: None, seed: 2, threads: None };
        fit.t_beta = Some(-10.0);
        assert_eq!(parametric_bootstrap(&fit, &series, &opts).unwrap().p_value, 1.0 / 200.0);
        fit.t_beta = Some(5.0);
        assert!(parametric_bootstrap(&fit, &series, &opts).unwrap().p_value > 0.99);
    }

    #[test]
    fn reproducible_and_guarded() {
        let series = null_series(3, 1000);
        let fit = fit_series(&series, 1).unwrap();
        let opts = BootstrapOptions { replications: 499, t_prime: None, seed: 11, threads: None };
        let a = parametric_bootstrap(&fit, &series, &opts).unwrap();
        let b = parametric_bootstrap(&fit, &series, &BootstrapOptions { threads: Some(2), ..opts.clone() }).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        assert!(parametric_bootstrap(&fit, &series, &BootstrapOptions { replications: 50, ..opts.clone() }).is_err());
        assert!(parametric_bootstrap(&fit, &series, &BootstrapOptions { t_prime: Some(10), ..opts }).is_err());
    }

    #[test]
    fn k_two_flags_extension() {
        let series = null_series(5, 400);
        let fit = fit_series(&series, 2).unwrap();
        let opts = BootstrapOptions { replications: 99, t_prime: Some(500), seed: 1, threads: None };
        let res = parametric_bootstrap(&fit, &series, &opts).unwrap();
        assert!(res.k_extension);
        assert_eq!(res.t_prime, 500);
    }
}
