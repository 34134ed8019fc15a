//! The censoring-adjusted Dickey-Fuller test of `alpha = 0, beta = 1`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};
use crate::estimation::{fit_series, select_lag, InfoCriterion, LagSelection};
use crate::inference::bootstrap::{parametric_bootstrap, BootstrapOptions, BootstrapResult};
use crate::inference::montecarlo::{simulated_p_value, McConfig, NullBackend, SimulatedPValue};
use crate::inference::table::{CvTable, Level, TablePValue};
use crate::model::{shift_bound, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LagChoice {
    Fixed { k: usize },
    Auto { k_max: usize, criterion: InfoCriterion },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub config: McConfig,
    #[serde(default)]
    pub backend: NullBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub lag: LagChoice,
    pub simulate: Option<SimOptions>,
    pub bootstrap: Option<BootstrapOptions>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { lag: LagChoice::Fixed { k: 1 }, simulate: None, bootstrap: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelTriple<T> {
    #[serde(rename = "1%")]
    pub one: T,
    #[serde(rename = "5%")]
    pub five: T,
    #[serde(rename = "10%")]
    pub ten: T,
}

impl<T: Copy> LevelTriple<T> {
    pub fn get(&self, level: Level) -> T {
        match level {
            Level::One => self.one,
            Level::Five => self.five,
            Level::Ten => self.ten,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub k: usize,
    pub n_obs: usize,
    pub sample_length: usize,
    pub lower_bound: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub phi_hat: Vec<f64>,
    pub t_alpha: f64,
    pub t_beta: f64,
    /// `y_1 / sqrt(T)` after the bound shift, clamped at zero.
    pub b0_hat: f64,
    pub phi1_hat: f64,
    pub sigma_hat: f64,
    /// `b0_hat * phi1_hat / sigma_hat`.
    pub ratio: f64,
    /// Tabulated ratio of the row used; `None` for the ADF row.
    pub table_row: Option<f64>,
    pub critical_values: LevelTriple<f64>,
    /// `t_beta <= cv` at each level.
    pub reject: LevelTriple<bool>,
    pub p_value_table: TablePValue,
    /// Simulated null at the estimated ratio.
    pub p_value_sim: Option<SimulatedPValue>,
    /// Simulated null with `b0 = 0` imposed.
    pub p_value_sim_b0_zero: Option<SimulatedPValue>,
    pub p_value_boot: Option<BootstrapResult>,
    pub lag_selection: Option<LagSelection>,
    pub notes: Vec<String>,
}

/// Shifts the bound, fits the ADF regression, and compares `t_beta` with the
/// critical values at the estimated nuisance ratio.
pub fn unit_root_test(series: &Series, table: &CvTable, opts: &TestOptions) -> Result<TestReport> {
    series.validate()?;
    let (shifted, _) = shift_bound(series);
    let mut notes = Vec::new();

    let (k, lag_selection) = match opts.lag {
        LagChoice::Fixed { k } => (k, None),
        LagChoice::Auto { k_max, criterion } => {
            let sel = select_lag(&shifted, k_max, criterion)?;
            (sel.k, Some(sel))
        }
    };
    let fit = fit_series(&shifted, k)?;
    let t_beta = fit.t_beta.ok_or(TobitError::DegenerateVariance)?;
    let t_alpha = fit.t_alpha.ok_or(TobitError::DegenerateVariance)?;
    let sigma_hat = fit.sigma_hat();

    let t_len = shifted.len();
    let mut b0_hat = shifted.values[0] / (t_len as f64).sqrt();
    if b0_hat < 0.0 {
        warn!("first observation below the bound; b0_hat {b0_hat} clamped to 0");
        notes.push(format!("b0_hat {b0_hat} clamped to 0"));
        b0_hat = 0.0;
    }
    let ratio = b0_hat * fit.phi1_hat / sigma_hat;
    let row = table.row_for(ratio);
    if row.clamped {
        notes.push(format!("nuisance ratio {ratio} clamped to 0 (phi1_hat = {})", fit.phi1_hat));
    }
    let cv = |l: Level| row.cv(l);
    let critical_values = LevelTriple { one: cv(Level::One), five: cv(Level::Five), ten: cv(Level::Ten) };
    let reject = LevelTriple {
        one: t_beta <= critical_values.one,
        five: t_beta <= critical_values.five,
        ten: t_beta <= critical_values.ten,
    };

    let (p_value_sim, p_value_sim_b0_zero) = match &opts.simulate {
        Some(sim) => (
            Some(simulated_p_value(t_beta, ratio, &sim.config, sim.backend)?),
            Some(simulated_p_value(t_beta, 0.0, &sim.config, sim.backend)?),
        ),
        None => (None, None),
    };
    if k > 1 && opts.simulate.is_some() {
        notes.push("simulated null p-values use the AR(1) null at the estimated ratio".into());
    }
    let p_value_boot = match &opts.bootstrap {
        Some(b) => {
            let res = parametric_bootstrap(&fit, series, b)?;
            if res.k_extension {
                notes.push("bootstrap paths are AR(1); re-estimation uses the fitted k".into());
            }
            Some(res)
        }
        None => None,
    };

    Ok(TestReport {
        k,
        n_obs: fit.n_obs,
        sample_length: t_len,
        lower_bound: series.lower_bound,
        alpha_hat: fit.alpha_hat,
        beta_hat: fit.beta_hat,
        phi_hat: fit.phi_hat.clone(),
        t_alpha,
        t_beta,
        b0_hat,
        phi1_hat: fit.phi1_hat,
        sigma_hat,
        ratio,
        table_row: row.ratio,
        critical_values,
        reject,
        p_value_table: table.p_value(t_beta, ratio),
        p_value_sim,
        p_value_sim_b0_zero,
        p_value_boot,
        lag_selection,
        notes,
    })
}
