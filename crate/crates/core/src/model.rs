//! Data-generating processes: the censored dynamic Tobit recursion in ADF
//! form, its uncensored linear counterpart, the limited autoregressive
//! comparator, and the lower-bound shift.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};

/// Parameters of
/// `y_t = max{L, alpha + beta*y_{t-1} + sum_i phi_i*dy_{t-i} + u_t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    /// Difference coefficients `phi_1..phi_{k-1}`.
    pub phi: Vec<f64>,
    pub sigma: f64,
    pub lower_bound: f64,
    /// Initial levels `y_{-k+1}, ..., y_0`, oldest first. Fewer than `k`
    /// values are allowed; the missing older levels repeat `y_0`.
    pub init: Vec<f64>,
}

impl ModelParams {
    /// Tobit AR(1) with unit root and bound zero, started at `y0`.
    pub fn random_walk(y0: f64) -> Self {
        ModelParams {
            alpha: 0.0,
            beta: 1.0,
            phi: Vec::new(),
            sigma: 1.0,
            lower_bound: 0.0,
            init: vec![y0],
        }
    }

    pub fn k(&self) -> usize {
        self.phi.len() + 1
    }

    /// `phi(1) = 1 - sum phi_i`.
    pub fn phi1(&self) -> f64 {
        1.0 - self.phi.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.init.is_empty() || self.init.len() > k {
            return Err(TobitError::LengthMismatch {
                what: "initial levels",
                expected: k,
                got: self.init.len(),
            });
        }
        if !(self.sigma >= 0.0) {
            return Err(TobitError::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        let scalars = [self.alpha, self.beta, self.sigma, self.lower_bound];
        if scalars.iter().chain(&self.phi).any(|v| !v.is_finite()) {
            return Err(TobitError::invalid("model parameters must be finite"));
        }
        if let Some(i) = self.init.iter().position(|v| !v.is_finite()) {
            return Err(TobitError::NonFinite { what: "initial level", index: i });
        }
        if let Some(&y) = self.init.iter().find(|&&y| y < self.lower_bound) {
            return Err(TobitError::invalid(format!(
                "initial level {y} is below the lower bound {}",
                self.lower_bound
            )));
        }
        Ok(())
    }

    /// The `k` initial levels with the flat-start fill applied, oldest first.
    pub fn initial_levels(&self) -> Vec<f64> {
        let k = self.k();
        let y0 = *self.init.last().expect("validated non-empty");
        let mut levels = vec![y0; k - self.init.len()];
        levels.extend_from_slice(&self.init);
        levels
    }

    /// Equivalent parameters for `y - L`, which is censored at zero:
    /// intercept `alpha + (beta - 1) L`, initial levels shifted by `-L`.
    pub fn shifted_to_zero(&self) -> ModelParams {
        let l = self.lower_bound;
        ModelParams {
            alpha: self.alpha + (self.beta - 1.0) * l,
            beta: self.beta,
            phi: self.phi.clone(),
            sigma: self.sigma,
            lower_bound: 0.0,
            init: self.init.iter().map(|y| y - l).collect(),
        }
    }
}

/// Local-to-unity parameterization: `alpha = a/sqrt(T)`, `beta = exp(c/T)`,
/// `y_0 = b0*sqrt(T) + L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub a: f64,
    pub c: f64,
    pub b0: f64,
    pub t: usize,
}

impl LocalParams {
    pub fn to_model(&self, phi: Vec<f64>, sigma: f64, lower_bound: f64) -> Result<ModelParams> {
        if self.t == 0 {
            return Err(TobitError::invalid("sample length T must be positive"));
        }
        if !(self.b0 >= 0.0) {
            return Err(TobitError::invalid(format!("b0 must be >= 0, got {}", self.b0)));
        }
        let t = self.t as f64;
        let params = ModelParams {
            alpha: self.a / t.sqrt(),
            beta: (self.c / t).exp(),
            phi,
            sigma,
            lower_bound,
            init: vec![self.b0 * t.sqrt() + lower_bound],
        };
        params.validate()?;
        Ok(params)
    }
}

/// An observed series with an optional date index and a declared lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dates: Option<Vec<NaiveDate>>,
    #[serde(default)]
    pub lower_bound: f64,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_bound(values, 0.0)
    }

    pub fn with_bound(values: Vec<f64>, lower_bound: f64) -> Result<Self> {
        let series = Series { values, dates: None, lower_bound };
        series.validate()?;
        Ok(series)
    }

    pub fn with_dates(values: Vec<f64>, dates: Vec<NaiveDate>, lower_bound: f64) -> Result<Self> {
        let series = Series { values, dates: Some(dates), lower_bound };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(TobitError::InsufficientData { needed: 1, got: 0 });
        }
        if let Some(dates) = &self.dates {
            if dates.len() != self.values.len() {
                return Err(TobitError::LengthMismatch {
                    what: "dates",
                    expected: self.values.len(),
                    got: dates.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiply levels and bound by `s`.
    pub fn scaled(&self, s: f64) -> Series {
        Series {
            values: self.values.iter().map(|v| v * s).collect(),
            dates: self.dates.clone(),
            lower_bound: self.lower_bound * s,
        }
    }
}

/// Output of [`simulate_tobit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub y: Vec<f64>,
    /// Censored shortfall `[x_t - L]_-` of the uncensored argument `x_t`.
    pub y_minus: Vec<f64>,
    pub innovations: Vec<f64>,
}

fn check_innovations(innovations: &[f64]) -> Result<()> {
    if innovations.is_empty() {
        return Err(TobitError::InsufficientData { needed: 1, got: 0 });
    }
    match innovations.iter().position(|u| !u.is_finite()) {
        Some(index) => Err(TobitError::NonFinite { what: "innovation", index }),
        None => Ok(()),
    }
}

/// Runs the ADF-form recursion `x_t = alpha + beta*y_{t-1} + sum phi_i dy_{t-i} + u_t`
/// with `y_t = regulate(x_t)`, in order t = 1..T.
fn run_recursion(
    params: &ModelParams,
    innovations: &[f64],
    mut regulate: impl FnMut(f64) -> f64,
) -> Vec<f64> {
    let p = params.phi.len();
    let init = params.initial_levels();
    // diffs[0] is dy_{t-1}, diffs[i] is dy_{t-1-i}.
    let mut diffs: Vec<f64> = (0..p).map(|i| init[p - i] - init[p - i - 1]).collect();
    let mut prev = init[p];
    let mut out = Vec::with_capacity(innovations.len());
    for &u in innovations {
        let mut x = params.alpha + params.beta * prev;
        for (phi, d) in params.phi.iter().zip(&diffs) {
            x += phi * d;
        }
        x += u;
        let y = regulate(x);
        if p > 0 {
            diffs.rotate_right(1);
            diffs[0] = y - prev;
        }
        prev = y;
        out.push(y);
    }
    out
}

/// Simulates the dynamic Tobit model on the supplied innovations `u_t`.
///
/// A nonzero bound is handled by running the zero-bound recursion on the
/// shifted parameters and adding `L` back, so the output for bound `L`
/// is `L` plus the zero-bound output of [`ModelParams::shifted_to_zero`].
pub fn simulate_tobit(params: &ModelParams, innovations: &[f64]) -> Result<SimOutput> {
    params.validate()?;
    check_innovations(innovations)?;
    let shifted = params.shifted_to_zero();
    let mut y_minus = Vec::with_capacity(innovations.len());
    let mut y = run_recursion(&shifted, innovations, |x| {
        y_minus.push(x.min(0.0));
        x.max(0.0)
    });
    let l = params.lower_bound;
    for v in &mut y {
        *v += l;
    }
    Ok(SimOutput { y, y_minus, innovations: innovations.to_vec() })
}

/// Same recursion as [`simulate_tobit`] without censoring.
pub fn simulate_linear_ar(params: &ModelParams, innovations: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    check_innovations(innovations)?;
    Ok(run_recursion(params, innovations, |x| x))
}

/// Limited autoregression censored at zero, started from `x_0 = 0`:
/// `phi(L) e_t = u_t` with zero pre-sample, then
/// `x_t = [x_{t-1}(1 + c/T) + e_t]_+`.
pub fn simulate_limited_ar(phi: &[f64], c: f64, t: usize, innovations: &[f64]) -> Result<Vec<f64>> {
    check_innovations(innovations)?;
    if innovations.len() != t {
        return Err(TobitError::LengthMismatch { what: "innovations", expected: t, got: innovations.len() });
    }
    let abs_sum: f64 = phi.iter().map(|p| p.abs()).sum();
    if abs_sum >= 1.0 {
        return Err(TobitError::UnstableFilter { sum: abs_sum });
    }
    let rho = 1.0 + c / t as f64;
    let mut eps: Vec<f64> = Vec::with_capacity(t);
    let mut x = 0.0;
    let mut out = Vec::with_capacity(t);
    for (s, &u) in innovations.iter().enumerate() {
        let mut e = u;
        for (i, p) in phi.iter().enumerate() {
            if s > i {
                e += p * eps[s - 1 - i];
            }
        }
        eps.push(e);
        x = (x * rho + e).max(0.0);
        out.push(x);
    }
    Ok(out)
}

/// Record of a lower-bound shift `y~ = y - L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundShift {
    pub bound: f64,
}

impl BoundShift {
    /// `alpha~ = alpha + (beta - 1) L`.
    pub fn alpha(&self, alpha: f64, beta: f64) -> f64 {
        alpha + (beta - 1.0) * self.bound
    }

    /// Local bound `l = T^{-1/2} L`.
    pub fn local_bound(&self, t: usize) -> f64 {
        self.bound / (t as f64).sqrt()
    }

    /// `a~ = a + c l`.
    pub fn local_drift(&self, a: f64, c: f64, t: usize) -> f64 {
        a + c * self.local_bound(t)
    }

    /// `b0~ = b0 - l`.
    pub fn local_initial(&self, b0: f64, t: usize) -> f64 {
        b0 - self.local_bound(t)
    }
}

/// Subtracts the declared lower bound, returning a zero-bound series.
pub fn shift_bound(series: &Series) -> (Series, BoundShift) {
    let bound = series.lower_bound;
    let shifted = Series {
        values: series.values.iter().map(|v| v - bound).collect(),
        dates: series.dates.clone(),
        lower_bound: 0.0,
    };
    (shifted, BoundShift { bound })
}
