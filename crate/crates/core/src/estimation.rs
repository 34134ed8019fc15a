//! OLS estimation of the ADF-form regression, t-statistics and
//! information-criterion lag selection.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};
use crate::model::Series;

/// Condition number of the column-equilibrated Gram matrix above which the
/// Cholesky solve is replaced by a QR solve of the design.
pub const CHOLESKY_CONDITION_LIMIT: f64 = 1e12;

/// Relative size of the smallest `R` diagonal (QR of the equilibrated design)
/// below which the design is declared singular.
pub const QR_RANK_TOLERANCE: f64 = 1e-10;

/// Aligned regressors `x_t = (1, y_{t-1}, dy_{t-1}, ..., dy_{t-k+1})` and
/// responses `y_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub design: DMatrix<f64>,
    pub response: Vec<f64>,
    pub k: usize,
    /// Index (0-based) into the source series of the first response.
    pub start: usize,
    /// `y_{start-1}`, the lagged level of the first row.
    pub first_lag: f64,
}

impl Regressors {
    pub fn n_obs(&self) -> usize {
        self.response.len()
    }
}

/// Regressors with the first response at index `k` of the series.
pub fn build_regressors(series: &Series, k: usize) -> Result<Regressors> {
    build_regressors_from(series, k, k)
}

/// Regressors with the first response at index `start >= k`, so that fits of
/// different lag orders can share one estimation sample.
pub fn build_regressors_from(series: &Series, k: usize, start: usize) -> Result<Regressors> {
    if k == 0 {
        return Err(TobitError::invalid("lag order k must be >= 1"));
    }
    if start < k {
        return Err(TobitError::invalid(format!("first response index {start} precedes lag order {k}")));
    }
    let y = &series.values;
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(TobitError::NonFinite { what: "series value", index });
    }
    let needed = start + 2;
    if y.len() < needed {
        return Err(TobitError::InsufficientData { needed, got: y.len() });
    }
    let rows = y.len() - start;
    let design = DMatrix::from_fn(rows, k + 1, |r, j| {
        let t = start + r;
        match j {
            0 => 1.0,
            1 => y[t - 1],
            _ => y[t - j + 1] - y[t - j],
        }
    });
    Ok(Regressors { design, response: y[start..].to_vec(), k, start, first_lag: y[start - 1] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Cholesky,
    Qr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub k: usize,
    pub n_obs: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub phi_hat: Vec<f64>,
    /// `1 - sum phi_hat_i`.
    pub phi1_hat: f64,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals divided by the number of regression rows.
    pub sigma2_hat: f64,
    /// `M_T = sum x_t x_t'`, row-major.
    pub gram: Vec<Vec<f64>>,
    pub gram_inverse_diag: Vec<f64>,
    /// `alpha_hat / se`; `None` when the residual variance is numerically zero.
    pub t_alpha: Option<f64>,
    /// `(beta_hat - 1) / se`; `None` when the residual variance is numerically zero.
    pub t_beta: Option<f64>,
    pub solver: Solver,
    pub condition: f64,
}

impl OlsFit {
    pub fn coefficients(&self) -> Vec<f64> {
        let mut b = vec![self.alpha_hat, self.beta_hat];
        b.extend(&self.phi_hat);
        b
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma2_hat.sqrt()
    }

    pub fn t_beta_or_err(&self) -> Result<f64> {
        self.t_beta.ok_or(TobitError::DegenerateVariance)
    }
}

fn equilibrated_condition(gram: &DMatrix<f64>, scale: &DVector<f64>) -> f64 {
    let p = gram.nrows();
    let g = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = g.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn ols_fit(reg: &Regressors) -> Result<OlsFit> {
    let x = &reg.design;
    let p = x.ncols();
    let n = x.nrows();
    if n < p {
        return Err(TobitError::InsufficientData { needed: p, got: n });
    }
    let y = DVector::from_column_slice(&reg.response);
    let gram = x.transpose() * x;
    let xty = x.transpose() * &y;

    let diag = gram.diagonal();
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(TobitError::SingularDesign { condition: f64::INFINITY });
    }
    let scale = diag.map(|d| 1.0 / d.sqrt());
    let condition = equilibrated_condition(&gram, &scale);

    let (coef, inverse_diag, solver) = match gram.clone().cholesky() {
        Some(chol) if condition <= CHOLESKY_CONDITION_LIMIT => {
            let coef = chol.solve(&xty);
            let inv = chol.inverse();
            (coef, inv.diagonal(), Solver::Cholesky)
        }
        _ => {
            // Solve on the equilibrated design, then undo the column scaling.
            let xs = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * scale[j]);
            let qr = xs.qr();
            let r = qr.r();
            let rdiag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
            let rmax = rdiag.iter().cloned().fold(0.0, f64::max);
            let rmin = rdiag.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(rmin > QR_RANK_TOLERANCE * rmax) {
                return Err(TobitError::SingularDesign { condition });
            }
            let qty = qr.q().transpose() * &y;
            let zs = r.solve_upper_triangular(&qty).ok_or(TobitError::SingularDesign { condition })?;
            let coef = zs.component_mul(&scale);
            let rinv = r
                .solve_upper_triangular(&DMatrix::identity(p, p))
                .ok_or(TobitError::SingularDesign { condition })?;
            let inv_s = &rinv * rinv.transpose();
            let inv_diag = DVector::from_fn(p, |i, _| inv_s[(i, i)] * scale[i] * scale[i]);
            (coef, inv_diag, Solver::Qr)
        }
    };

    let fitted = x * &coef;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|u| u * u).sum();
    let sigma2_hat = ssr / n as f64;

    let y_scale = reg.response.iter().chain(std::iter::once(&reg.first_lag)).fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = sigma2_hat.sqrt() <= 1e-12 * y_scale.max(f64::MIN_POSITIVE);
    let se = |i: usize| (sigma2_hat * inverse_diag[i]).sqrt();
    let (t_alpha, t_beta) = if degenerate {
        (None, None)
    } else {
        (Some(coef[0] / se(0)), Some((coef[1] - 1.0) / se(1)))
    };

    let phi_hat: Vec<f64> = coef.iter().skip(2).cloned().collect();
    Ok(OlsFit {
        k: reg.k,
        n_obs: n,
        alpha_hat: coef[0],
        beta_hat: coef[1],
        phi1_hat: 1.0 - phi_hat.iter().sum::<f64>(),
        phi_hat,
        residuals,
        sigma2_hat,
        gram: (0..p).map(|i| (0..p).map(|j| gram[(i, j)]).collect()).collect(),
        gram_inverse_diag: inverse_diag.iter().cloned().collect(),
        t_alpha,
        t_beta,
        solver,
        condition,
    })
}

/// Fits `k` lags on the full series.
pub fn fit_series(series: &Series, k: usize) -> Result<OlsFit> {
    ols_fit(&build_regressors(series, k)?)
}

/// Absolute gap between `beta_hat - 1` and the demeaned-levels expression
/// `[(y_T^mu)^2 - (y_0^mu)^2 - sum dy_t^2] / [2 sum (y_{t-1}^mu)^2]`,
/// where `y_t^mu = y_t - mean(y_{t-1})` over the regression rows.
pub fn fwl_check(reg: &Regressors, fit: &OlsFit) -> Result<f64> {
    if reg.k != 1 {
        return Err(TobitError::invalid("the FWL identity check needs k = 1"));
    }
    Ok((fwl_beta_minus_one(reg.first_lag, &reg.response) - (fit.beta_hat - 1.0)).abs())
}

/// `beta_hat - 1` of an AR(1) regression through the demeaned-levels identity.
pub fn fwl_beta_minus_one(y0: f64, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let lag_sum: f64 = y0 + y[..y.len() - 1].iter().sum::<f64>();
    let mean = lag_sum / n;
    let mut prev = y0;
    let (mut sdd, mut sxx) = (0.0, 0.0);
    for &v in y {
        let d = v - prev;
        sdd += d * d;
        sxx += (prev - mean) * (prev - mean);
        prev = v;
    }
    let end = y[y.len() - 1] - mean;
    let start = y0 - mean;
    (end * end - start * start - sdd) / (2.0 * sxx)
}

/// Streaming sufficient statistics of the AR(1) regression of `dy_t` on
/// `(1, y_{t-1})`, for Monte Carlo loops that would otherwise materialize
/// paths. Levels are centred at a fixed origin for accuracy.
#[derive(Debug, Clone, Copy)]
pub struct Ar1Accumulator {
    origin: f64,
    n: f64,
    sx: f64,
    sxx: f64,
    sd: f64,
    sxd: f64,
    sdd: f64,
}

impl Ar1Accumulator {
    pub fn new(origin: f64) -> Self {
        Ar1Accumulator { origin, n: 0.0, sx: 0.0, sxx: 0.0, sd: 0.0, sxd: 0.0, sdd: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, y_prev: f64, y: f64) {
        let x = y_prev - self.origin;
        let d = y - y_prev;
        self.n += 1.0;
        self.sx += x;
        self.sxx += x * x;
        self.sd += d;
        self.sxd += x * d;
        self.sdd += d * d;
    }

    /// `(beta_hat - 1, t_beta)`; `None` for degenerate samples.
    pub fn finish(&self) -> Option<(f64, f64)> {
        if self.n < 3.0 {
            return None;
        }
        let cxx = self.sxx - self.sx * self.sx / self.n;
        let cxd = self.sxd - self.sx * self.sd / self.n;
        let cdd = self.sdd - self.sd * self.sd / self.n;
        if !(cxx > 0.0) {
            return None;
        }
        let b = cxd / cxx;
        let sigma2 = (cdd - cxd * b).max(0.0) / self.n;
        if !(sigma2 > 0.0) {
            return None;
        }
        Some((b, b / (sigma2 / cxx).sqrt()))
    }

    pub fn t_beta(&self) -> Option<f64> {
        self.finish().map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoCriterion {
    Aic,
    Bic,
}

impl InfoCriterion {
    pub fn penalty(&self, n_obs: usize) -> f64 {
        match self {
            InfoCriterion::Aic => 2.0,
            InfoCriterion::Bic => (n_obs as f64).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelection {
    pub k: usize,
    pub criterion: InfoCriterion,
    pub n_obs: usize,
    /// `(k, value)` for every candidate; `None` when the fit failed.
    pub values: Vec<(usize, Option<f64>)>,
}

/// Minimizes `T_eff ln(sigma2_hat) + penalty (k + 1)` over `k = 1..=k_max`,
/// with all candidates fitted on observations from index `k_max` onward.
/// Ties go to the smaller `k`.
pub fn select_lag(series: &Series, k_max: usize, criterion: InfoCriterion) -> Result<LagSelection> {
    if k_max == 0 {
        return Err(TobitError::invalid("k_max must be >= 1"));
    }
    let mut values = Vec::with_capacity(k_max);
    let mut best: Option<(usize, f64)> = None;
    let mut n_obs = 0;
    for k in 1..=k_max {
        let reg = build_regressors_from(series, k, k_max)?;
        n_obs = reg.n_obs();
        match ols_fit(&reg) {
            Ok(fit) if fit.sigma2_hat > 0.0 => {
                let v = n_obs as f64 * fit.sigma2_hat.ln() + criterion.penalty(n_obs) * (k + 1) as f64;
                if best.map_or(true, |(_, b)| v < b) {
                    best = Some((k, v));
                }
                values.push((k, Some(v)));
            }
            Ok(_) => {
                warn!("lag order {k}: zero residual variance, skipped");
                values.push((k, None));
            }
            Err(e) => {
                warn!("lag order {k}: {e}, skipped");
                values.push((k, None));
            }
        }
    }
    let (k, _) = best.ok_or(TobitError::NoLagCandidate { k_max })?;
    Ok(LagSelection { k, criterion, n_obs, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_tobit, ModelParams};
    use crate::rng::{substream, InnovationLaw};
    use proptest::prelude::*;

    fn series(v: &[f64]) -> Series {
        Series::new(v.to_vec()).unwrap()
    }

    /// Least squares by explicit normal equations and Gaussian elimination.
    fn brute_force(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &yt) in x.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += row[i] * row[j];
                }
                a[i][p] += row[i] * yt;
            }
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=p {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn regressor_alignment() {
        let reg = build_regressors(&series(&[1.0, 2.0, 4.0]), 1).unwrap();
        assert_eq!(reg.design.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert_eq!(reg.design.row(1).iter().cloned().collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert_eq!(reg.response, vec![2.0, 4.0]);

        let reg = build_regressors(&series(&[1.0, 2.0, 4.0, 7.0]), 2).unwrap();
        assert_eq!(reg.design.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 2.0, 1.0]);
        assert_eq!(reg.design.row(1).iter().cloned().collect::<Vec<_>>(), vec![1.0, 4.0, 2.0]);
        assert_eq!(reg.response, vec![4.0, 7.0]);

        assert!(matches!(
            build_regressors(&series(&[1.0, 2.0, 4.0]), 2),
            Err(TobitError::InsufficientData { .. })
        ));
        assert!(matches!(
            build_regressors(&series(&[1.0, f64::NAN, 4.0]), 1),
            Err(TobitError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn exact_ramp_fit() {
        let fit = fit_series(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 1).unwrap();
        assert!((fit.alpha_hat - 1.0).abs() < 1e-10);
        assert!((fit.beta_hat - 1.0).abs() < 1e-10);
        assert!(fit.residuals.iter().all(|u| u.abs() < 1e-10));
        assert!(fit.t_beta.is_none() && fit.t_alpha.is_none());
    }

    #[test]
    fn five_point_against_brute_force() {
        let y = [0.0, 1.0, 0.0, 2.0, 1.0];
        let fit = fit_series(&series(&y), 1).unwrap();
        let x: Vec<Vec<f64>> = y[..4].iter().map(|v| vec![1.0, *v]).collect();
        let b = brute_force(&x, &y[1..]);
        assert!((fit.alpha_hat - b[0]).abs() < 1e-12);
        assert!((fit.beta_hat - b[1]).abs() < 1e-12);
        // Hand solution: x = (0,1,0,2), y = (1,0,2,1).
        assert!((fit.beta_hat - (-4.0 / 11.0)).abs() < 1e-12);
        assert!((fit.alpha_hat - 14.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_singular() {
        let err = fit_series(&series(&[2.0; 10]), 1).unwrap_err();
        assert!(matches!(err, TobitError::SingularDesign { .. }), "{err}");
    }

    #[test]
    fn fwl_on_ramp_and_simulated_path() {
        let reg = build_regressors(&series(&[0.0, 1.0, 2.0, 3.0, 4.0]), 1).unwrap();
        let fit = ols_fit(&reg).unwrap();
        assert!(fwl_check(&reg, &fit).unwrap() < 1e-12);

        let u = InnovationLaw::Gaussian.draw(&mut substream(3, 0), 1.0, 500);
        let mut y = vec![0.0];
        y.extend(simulate_tobit(&ModelParams::random_walk(0.0), &u).unwrap().y);
        let reg = build_regressors(&series(&y), 1).unwrap();
        let fit = ols_fit(&reg).unwrap();
        assert!(fwl_check(&reg, &fit).unwrap() < 1e-10);
    }

    #[test]
    fn accumulator_matches_ols() {
        let u = InnovationLaw::Gaussian.draw(&mut substream(4, 0), 1.0, 2000);
        let mut y = vec![5.0];
        y.extend(simulate_tobit(&ModelParams::random_walk(5.0), &u).unwrap().y);
        let fit = fit_series(&series(&y), 1).unwrap();
        let mut acc = Ar1Accumulator::new(y[0]);
        for w in y.windows(2) {
            acc.push(w[0], w[1]);
        }
        let (b, t) = acc.finish().unwrap();
        assert!((b - (fit.beta_hat - 1.0)).abs() < 1e-12);
        assert!((t - fit.t_beta.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn qr_fallback_agrees_with_cholesky() {
        // Nearly collinear difference lags push the Gram past the Cholesky limit.
        let mut y = vec![0.0, 1.0];
        for t in 2..60 {
            let v: f64 = y[t - 1] + 1.0 + 1e-7 * ((t * t) as f64).sin();
            y.push(v);
        }
        let reg = build_regressors(&series(&y), 2).unwrap();
        match ols_fit(&reg) {
            Ok(fit) => {
                let x: Vec<Vec<f64>> =
                    (0..reg.n_obs()).map(|i| reg.design.row(i).iter().cloned().collect()).collect();
                let scale = fit.coefficients().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let fitted_gap: f64 = x
                    .iter()
                    .zip(&reg.response)
                    .map(|(row, yt)| {
                        let f: f64 = row.iter().zip(fit.coefficients()).map(|(a, b)| a * b).sum();
                        (f - yt).abs()
                    })
                    .fold(0.0, f64::max);
                assert!(fitted_gap < 1e-6 * scale, "{fit:?}");
            }
            Err(e) => assert!(matches!(e, TobitError::SingularDesign { .. })),
        }
    }

    #[test]
    fn bic_selects_one_lag_on_ar1_tobit() {
        let u = InnovationLaw::Gaussian.draw(&mut substream(17, 0), 1.0, 3000);
        let y = simulate_tobit(&ModelParams::random_walk(0.0), &u).unwrap().y;
        let sel = select_lag(&series(&y), 5, InfoCriterion::Bic).unwrap();
        assert_eq!(sel.k, 1);
        assert_eq!(sel.values.len(), 5);
    }

    #[test]
    fn bic_selects_two_lags_on_ar2_differences() {
        let params = ModelParams {
            alpha: 0.0,
            beta: 1.0,
            phi: vec![0.6],
            sigma: 1.0,
            lower_bound: 0.0,
            init: vec![50.0],
        };
        let u = InnovationLaw::Gaussian.draw(&mut substream(18, 0), 0.1, 5000);
        let y = simulate_tobit(&params, &u).unwrap().y;
        let sel = select_lag(&series(&y), 5, InfoCriterion::Bic).unwrap();
        assert_eq!(sel.k, 2);
    }

    fn random_series() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (prop::collection::vec(-5.0f64..5.0, 12..40), 1usize..4)
    }

    proptest! {
        #[test]
        fn normal_equations_and_orthogonality((y, k) in random_series()) {
            let reg = build_regressors(&series(&y), k).unwrap();
            let fit = match ols_fit(&reg) { Ok(f) => f, Err(_) => return Ok(()) };
            let b = DVector::from_vec(fit.coefficients());
            let g = &reg.design.transpose() * &reg.design;
            let rhs = reg.design.transpose() * DVector::from_column_slice(&reg.response);
            let resid = (&g * &b - &rhs).norm();
            prop_assert!(resid <= 1e-10 * (g.norm() * b.norm()).max(1.0));
            let su: f64 = fit.residuals.iter().sum();
            let sxu: f64 = fit.residuals.iter().zip(reg.design.column(1).iter()).map(|(u, x)| u * x).sum();
            let scale = reg.response.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!(su.abs() < 1e-8 * scale);
            prop_assert!(sxu.abs() < 1e-8 * scale * scale);
        }

        #[test]
        fn level_shift_equivariance((y, k) in random_series(), kappa in -50.0f64..50.0) {
            let a = match fit_series(&series(&y), k) { Ok(f) => f, Err(_) => return Ok(()) };
            let shifted: Vec<f64> = y.iter().map(|v| v + kappa).collect();
            let b = fit_series(&series(&shifted), k).unwrap();
            prop_assert!((a.beta_hat - b.beta_hat).abs() < 1e-8);
            for (p, q) in a.phi_hat.iter().zip(&b.phi_hat) {
                prop_assert!((p - q).abs() < 1e-8);
            }
            prop_assert!((b.alpha_hat - (a.alpha_hat + kappa * (1.0 - a.beta_hat))).abs() < 1e-7 * (1.0 + kappa.abs()));
        }

        #[test]
        fn t_beta_scale_invariance((y, k) in random_series(), s in 0.01f64..100.0) {
            let a = match fit_series(&series(&y), k) { Ok(f) => f, Err(_) => return Ok(()) };
            let scaled: Vec<f64> = y.iter().map(|v| v * s).collect();
            let b = fit_series(&series(&scaled), k).unwrap();
            let (ta, tb) = (a.t_beta.unwrap(), b.t_beta.unwrap());
            prop_assert!((ta - tb).abs() < 1e-9 * ta.abs().max(1.0));
            prop_assert!((b.alpha_hat - s * a.alpha_hat).abs() < 1e-9 * s * a.alpha_hat.abs().max(1.0));
        }

        #[test]
        fn fwl_identity_random(y in prop::collection::vec(-10.0f64..10.0, 20..21)) {
            let reg = build_regressors(&series(&y), 1).unwrap();
            let fit = ols_fit(&reg).unwrap();
            prop_assert!(fwl_check(&reg, &fit).unwrap() < 1e-12);
        }
    }
}
