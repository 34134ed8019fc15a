//! Local-to-unity dynamic Tobit autoregressions: simulation, limit
//! processes, OLS estimation in ADF form and a censoring-adjusted
//! Dickey-Fuller test whose critical values depend on the nuisance ratio
//! `b0 * phi(1) / sigma`.

pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod limit;
pub mod model;
pub mod rng;
pub mod stability;

pub use error::{Result, TobitError};
pub use estimation::{build_regressors, fwl_check, ols_fit, select_lag, InfoCriterion, LagSelection, OlsFit, Regressors};
pub use inference::{unit_root_test, CvTable, McConfig, TestReport};
pub use limit::{GridPath, Theta};
pub use model::{
    shift_bound, simulate_limited_ar, simulate_linear_ar, simulate_tobit, BoundShift, LocalParams, ModelParams,
    Series, SimOutput,
};
pub use rng::{InnovationLaw, DEFAULT_SEED};
pub use stability::{companion_pair, jsr_bounds, sufficient_condition, CompanionPair, JsrCertificate};
