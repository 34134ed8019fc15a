//! Critical values, simulated and bootstrap p-values, and the Monte Carlo
//! experiment engine.

pub mod bootstrap;
pub mod montecarlo;
pub mod table;
pub mod unit_root;

pub use bootstrap::{bootstrap_p_value, parametric_bootstrap, BootstrapOptions, BootstrapResult};
pub use montecarlo::{
    empirical_quantile, simulated_p_value, size_power_experiment, tabulate_null, tstat_distribution,
    tstat_distributions, Cutoffs, DistGrid, DistModel, DistSpec, McConfig, NullBackend, PowerResult,
    SimulatedPValue, TstatDistribution,
};
pub use table::{CvRow, CvTable, Level, PBound, Provenance, TablePValue};
pub use unit_root::{unit_root_test, LagChoice, SimOptions, TestOptions, TestReport};
