//! Reproducible random streams for Monte Carlo work.
//!
//! Every replication draws from its own ChaCha8 substream: the 64-bit master
//! seed is expanded into the ChaCha key (PCG32 expansion, as done by
//! `SeedableRng::seed_from_u64`) and the replication index selects the
//! 64-bit stream (nonce). ChaCha is a keyed counter-mode generator, so the
//! draws of replication `r` depend only on `(seed, r)` and never on which
//! worker thread ran it or in what order.
//!
//! Normal variates use the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};

/// Seed used whenever a caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_240_917;

pub type StreamRng = ChaCha8Rng;

/// Generator for replication `index` under master `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Distribution of the standardized innovations `u_t / sigma`.
///
/// All laws have mean zero and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InnovationLaw {
    #[default]
    Gaussian,
    /// Student-t rescaled to unit variance; requires `df > 2`.
    StudentT { df: f64 },
    /// Equiprobable +1 / -1.
    Rademacher,
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::StudentT { df } if !(df > 2.0) => Err(TobitError::invalid(format!(
                "Student-t innovations need df > 2 for a finite variance, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InnovationLaw::Gaussian => "gaussian".to_string(),
            InnovationLaw::StudentT { df } => format!("student_t({df})"),
            InnovationLaw::Rademacher => "rademacher".to_string(),
        }
    }

    /// Fill `out` with i.i.d. draws scaled by `sigma`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, sigma: f64, out: &mut [f64]) {
        match *self {
            InnovationLaw::Gaussian => {
                for u in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *u = sigma * z;
                }
            }
            InnovationLaw::StudentT { df } => {
                let dist = StudentT::new(df).expect("validated degrees of freedom");
                let scale = sigma * ((df - 2.0) / df).sqrt();
                for u in out.iter_mut() {
                    *u = scale * dist.sample(rng);
                }
            }
            InnovationLaw::Rademacher => {
                for u in out.iter_mut() {
                    *u = if rng.random::<bool>() { sigma } else { -sigma };
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, sigma: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill(rng, sigma, &mut out);
        out
    }
}
