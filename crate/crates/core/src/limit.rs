//! Grid discretizations of the limit processes.
//!
//! `K(r) = b0 + a int_0^r e^{-cs} ds + sigma int_0^r e^{-cs} dW(s)` is
//! discretized on `r = j/n` with Euler sums, `J` is its regulated
//! counterpart `e^{cr} (K(r) + sup_{r' <= r} [-K(r')]_+)`, and
//! `Y = J_{theta_phi} / phi(1)` with `theta_phi = (a, phi(1) b0, c / phi(1))`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};

/// Default grid size for limit functionals.
pub const DEFAULT_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub a: f64,
    pub b0: f64,
    pub c: f64,
    pub sigma: f64,
}

impl Theta {
    pub fn new(a: f64, b0: f64, c: f64, sigma: f64) -> Result<Self> {
        let theta = Theta { a, b0, c, sigma };
        theta.validate()?;
        Ok(theta)
    }

    /// Null of a unit root with no drift: `a = c = 0`.
    pub fn null(b0: f64, sigma: f64) -> Self {
        Theta { a: 0.0, b0, c: 0.0, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0 >= 0.0) {
            return Err(TobitError::invalid(format!("b0 must be >= 0, got {}", self.b0)));
        }
        if !(self.sigma > 0.0) {
            return Err(TobitError::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.a.is_finite() && self.c.is_finite()) {
            return Err(TobitError::invalid("a and c must be finite"));
        }
        Ok(())
    }

    /// `(a, phi(1) b0, c / phi(1))`.
    pub fn with_phi(&self, phi1: f64) -> Theta {
        Theta { a: self.a, b0: phi1 * self.b0, c: self.c / phi1, sigma: self.sigma }
    }
}

/// Path values at `r = j/n`, `j = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.values.last().expect("grid paths are non-empty")
    }
}

/// Euler discretization of `K_theta` driven by standard normal increments
/// `xi_1..xi_n`; `K_0 = b0`.
pub fn simulate_k(theta: &Theta, xi: &[f64]) -> Result<GridPath> {
    let n = xi.len();
    if n == 0 {
        return Err(TobitError::invalid("grid needs at least one step"));
    }
    let nf = n as f64;
    let drift = theta.a / nf;
    let diffusion = theta.sigma / nf.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut k = theta.b0;
    values.push(k);
    for (s, &z) in xi.iter().enumerate() {
        let w = (-theta.c * (s + 1) as f64 / nf).exp();
        k += w * (drift + diffusion * z);
        values.push(k);
    }
    Ok(GridPath { values })
}

/// `J_j = e^{c j/n} (K_j + max_{i<=j} [-K_i]_+)`.
pub fn regulate(path: &GridPath, c: f64) -> GridPath {
    let nf = path.steps().max(1) as f64;
    let mut sup = 0.0f64;
    let values = path
        .values
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            sup = sup.max(-k);
            let level = (k + sup).max(0.0);
            if c == 0.0 {
                level
            } else {
                (c * j as f64 / nf).exp() * level
            }
        })
        .collect();
    GridPath { values }
}

/// `Y = J_{theta_phi} / phi(1)` for the raw `theta = (a, b0, c, sigma)`.
pub fn simulate_y(theta: &Theta, phi1: f64, xi: &[f64]) -> Result<GridPath> {
    if !(phi1 > 0.0) {
        return Err(TobitError::invalid(format!("phi(1) must be > 0, got {phi1}")));
    }
    let theta_phi = theta.with_phi(phi1);
    let j = regulate(&simulate_k(&theta_phi, xi)?, theta_phi.c);
    Ok(GridPath { values: j.values.into_iter().map(|v| v / phi1).collect() })
}

/// One accepted draw of the limiting `t_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDraw {
    pub t_beta: f64,
    /// Draws discarded because the limiting Gram matrix was degenerate.
    pub rejected: u32,
}

/// Limiting `t_beta` functional evaluated on one `Y` path and the increments
/// that drove it. Returns `None` for a degenerate Gram matrix.
pub fn tstat_functional(theta: &Theta, phi1: f64, y: &GridPath, xi: &[f64]) -> Option<f64> {
    let n = xi.len();
    let nf = n as f64;
    let dw_scale = 1.0 / nf.sqrt();
    let (mut int_y, mut int_y2, mut int_ydw) = (0.0, 0.0, 0.0);
    // Left-point sums: Y_{j-1} pairs with the increment over ((j-1)/n, j/n].
    for (yv, z) in y.values[..n].iter().zip(xi) {
        int_y += yv;
        int_y2 += yv * yv;
        int_ydw += yv * z * dw_scale;
    }
    int_y /= nf;
    int_y2 /= nf;
    let det = int_y2 - int_y * int_y;
    if !(det > 1e-12 * int_y2.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let c_phi = theta.c / phi1;
    let u1 = phi1 * (y.end() - theta.b0 - c_phi * int_y) - theta.a;
    let u2 = theta.sigma * int_ydw;
    let b = (u2 - int_y * u1) / det;
    Some(b * det.sqrt() / theta.sigma)
}

/// One draw of the limiting `t_beta` on an `n`-step grid, resampling
/// degenerate draws.
pub fn limit_tstat_draw<R: Rng + ?Sized>(
    theta: &Theta,
    phi1: f64,
    n: usize,
    rng: &mut R,
) -> Result<LimitDraw> {
    theta.validate()?;
    if n < 100 {
        return Err(TobitError::invalid(format!("limit draws need n >= 100 grid steps, got {n}")));
    }
    let mut xi = vec![0.0; n];
    let mut rejected = 0u32;
    loop {
        for z in xi.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        let y = simulate_y(theta, phi1, &xi)?;
        if let Some(t_beta) = tstat_functional(theta, phi1, &y, &xi) {
            return Ok(LimitDraw { t_beta, rejected });
        }
        rejected += 1;
        if rejected > 1000 {
            return Err(TobitError::invalid("limit draws are persistently degenerate"));
        }
    }
}
