//! Monte Carlo experiments that set sampled flows against the analytic bounds.
//!
//! Replica `k` of a run with seed `s` draws its noise from `replica_seed(s, k)`,
//! so results do not depend on evaluation order or on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::noise::{replica_seed, NoiseSource};
use crate::report::binomial_se;

mod attraction;
mod chaining;
mod diameter;
mod expansion;
mod gaussian;
mod one_point;
mod oracle;
mod two_point;

pub use attraction::{exp_attraction, AttractionParams, AttractionReport};
pub use chaining::{chaining_exact_check, quarter_grid, walk_increment_tail, ChainingRow};
pub use diameter::{exp_diameter, DiameterParams};
pub use expansion::{exp_expansion, ExpansionParams, ExpansionReport};
pub use gaussian::gaussian_suite;
pub use one_point::{exp_dip, exp_one_point, DipParams, OnePointParams, OnePointVariant};
pub use oracle::{coupling_is_exact, flow_property_is_exact, strong_error_slope, StrongError};
pub use two_point::{exp_two_point, TwoPointParams};

/// Outcome of one replica for a probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trial {
    Hit,
    Miss,
    /// The replica hit the overflow guard. Counted as a hit and reported separately.
    Diverged,
}

impl From<bool> for Trial {
    fn from(hit: bool) -> Self {
        if hit {
            Trial::Hit
        } else {
            Trial::Miss
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub std_error: f64,
    /// Includes diverged replicas.
    pub hits: u64,
    pub diverged: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, diverged: u64, samples: u64) -> Self {
        let p = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        Estimate {
            p_hat: p,
            std_error: binomial_se(p, samples),
            hits,
            diverged,
            samples,
        }
    }
}

pub const MIN_REPLICAS: u64 = 100;

fn check_replicas(n: u64) -> Result<()> {
    if n < MIN_REPLICAS {
        return Err(FlowError::ConfigInvalid(format!(
            "{n} replicas requested, at least {MIN_REPLICAS} are needed"
        )));
    }
    Ok(())
}

/// Runs `f` on replicas `0..n` in parallel and returns the results in replica order.
/// `f` receives the replica's noise seed.
pub fn replicate<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..n).into_par_iter().map(|k| f(replica_seed(seed, k))).collect()
}

/// Frequency of an event over `n` replicas with its binomial standard error.
pub fn estimate<F>(n: u64, seed: u64, event: F) -> Result<Estimate>
where
    F: Fn(u64) -> Trial + Sync,
{
    check_replicas(n)?;
    let (hits, diverged) = (0..n)
        .into_par_iter()
        .map(|k| match event(replica_seed(seed, k)) {
            Trial::Hit => (1u64, 0u64),
            Trial::Miss => (0, 0),
            Trial::Diverged => (1, 1),
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Estimate::from_counts(hits, diverged, n))
}

/// Noise with step `h` carved from a base grid of step `fine`, so that runs at
/// several step sizes share one Brownian path.
pub fn replica_noise(seed: u64, drivers: usize, h: f64, fine: f64) -> Result<NoiseSource> {
    let ratio = h / fine;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
        return Err(FlowError::ConfigInvalid(format!("step {h} is not a multiple of {fine}")));
    }
    Ok(NoiseSource::new(seed, drivers.max(1), fine)?.coarsened(factor as u32))
}

/// Number of steps of size `h` in `[0, t]`.
pub fn step_count(t: f64, h: f64) -> Result<i64> {
    let n = (t / h).round();
    if !(n >= 1.0) || ((t / h) - n).abs() > 1e-6 {
        return Err(FlowError::ConfigInvalid(format!("horizon {t} is not a multiple of the step {h}")));
    }
    Ok(n as i64)
}

/// Where the grid and step size of a run come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    /// Finest step of the run; equals `h` unless several step sizes are coupled.
    pub fine: f64,
}

impl Grid {
    pub fn new(h: f64) -> Self {
        Grid { h, fine: h }
    }

    pub fn coupled(h: f64, fine: f64) -> Self {
        Grid { h, fine }
    }
}
