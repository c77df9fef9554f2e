use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::integrator::{evolve, PointCloud};
use crate::model::FlowModel;
use crate::noise::{NoiseSource, Seed};

use super::{check_replicas, replica_noise, replicate, step_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongError {
    pub steps: Vec<f64>,
    /// Mean absolute terminal error against the exact flow, per step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
}

/// Strong error of the scheme at time `t` for a model with a closed-form flow.
/// All step sizes share one Brownian path per replica.
pub fn strong_error_slope(model: &FlowModel, x0: f64, t: f64, steps: &[f64], n: u64, seed: &Seed) -> Result<StrongError> {
    check_replicas(n)?;
    let (lambda, sigma) = model
        .linear_flow()
        .ok_or_else(|| FlowError::ConfigInvalid(format!("model {} has no closed-form flow", model.id())))?;
    let fine = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let fine_steps = step_count(t, fine)?;
    let per_replica: Vec<Vec<f64>> = replicate(n, seed.value, |rs| {
        let base = NoiseSource::new(rs, 1, fine).expect("valid noise");
        let w: f64 = (0..fine_steps).map(|k| base.increment(1, k).expect("driver 1")).sum();
        let exact = x0 * (sigma * w + (lambda - 0.5 * sigma * sigma) * t).exp();
        steps
            .iter()
            .map(|&h| {
                let noise = replica_noise(rs, 1, h, fine).expect("commensurate steps");
                let mut cloud = PointCloud::new(1, vec![x0]).expect("one point");
                evolve(model, &mut cloud, 0, step_count(t, h).expect("commensurate"), &noise).expect("no overflow");
                (cloud.point(0)[0] - exact).abs()
            })
            .collect()
    });
    let errors: Vec<f64> = (0..steps.len())
        .map(|i| per_replica.iter().map(|e| e[i]).sum::<f64>() / n as f64)
        .collect();
    let lx: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / lx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    Ok(StrongError {
        steps: steps.to_vec(),
        errors,
        slope,
    })
}

/// Evolving `m -> n` in one call equals `m -> k` followed by `k -> n`, bit for bit.
/// Step indices may be negative.
pub fn flow_property_is_exact(
    model: &FlowModel,
    start: &PointCloud,
    (m, k, n): (i64, i64, i64),
    noise: &NoiseSource,
) -> Result<bool> {
    let mut whole = start.clone();
    evolve(model, &mut whole, m, n, noise)?;
    let mut split = start.clone();
    evolve(model, &mut split, m, k, noise)?;
    evolve(model, &mut split, k, n, noise)?;
    Ok(whole.coordinates() == split.coordinates())
}

/// Evolving points together equals evolving each alone under the same noise, bit for bit.
pub fn coupling_is_exact(model: &FlowModel, start: &PointCloud, n: i64, noise: &NoiseSource) -> Result<bool> {
    let mut together = start.clone();
    evolve(model, &mut together, 0, n, noise)?;
    let d = start.dimension();
    for i in 0..start.len() {
        let mut alone = PointCloud::new(d, start.point(i).to_vec())?;
        evolve(model, &mut alone, 0, n, noise)?;
        if alone.point(0) != together.point(i) {
            return Ok(false);
        }
    }
    Ok(true)
}
