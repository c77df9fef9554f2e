use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::geometry::{ball_grid, cover_sphere, hausdorff};
use crate::integrator::{evolve, PointCloud};
use crate::model::{beta0, FlowModel};
use crate::noise::{NoiseSource, Seed};

use super::{check_replicas, replicate, step_count};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractionParams {
    /// Radius of the target ball `B_r`.
    pub r: f64,
    /// Radius of the fixed ball whose pullback images should converge.
    pub r0: f64,
    pub gamma: f64,
    /// Covering radius for the spheres.
    pub xi: f64,
    /// First rung `T` of the ladder `T, 2T, 4T, 8T`.
    pub base_time: f64,
    pub h: f64,
    pub replicas: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionReport {
    pub model: String,
    pub seed: String,
    pub step_size: f64,
    pub replicas: u64,
    pub beta: f64,
    pub beta0: f64,
    pub gamma: f64,
    pub r: f64,
    pub r0: f64,
    pub ladder: Vec<f64>,
    /// Frequency of `phi_{-t,0}(boundary of B_{gamma t})` lying in `B_r`, per ladder time.
    pub inclusion_frequency: Vec<f64>,
    /// Frequency of `phi_{-t,0}(boundary of B_{r0})` lying in `B_r`, per ladder time.
    pub absorbing_frequency: Vec<f64>,
    /// Per replica, Hausdorff distance between the pullbacks over `t` and `2t` of a grid of `B_{r0}`.
    pub hausdorff: Vec<Vec<f64>>,
    pub hausdorff_median: Vec<f64>,
    /// Share of replicas whose Hausdorff series strictly decreases along the ladder.
    pub hausdorff_decreasing: f64,
    pub diverged: u64,
    pub pinned: bool,
    pub pass: bool,
}

pub const INCLUSION_TARGET: f64 = 0.95;
pub const DECREASE_TARGET: f64 = 0.90;

struct ReplicaOutcome {
    included: Vec<bool>,
    absorbed: Vec<bool>,
    hausdorff: Vec<f64>,
}

fn pull_back(model: &FlowModel, start: &PointCloud, t: f64, noise: &NoiseSource) -> Result<PointCloud> {
    let k = step_count(t, noise.step_size())?;
    let mut cloud = start.clone().with_time(-(k as f64) * noise.step_size());
    evolve(model, &mut cloud, -k, 0, noise)?;
    Ok(cloud)
}

fn max_norm(c: &PointCloud) -> f64 {
    (0..c.len()).map(|i| c.norm(i)).fold(0.0, f64::max)
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pullback experiment for an inward drift beyond the critical value.
pub fn exp_attraction(model: &FlowModel, p: &AttractionParams, seed: &Seed) -> Result<AttractionReport> {
    check_replicas(p.replicas)?;
    let d = model.dimension();
    let beta = model
        .drift_magnitude()
        .ok_or_else(|| FlowError::ConfigInvalid(format!("model {} has no radial drift magnitude", model.id())))?;
    if model.radial_upper(1.0) >= 0.0 {
        return Err(FlowError::ConfigInvalid(format!("model {} does not drift inward", model.id())));
    }
    let b0 = beta0(model.constants(), d);
    if !(beta > b0) || !(p.gamma < beta - b0) {
        return Err(FlowError::ConfigInvalid(format!(
            "need beta0 < beta and gamma < beta - beta0 (beta = {beta}, beta0 = {b0}, gamma = {})",
            p.gamma
        )));
    }
    let ladder: Vec<f64> = (0..4).map(|k| p.base_time * f64::from(1u32 << k)).collect();
    let grid_cloud = PointCloud::from_points(&ball_grid(d, p.r0, p.r0 / 5.0))?;
    let r0_cloud = cover_sphere(d, p.r0, p.xi.min(p.r0))?.to_cloud();
    let spheres: Vec<PointCloud> = ladder
        .iter()
        .map(|&t| Ok(cover_sphere(d, p.gamma * t, p.xi.min(p.gamma * t))?.to_cloud()))
        .collect::<Result<_>>()?;
    let m = model.field_count();

    let outcomes: Vec<Option<ReplicaOutcome>> = replicate(p.replicas, seed.value, |rs| {
        let run = || -> Result<ReplicaOutcome> {
            let noise = NoiseSource::new(rs, m, p.h)?;
            let mut included = Vec::with_capacity(4);
            let mut absorbed = Vec::with_capacity(4);
            let mut hausdorff_series = Vec::with_capacity(4);
            let mut previous = pull_back(model, &grid_cloud, ladder[0], &noise)?;
            for (k, &t) in ladder.iter().enumerate() {
                included.push(max_norm(&pull_back(model, &spheres[k], t, &noise)?) <= p.r);
                absorbed.push(max_norm(&pull_back(model, &r0_cloud, t, &noise)?) <= p.r);
                let doubled = pull_back(model, &grid_cloud, 2.0 * t, &noise)?;
                hausdorff_series.push(hausdorff(&previous, &doubled));
                previous = doubled;
            }
            Ok(ReplicaOutcome {
                included,
                absorbed,
                hausdorff: hausdorff_series,
            })
        };
        match run() {
            Ok(o) => Some(o),
            Err(FlowError::NumericOverflow { .. }) => None,
            Err(e) => panic!("replica failed: {e}"),
        }
    });

    let n = p.replicas as f64;
    let frequency = |pick: &dyn Fn(&ReplicaOutcome) -> &Vec<bool>, k: usize| {
        outcomes.iter().filter(|o| o.as_ref().is_some_and(|o| pick(o)[k])).count() as f64 / n
    };
    let inclusion_frequency: Vec<f64> = (0..4).map(|k| frequency(&|o| &o.included, k)).collect();
    let absorbing_frequency: Vec<f64> = (0..4).map(|k| frequency(&|o| &o.absorbed, k)).collect();
    let hausdorff: Vec<Vec<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().map_or_else(|| vec![f64::INFINITY; 4], |o| o.hausdorff.clone()))
        .collect();
    let decreasing = hausdorff.iter().filter(|s| s.is_finite_decreasing()).count() as f64 / n;
    let hausdorff_median = (0..4)
        .map(|k| median(&mut hausdorff.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect();
    let pass = inclusion_frequency.iter().all(|&f| f >= INCLUSION_TARGET) && decreasing >= DECREASE_TARGET;
    Ok(AttractionReport {
        model: model.id().to_string(),
        seed: seed.text.clone(),
        step_size: p.h,
        replicas: p.replicas,
        beta,
        beta0: b0,
        gamma: p.gamma,
        r: p.r,
        r0: p.r0,
        ladder,
        inclusion_frequency,
        absorbing_frequency,
        hausdorff,
        hausdorff_median,
        hausdorff_decreasing: decreasing,
        diverged: outcomes.iter().filter(|o| o.is_none()).count() as u64,
        pinned: true,
        pass,
    })
}

trait Series {
    fn is_finite_decreasing(&self) -> bool;
}

impl Series for Vec<f64> {
    fn is_finite_decreasing(&self) -> bool {
        self.iter().all(|v| v.is_finite()) && self.windows(2).all(|w| w[1] < w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CertifiedConstants;

    #[test]
    fn noiseless_inward_drift_includes_every_sphere() {
        let beta = 6.0;
        let m = FlowModel::builder(2)
            .id("still-in")
            .drift(move |x, o| {
                let k = -beta / x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                o[0] = k * x[0];
                o[1] = k * x[1];
            })
            .field(|_, o| o.fill(0.0))
            .constants(CertifiedConstants::new(0.0, 0.01, 0.01).unwrap())
            .radial(move |_| -beta, move |_| -beta)
            .drift_magnitude(beta)
            .build()
            .unwrap();
        let p = AttractionParams {
            r: 2.0,
            r0: 3.0,
            gamma: 1.0,
            xi: 0.5,
            base_time: 0.5,
            h: 0.01,
            replicas: 100,
        };
        let rep = exp_attraction(&m, &p, &Seed::new(1)).unwrap();
        assert_eq!(rep.inclusion_frequency, vec![1.0; 4]);
        assert_eq!(rep.hausdorff_decreasing, 1.0);
        assert!(rep.pass);
    }

    #[test]
    fn gamma_beyond_the_margin_is_rejected() {
        let m = FlowModel::radial2d(-1.0, 6.0, 0.5, 0.1).unwrap();
        let p = AttractionParams {
            r: 5.0,
            r0: 5.0,
            gamma: 6.0,
            xi: 0.5,
            base_time: 0.5,
            h: 0.01,
            replicas: 100,
        };
        assert!(matches!(exp_attraction(&m, &p, &Seed::new(1)), Err(FlowError::ConfigInvalid(_))));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
