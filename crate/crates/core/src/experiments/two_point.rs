use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::bounds::{drifted_running_max_exact, two_point_tail};
use crate::error::{FlowError, Result};
use crate::integrator::{evolve_with, PointCloud};
use crate::model::FlowModel;
use crate::noise::Seed;
use crate::report::BoundReport;

use super::{estimate, replica_noise, step_count, Grid, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointParams {
    /// First point; the second sits `separation` further along the first axis.
    pub base: Vec<f64>,
    pub separation: f64,
    pub u: f64,
    pub t: f64,
    pub grid: Grid,
    pub replicas: u64,
}

/// Frequency of `sup_t |phi_t(x) - phi_t(y)| >= u` on the grid. The verdict
/// uses the reflection-principle value of the dominating variable.
pub fn exp_two_point(model: &FlowModel, p: &TwoPointParams, seed: &Seed) -> Result<BoundReport> {
    let d = model.dimension();
    if p.base.len() != d {
        return Err(FlowError::ConfigInvalid(format!("base point has {} coordinates, model has {d}", p.base.len())));
    }
    let c = model.constants();
    let (exact, bound) = two_point_tail(p.separation, p.u, p.t, c.sigma_l, c.lambda)?;
    let steps = step_count(p.t, p.grid.h)?;
    let m = model.field_count();
    let mut y = p.base.clone();
    y[0] += p.separation;
    let start = [p.base.clone(), y].concat();
    let (u, grid) = (p.u, p.grid);
    let est = estimate(p.replicas, seed.value, |rs| {
        let run = || -> Result<bool> {
            let noise = replica_noise(rs, m, grid.h, grid.fine)?;
            let mut cloud = PointCloud::new(d, start.clone())?.with_pair_tracking()?;
            if cloud.running_pair_sup().unwrap_or(0.0) >= u {
                return Ok(true);
            }
            evolve_with(model, &mut cloud, 0, steps, &noise, |_, c| {
                if c.running_pair_sup().unwrap_or(0.0) >= u {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            Ok(cloud.running_pair_sup().unwrap_or(0.0) >= u)
        };
        match run() {
            Ok(hit) => Trial::from(hit),
            Err(FlowError::NumericOverflow { .. }) => Trial::Diverged,
            Err(e) => panic!("replica failed: {e}"),
        }
    })?;
    let mut params = BTreeMap::from([
        ("separation".to_string(), p.separation),
        ("u".to_string(), p.u),
        ("T".to_string(), p.t),
        ("sigma_L".to_string(), c.sigma_l),
        ("lambda".to_string(), c.lambda),
        ("exponential_bound".to_string(), bound.capped),
    ]);
    if let (Some((lambda, sigma)), true) = (model.linear_flow(), p.separation > 0.0) {
        let flow = drifted_running_max_exact((p.u / p.separation).ln(), lambda - 0.5 * sigma * sigma, sigma, p.t);
        params.insert("flow_exact".into(), flow);
    }
    let mut rep =
        BoundReport::new("two-point", model.id(), params, est.hits, est.samples, est.diverged, bound.raw, &seed.text, p.grid.h)
            .with_exact(exact);
    rep.pass = rep.mc_estimate <= exact + 3.0 * rep.std_error;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sep: f64, u: f64) -> TwoPointParams {
        TwoPointParams {
            base: vec![1.0],
            separation: sep,
            u,
            t: 1.0,
            grid: Grid::new(0.01),
            replicas: 2000,
        }
    }

    #[test]
    fn coincident_points_never_separate() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let r = exp_two_point(&m, &params(0.0, 1.0), &Seed::new(4)).unwrap();
        assert_eq!((r.mc_estimate, r.exact), (0.0, Some(0.0)));
        assert!(r.pass);
    }

    #[test]
    fn threshold_below_separation_is_certain() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let r = exp_two_point(&m, &params(1.0, 0.5), &Seed::new(4)).unwrap();
        assert_eq!((r.mc_estimate, r.exact), (1.0, Some(1.0)));
        assert!(r.pass);
    }

    #[test]
    fn multiplicative_flow_matches_its_closed_form() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let r = exp_two_point(&m, &params(1.0, std::f64::consts::E), &Seed::new(5)).unwrap();
        let flow = r.params["flow_exact"];
        assert!(flow < r.exact.unwrap());
        // Grid and Euler bias at h = 0.01 stay within a few standard errors plus 0.02.
        assert!((r.mc_estimate - flow).abs() < 4.0 * r.std_error + 0.02, "{} vs {flow}", r.mc_estimate);
        assert!(r.pass);
    }
}
