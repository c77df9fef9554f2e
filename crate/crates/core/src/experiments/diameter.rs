use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::bounds::{ball_diameter_bound_opt, drifted_running_max_exact, BallParams};
use crate::error::{FlowError, Result};
use crate::geometry::cube_lattice;
use crate::integrator::{evolve_with, PointCloud};
use crate::model::FlowModel;
use crate::noise::Seed;
use crate::report::BoundReport;

use super::{check_replicas, replica_noise, replicate, step_count, Grid};

/// The constant in the two-point moment bound used by the cube estimate.
pub const C_BAR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterParams {
    pub corner: Vec<f64>,
    /// Cube side.
    pub xi: f64,
    /// Lattice points per side.
    pub points_per_side: usize,
    pub u: f64,
    pub t: f64,
    pub grid: Grid,
    pub replicas: u64,
}

/// Frequency of the evolved cube lattice reaching diameter `u`, and `2u`, on the grid.
pub fn exp_diameter(model: &FlowModel, p: &DiameterParams, seed: &Seed) -> Result<Vec<BoundReport>> {
    check_replicas(p.replicas)?;
    let d = model.dimension();
    if p.corner.len() != d {
        return Err(FlowError::ConfigInvalid(format!("corner has {} coordinates, model has {d}", p.corner.len())));
    }
    if p.xi < 0.0 || p.u <= 0.0 || p.points_per_side == 0 {
        return Err(FlowError::ConfigInvalid("need xi >= 0, u > 0 and at least one point per side".into()));
    }
    let lattice = if p.xi == 0.0 {
        vec![p.corner.clone()]
    } else {
        cube_lattice(&p.corner, p.xi, p.points_per_side)
    };
    let start = lattice.concat();
    let steps = step_count(p.t, p.grid.h)?;
    let m = model.field_count();
    let levels = [p.u, 2.0 * p.u];
    let grid = p.grid;
    // Per replica: the running diameter, or None when the replica diverged.
    let sups: Vec<Option<f64>> = replicate(p.replicas, seed.value, |rs| {
        let run = || -> Result<f64> {
            let noise = replica_noise(rs, m, grid.h, grid.fine)?;
            let mut cloud = PointCloud::new(d, start.clone())?.with_diameter_tracking();
            evolve_with(model, &mut cloud, 0, steps, &noise, |_, c| {
                if c.running_diameter_max().unwrap_or(0.0) >= levels[1] {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            Ok(cloud.running_diameter_max().unwrap_or(0.0))
        };
        match run() {
            Ok(v) => Some(v),
            Err(FlowError::NumericOverflow { .. }) => None,
            Err(e) => panic!("replica failed: {e}"),
        }
    });
    let c = model.constants();
    let diverged = sups.iter().filter(|s| s.is_none()).count() as u64;
    levels
        .iter()
        .map(|&u| {
            let opt = ball_diameter_bound_opt(&BallParams {
                xi: p.xi,
                t: p.t,
                u,
                c_bar: C_BAR,
                lambda: c.lambda,
                sigma: c.sigma_l,
                d,
            });
            let hits = sups.iter().filter(|s| s.is_none_or(|v| v >= u)).count() as u64;
            let params = BTreeMap::from([
                ("xi".to_string(), p.xi),
                ("u".to_string(), u),
                ("T".to_string(), p.t),
                ("points_per_side".to_string(), p.points_per_side as f64),
                ("q".to_string(), opt.q),
                ("kappa".to_string(), opt.kappa),
                ("c_bar".to_string(), C_BAR),
            ]);
            let mut rep = BoundReport::new(
                "diameter",
                model.id(),
                params,
                hits,
                p.replicas,
                diverged,
                opt.bound.raw,
                &seed.text,
                p.grid.h,
            );
            if let Some((lambda, sigma)) = model.linear_flow() {
                let exact = if p.xi == 0.0 {
                    0.0
                } else {
                    drifted_running_max_exact((u / p.xi).ln(), lambda - 0.5 * sigma * sigma, sigma, p.t)
                };
                rep = rep.with_exact(exact);
            }
            Ok(rep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(xi: f64) -> DiameterParams {
        DiameterParams {
            corner: vec![1.0],
            xi,
            points_per_side: 8,
            u: 0.1,
            t: 1.0,
            grid: Grid::new(0.01),
            replicas: 500,
        }
    }

    #[test]
    fn a_single_point_has_no_diameter() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let r = exp_diameter(&m, &params(0.0), &Seed::new(1)).unwrap();
        assert_eq!(r[0].mc_estimate, 0.0);
        assert!(r[0].pass);
    }

    #[test]
    fn doubling_the_threshold_orders_the_estimates() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let mut p = params(0.05);
        p.u = 0.1;
        let r = exp_diameter(&m, &p, &Seed::new(2)).unwrap();
        assert!(r[1].mc_estimate <= r[0].mc_estimate);
        assert!(r[0].mc_estimate > 0.0);
        let exact = r[0].exact.unwrap();
        assert!((r[0].mc_estimate - exact).abs() < 4.0 * r[0].std_error + 0.03);
    }
}
