use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::bounds::{dip_bound, escape_upper, return_upper};
use crate::error::{FlowError, Result};
use crate::integrator::{evolve_with, PointCloud};
use crate::model::{beta_star_lower, beta_star_upper, FlowModel};
use crate::noise::Seed;
use crate::report::BoundReport;

use super::{estimate, replica_noise, step_count, Grid, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnePointVariant {
    /// Start at `|x| = R`, end beyond `S` without entering `B_{R_bar}`.
    Escape,
    /// Start at `|x| = S`, end inside `B_R` without entering `B_{R_bar}`.
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePointParams {
    pub r: f64,
    pub s: f64,
    pub r_bar: f64,
    pub t: f64,
    pub grid: Grid,
    pub replicas: u64,
}

fn axis_point(d: usize, radius: f64) -> PointCloud {
    let mut x = vec![0.0; d];
    x[0] = radius;
    PointCloud::new(d, x).expect("one point")
}

fn trial_from(result: Result<bool>) -> Trial {
    match result {
        Ok(hit) => Trial::from(hit),
        Err(FlowError::NumericOverflow { .. }) => Trial::Diverged,
        Err(e) => panic!("replica failed: {e}"),
    }
}

/// Escape or return frequency of a single point against the matching bound.
pub fn exp_one_point(model: &FlowModel, variant: OnePointVariant, p: &OnePointParams, seed: &Seed) -> Result<BoundReport> {
    let OnePointParams { r, s, r_bar, t, grid, replicas } = *p;
    if !(1.0 <= r_bar && r_bar < r && s > r_bar) {
        return Err(FlowError::ConfigInvalid(format!(
            "need 1 <= R_bar < R and S > R_bar (R = {r}, S = {s}, R_bar = {r_bar})"
        )));
    }
    let sigma_b = model.constants().sigma_b;
    let (name, start, bound, beta) = match variant {
        OnePointVariant::Escape => {
            let b = beta_star_upper(model, r_bar)?;
            ("escape", r, escape_upper(r, s, r_bar, t, sigma_b, b)?, b)
        }
        OnePointVariant::Return => {
            let b = beta_star_lower(model, r_bar)?;
            ("return", s, return_upper(r, s, r_bar, t, sigma_b, b)?, b)
        }
    };
    let steps = step_count(t, grid.h)?;
    let d = model.dimension();
    let m = model.field_count();
    let est = estimate(replicas, seed.value, |rs| {
        trial_from((|| {
            let noise = replica_noise(rs, m, grid.h, grid.fine)?;
            let mut cloud = axis_point(d, start);
            let mut dipped = false;
            evolve_with(model, &mut cloud, 0, steps, &noise, |_, c| {
                if c.norm(0) < r_bar {
                    dipped = true;
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            if dipped {
                return Ok(false);
            }
            let end = cloud.norm(0);
            Ok(match variant {
                OnePointVariant::Escape => end >= s,
                OnePointVariant::Return => end <= r,
            })
        })())
    })?;
    let params = BTreeMap::from([
        ("R".to_string(), r),
        ("S".to_string(), s),
        ("R_bar".to_string(), r_bar),
        ("T".to_string(), t),
        ("sigma_B".to_string(), sigma_b),
        (if variant == OnePointVariant::Escape { "beta_star" } else { "beta_star_lower" }.to_string(), beta),
    ]);
    Ok(BoundReport::new(name, model.id(), params, est.hits, est.samples, est.diverged, bound.raw, &seed.text, grid.h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipParams {
    pub s: f64,
    pub r_bar: f64,
    /// Truncation horizon; the infinite-horizon event is at least as likely.
    pub t_trunc: f64,
    pub grid: Grid,
    pub replicas: u64,
}

/// Frequency of dipping into `B_{R_bar}` from `|x| = S` before `t_trunc`.
pub fn exp_dip(model: &FlowModel, p: &DipParams, seed: &Seed) -> Result<BoundReport> {
    let DipParams { s, r_bar, t_trunc, grid, replicas } = *p;
    if !(1.0 <= r_bar && r_bar < s) {
        return Err(FlowError::ConfigInvalid(format!("need 1 <= R_bar < S (S = {s}, R_bar = {r_bar})")));
    }
    let beta = beta_star_lower(model, r_bar)?;
    if beta <= 0.0 {
        return Err(FlowError::ConfigInvalid(format!(
            "the radial drift bound {beta} at R_bar = {r_bar} is not positive"
        )));
    }
    let sigma_b = model.constants().sigma_b;
    let bound = dip_bound(s, r_bar, sigma_b, beta)?;
    let steps = step_count(t_trunc, grid.h)?;
    let d = model.dimension();
    let m = model.field_count();
    let est = estimate(replicas, seed.value, |rs| {
        trial_from((|| {
            let noise = replica_noise(rs, m, grid.h, grid.fine)?;
            let mut cloud = axis_point(d, s);
            let mut hit = false;
            evolve_with(model, &mut cloud, 0, steps, &noise, |_, c| {
                if c.norm(0) <= r_bar {
                    hit = true;
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            Ok(hit)
        })())
    })?;
    let params = BTreeMap::from([
        ("S".to_string(), s),
        ("R_bar".to_string(), r_bar),
        ("T_trunc".to_string(), t_trunc),
        ("sigma_B".to_string(), sigma_b),
        ("beta_star_lower".to_string(), beta),
    ]);
    Ok(
        BoundReport::new("dip", model.id(), params, est.hits, est.samples, est.diverged, bound.raw, &seed.text, grid.h)
            .with_caveat("the horizon is truncated, so the estimate is a lower bound for the infinite-horizon event"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CertifiedConstants;

    fn deterministic(sign: f64) -> FlowModel {
        FlowModel::builder(2)
            .id("still")
            .drift(move |x, o| {
                let k = sign * 3.0 / x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                o[0] = k * x[0];
                o[1] = k * x[1];
            })
            .field(|_, o| o.fill(0.0))
            .constants(CertifiedConstants::new(3.0, 0.1, 0.1).unwrap())
            .radial(move |_| sign * 3.0, move |_| sign * 3.0)
            .build()
            .unwrap()
    }

    fn params(r: f64, s: f64, r_bar: f64, t: f64) -> OnePointParams {
        OnePointParams {
            r,
            s,
            r_bar,
            t,
            grid: Grid::new(0.01),
            replicas: 100,
        }
    }

    #[test]
    fn noiseless_inward_drift_never_escapes() {
        let m = deterministic(-1.0);
        let rep = exp_one_point(&m, OnePointVariant::Escape, &params(10.0, 20.0, 5.0, 1.0), &Seed::new(1)).unwrap();
        assert_eq!(rep.mc_estimate, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn noiseless_outward_drift_never_dips() {
        let m = deterministic(1.0);
        let p = DipParams {
            s: 7.0,
            r_bar: 5.0,
            t_trunc: 2.0,
            grid: Grid::new(0.01),
            replicas: 100,
        };
        let rep = exp_dip(&m, &p, &Seed::new(1)).unwrap();
        assert_eq!(rep.mc_estimate, 0.0);
        assert!(rep.pass);
        assert!(rep.caveat.contains("truncated"));
        assert!(matches!(exp_dip(&deterministic(-1.0), &p, &Seed::new(1)), Err(FlowError::ConfigInvalid(_))));
    }

    #[test]
    fn long_horizon_escape_bound_is_trivial() {
        // The positive part vanishes only when the drift pushes outward.
        let m = FlowModel::radial2d(1.0, 3.0, 0.5, 0.1).unwrap();
        let mut p = params(10.0, 11.0, 5.0, 100.0);
        p.grid = Grid::new(0.5);
        let rep = exp_one_point(&m, OnePointVariant::Escape, &p, &Seed::new(2)).unwrap();
        assert_eq!(rep.analytic_bound, 1.0);
        assert!(rep.pass);
    }

    #[test]
    fn radii_are_validated() {
        let m = deterministic(-1.0);
        assert!(matches!(
            exp_one_point(&m, OnePointVariant::Escape, &params(10.0, 20.0, 0.5, 1.0), &Seed::new(1)),
            Err(FlowError::ConfigInvalid(_))
        ));
    }
}
