use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::geometry::{contains_ball, cover_sphere, default_margin, inner_radius};
use crate::integrator::evolve_with;
use crate::model::{beta0, FlowModel};
use crate::noise::{NoiseSource, Seed};

use super::attraction::median;
use super::{check_replicas, replicate, step_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    /// Radius of the initial sphere.
    pub r: f64,
    pub gamma: f64,
    /// Covering radius of the initial sphere.
    pub xi: f64,
    pub ladder: Vec<f64>,
    pub h: f64,
    pub replicas: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub model: String,
    pub seed: String,
    pub step_size: f64,
    pub replicas: u64,
    pub beta: f64,
    pub beta0: f64,
    pub gamma: f64,
    pub r: f64,
    pub covering_size: usize,
    pub ladder: Vec<f64>,
    /// Frequency of `B_{gamma t}` lying inside the image of `B_r`, per ladder time.
    pub containment_frequency: Vec<f64>,
    pub inner_radius_median: Vec<f64>,
    /// Least-squares slope of the inner radius against time, per replica.
    pub slopes: Vec<f64>,
    pub median_slope: f64,
    pub slope_window: (f64, f64),
    pub diverged: u64,
    pub pinned: bool,
    pub pass: bool,
}

pub const CONTAINMENT_TARGET: f64 = 0.95;
/// Allowance above `beta` for the median slope.
pub const SLOPE_ALLOWANCE: f64 = 0.5;

fn least_squares_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    sxy / sxx
}

/// Forward evolution of a covering of the sphere of radius `r` under an outward drift.
pub fn exp_expansion(model: &FlowModel, p: &ExpansionParams, seed: &Seed) -> Result<ExpansionReport> {
    check_replicas(p.replicas)?;
    let d = model.dimension();
    let beta = model
        .drift_magnitude()
        .ok_or_else(|| FlowError::ConfigInvalid(format!("model {} has no radial drift magnitude", model.id())))?;
    if model.radial_lower(1.0) <= 0.0 {
        return Err(FlowError::ConfigInvalid(format!("model {} does not drift outward", model.id())));
    }
    let b0 = beta0(model.constants(), d);
    if !(beta > b0) || !(p.gamma < beta - b0) {
        return Err(FlowError::ConfigInvalid(format!(
            "need beta0 < beta and gamma < beta - beta0 (beta = {beta}, beta0 = {b0}, gamma = {})",
            p.gamma
        )));
    }
    if p.ladder.len() < 2 || p.ladder.windows(2).any(|w| w[1] <= w[0]) || p.ladder[0] <= 0.0 {
        return Err(FlowError::ConfigInvalid("the horizon ladder must increase and have two rungs".into()));
    }
    let marks: Vec<i64> = p.ladder.iter().map(|&t| step_count(t, p.h)).collect::<Result<_>>()?;
    let covering = cover_sphere(d, p.r, p.xi.min(p.r))?;
    let start = covering.to_cloud();
    let m = model.field_count();
    let last = *marks.last().expect("nonempty ladder");

    // Per replica: (inner radius, contained) at each rung, or None on divergence.
    let outcomes: Vec<Option<Vec<(f64, bool)>>> = replicate(p.replicas, seed.value, |rs| {
        let run = || -> Result<Vec<(f64, bool)>> {
            let noise = NoiseSource::new(rs, m, p.h)?;
            let mut cloud = start.clone();
            let mut rows = Vec::with_capacity(marks.len());
            let mut next = 0;
            evolve_with(model, &mut cloud, 0, last, &noise, |k, c| {
                if k + 1 == marks[next] {
                    let t = p.ladder[next];
                    rows.push((inner_radius(c), contains_ball(c, p.gamma * t, default_margin(c))));
                    next += 1;
                }
                ControlFlow::Continue(())
            })?;
            Ok(rows)
        };
        match run() {
            Ok(rows) => Some(rows),
            Err(FlowError::NumericOverflow { .. }) => None,
            Err(e) => panic!("replica failed: {e}"),
        }
    });

    let n = p.replicas as f64;
    let rungs = p.ladder.len();
    let containment_frequency: Vec<f64> = (0..rungs)
        .map(|k| outcomes.iter().filter(|o| o.as_ref().is_some_and(|o| o[k].1)).count() as f64 / n)
        .collect();
    let inner_radius_median = (0..rungs)
        .map(|k| median(&mut outcomes.iter().flatten().map(|o| o[k].0).collect::<Vec<_>>()))
        .collect();
    let slopes: Vec<f64> = outcomes
        .iter()
        .map(|o| match o {
            Some(rows) => least_squares_slope(&p.ladder, &rows.iter().map(|r| r.0).collect::<Vec<_>>()),
            None => f64::NAN,
        })
        .collect();
    let mut finite: Vec<f64> = slopes.iter().copied().filter(|s| s.is_finite()).collect();
    let median_slope = median(&mut finite);
    let slope_window = (beta - b0, beta + SLOPE_ALLOWANCE);
    let pass = containment_frequency.iter().all(|&f| f >= CONTAINMENT_TARGET)
        && median_slope >= slope_window.0
        && median_slope <= slope_window.1;
    Ok(ExpansionReport {
        model: model.id().to_string(),
        seed: seed.text.clone(),
        step_size: p.h,
        replicas: p.replicas,
        beta,
        beta0: b0,
        gamma: p.gamma,
        r: p.r,
        covering_size: covering.len(),
        ladder: p.ladder.clone(),
        containment_frequency,
        inner_radius_median,
        slopes,
        median_slope,
        slope_window,
        diverged: outcomes.iter().filter(|o| o.is_none()).count() as u64,
        pinned: true,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CertifiedConstants;

    #[test]
    fn noiseless_outward_drift_grows_linearly() {
        let beta = 6.0;
        let m = FlowModel::builder(2)
            .id("still-out")
            .drift(move |x, o| {
                let k = beta / x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                o[0] = k * x[0];
                o[1] = k * x[1];
            })
            .field(|_, o| o.fill(0.0))
            .constants(CertifiedConstants::new(beta, 0.01, 0.01).unwrap())
            .radial(move |_| beta, move |_| beta)
            .drift_magnitude(beta)
            .build()
            .unwrap();
        let p = ExpansionParams {
            r: 10.0,
            gamma: 1.0,
            xi: 1.0,
            ladder: vec![0.5, 1.0, 2.0],
            h: 0.01,
            replicas: 100,
        };
        let rep = exp_expansion(&m, &p, &Seed::new(1)).unwrap();
        for (k, &t) in p.ladder.iter().enumerate() {
            assert!((rep.inner_radius_median[k] - (10.0 + beta * t)).abs() < 1e-9);
        }
        assert!((rep.median_slope - beta).abs() < 1e-9);
        assert_eq!(rep.containment_frequency, vec![1.0; 3]);
    }

    #[test]
    fn slope_of_a_line() {
        assert!((least_squares_slope(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]) - 2.0).abs() < 1e-12);
    }
}
