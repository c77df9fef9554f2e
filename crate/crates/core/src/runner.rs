//! Runs an [`ExperimentConfig`] end to end.

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{FlowError, Result};
use crate::experiments::{
    exp_attraction, exp_diameter, exp_dip, exp_expansion, exp_one_point, exp_two_point, gaussian_suite,
    AttractionParams, AttractionReport, DiameterParams, DipParams, ExpansionParams, ExpansionReport, Grid,
    OnePointParams, OnePointVariant, TwoPointParams,
};
use crate::model::FlowModel;
use crate::report::BoundReport;

/// A derived pass/fail check that is not a single bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub experiment: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attraction: Option<AttractionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionReport>,
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
            && self.checks.iter().all(|c| c.pass)
            && self.attraction.as_ref().is_none_or(|a| a.pass)
            && self.expansion.as_ref().is_none_or(|e| e.pass)
    }
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| FlowError::ConfigInvalid(format!("radii.{name} is required")))
}

fn axis_point(d: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; d];
    p[0] = x;
    p
}

/// Pooled-standard-error agreement of two estimates.
pub fn agreement_check(name: &str, a: &BoundReport, b: &BoundReport) -> Check {
    let pooled = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let diff = (a.mc_estimate - b.mc_estimate).abs();
    Check {
        name: name.to_string(),
        value: diff,
        threshold: 3.0 * pooled,
        pass: diff < 3.0 * pooled,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let steps = cfg.steps();
    let fine = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let t = cfg.horizon.first();
    let n = cfg.replicas;
    let r = &cfg.radii;
    let seed = &cfg.seed;
    let mut out = RunOutput {
        experiment: cfg.experiment.name().to_string(),
        config: cfg.clone(),
        bounds: Vec::new(),
        checks: Vec::new(),
        attraction: None,
        expansion: None,
    };
    if cfg.experiment == ExperimentKind::Gaussian {
        let levels = r.levels.clone().unwrap_or_default();
        for &h in &steps {
            out.bounds.extend(gaussian_suite(&levels, t, h, n, seed)?);
        }
        return Ok(out);
    }
    let model: FlowModel = cfg.model.build()?;
    let d = model.dimension();
    match cfg.experiment {
        ExperimentKind::Gaussian => unreachable!("handled above"),
        ExperimentKind::Escape | ExperimentKind::Return => {
            let variant = if cfg.experiment == ExperimentKind::Escape {
                OnePointVariant::Escape
            } else {
                OnePointVariant::Return
            };
            for &h in &steps {
                let p = OnePointParams {
                    r: need(r.r_big, "R")?,
                    s: need(r.s, "S")?,
                    r_bar: need(r.r_bar, "R_bar")?,
                    t,
                    grid: Grid::coupled(h, fine),
                    replicas: n,
                };
                out.bounds.push(exp_one_point(&model, variant, &p, seed)?);
            }
        }
        ExperimentKind::Dip => {
            for &h in &steps {
                let p = DipParams {
                    s: need(r.s, "S")?,
                    r_bar: need(r.r_bar, "R_bar")?,
                    t_trunc: t,
                    grid: Grid::coupled(h, fine),
                    replicas: n,
                };
                out.bounds.push(exp_dip(&model, &p, seed)?);
            }
        }
        ExperimentKind::TwoPoint => {
            for &h in &steps {
                let p = TwoPointParams {
                    base: r.corner.clone().unwrap_or_else(|| axis_point(d, 1.0)),
                    separation: need(r.separation, "separation")?,
                    u: need(r.u, "u")?,
                    t,
                    grid: Grid::coupled(h, fine),
                    replicas: n,
                };
                out.bounds.push(exp_two_point(&model, &p, seed)?);
            }
            if out.bounds.len() >= 2 {
                let c = agreement_check("step-size-agreement", &out.bounds[0], &out.bounds[1]);
                out.checks.push(c);
            }
        }
        ExperimentKind::Diameter => {
            let mut per_step = Vec::new();
            for &h in &steps {
                let p = DiameterParams {
                    corner: r.corner.clone().unwrap_or_else(|| axis_point(d, 1.0)),
                    xi: need(r.xi, "xi")?,
                    points_per_side: r.grid.unwrap_or(8),
                    u: need(r.u, "u")?,
                    t,
                    grid: Grid::coupled(h, fine),
                    replicas: n,
                };
                let reps = exp_diameter(&model, &p, seed)?;
                out.checks.push(Check {
                    name: "threshold-nesting".into(),
                    value: reps[1].mc_estimate - reps[0].mc_estimate,
                    threshold: 0.0,
                    pass: reps[1].mc_estimate <= reps[0].mc_estimate,
                });
                per_step.push(reps[0].clone());
                out.bounds.extend(reps);
            }
            if per_step.len() >= 2 {
                out.checks.push(agreement_check("step-size-agreement", &per_step[0], &per_step[1]));
            }
        }
        ExperimentKind::Attraction => {
            let p = AttractionParams {
                r: need(r.r, "r")?,
                r0: need(r.r0, "r0")?,
                gamma: need(r.gamma, "gamma")?,
                xi: need(r.xi, "xi")?,
                base_time: t,
                h: steps[0],
                replicas: n,
            };
            out.attraction = Some(exp_attraction(&model, &p, seed)?);
        }
        ExperimentKind::Expansion => {
            let p = ExpansionParams {
                r: need(r.r, "r")?,
                gamma: need(r.gamma, "gamma")?,
                xi: need(r.xi, "xi")?,
                ladder: cfg.horizons(),
                h: steps[0],
                replicas: n,
            };
            out.expansion = Some(exp_expansion(&model, &p, seed)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn gaussian_runs_without_a_model() {
        let c = cfg(r#"{"model":{"id":"brownian"},"experiment":"gaussian","radii":{"levels":[1.0]},
            "horizon":1.0,"step":0.01,"replicas":2000,"seed":3}"#);
        let out = run(&c).unwrap();
        assert_eq!(out.bounds.len(), 1);
        assert!(out.bounds[0].exact.is_some());
        assert!(out.pass());
    }

    #[test]
    fn two_steps_add_an_agreement_check() {
        let c = cfg(r#"{"model":{"id":"mult1d","lambda":0.0,"sigma":1.0},"experiment":"two-point",
            "radii":{"separation":1.0,"u":2.718281828459045},"horizon":1.0,"step":[0.01,0.005],
            "replicas":400,"seed":5}"#);
        let out = run(&c).unwrap();
        assert_eq!(out.bounds.len(), 2);
        assert_eq!(out.checks.len(), 1);
        assert_eq!(out.checks[0].name, "step-size-agreement");
    }

    #[test]
    fn missing_radius_is_a_config_error() {
        let mut c = cfg(r#"{"model":{"id":"mult1d","lambda":0.0,"sigma":1.0},"experiment":"two-point",
            "radii":{"separation":1.0,"u":2.0},"horizon":1.0,"step":0.01,"replicas":100,"seed":5}"#);
        c.radii.u = None;
        assert!(matches!(run(&c), Err(FlowError::ConfigInvalid(_))));
    }

    #[test]
    fn agreement_uses_three_pooled_errors() {
        let mut a = BoundReport::new("x", "m", Default::default(), 50, 100, 0, 1.0, "1", 0.1);
        let mut b = a.clone();
        a.mc_estimate = 0.5;
        a.std_error = 0.03;
        b.mc_estimate = 0.64;
        b.std_error = 0.04;
        let c = agreement_check("k", &a, &b);
        assert!((c.threshold - 0.15).abs() < 1e-12);
        assert!(c.pass);
        b.mc_estimate = 0.66;
        assert!(!agreement_check("k", &a, &b).pass);
    }
}
