//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::model::ModelSpec;
use crate::noise::Seed;

/// A scalar or a list, for fields that accept ladders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> f64 {
        match self {
            OneOrMany::One(v) => *v,
            OneOrMany::Many(v) => v.first().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Free geometric parameters. Which ones are required depends on the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Radii {
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r_big: Option<f64>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "R_bar", default, skip_serializing_if = "Option::is_none")]
    pub r_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gaussian,
    Escape,
    Return,
    Dip,
    TwoPoint,
    Diameter,
    Attraction,
    Expansion,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gaussian => "gaussian",
            ExperimentKind::Escape => "escape",
            ExperimentKind::Return => "return",
            ExperimentKind::Dip => "dip",
            ExperimentKind::TwoPoint => "two-point",
            ExperimentKind::Diameter => "diameter",
            ExperimentKind::Attraction => "attraction",
            ExperimentKind::Expansion => "expansion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub radii: Radii,
    /// Horizon `T`, or a ladder of horizons.
    pub horizon: OneOrMany,
    /// Step size, or several step sizes on one Brownian path.
    pub step: OneOrMany,
    pub replicas: u64,
    pub seed: Seed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn need(v: Option<f64>, name: &str, kind: ExperimentKind) -> Result<f64> {
    v.ok_or_else(|| FlowError::ConfigInvalid(format!("{} needs radii.{name}", kind.name())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| FlowError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn steps(&self) -> Vec<f64> {
        self.step.values()
    }

    pub fn horizons(&self) -> Vec<f64> {
        self.horizon.values()
    }

    /// Checks that the parameters fit the hypotheses of the targeted bound.
    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        let bad = |m: String| Err(FlowError::ConfigInvalid(m));
        if self.replicas < 100 {
            return bad(format!("replicas = {} is below the minimum of 100", self.replicas));
        }
        let steps = self.steps();
        if steps.is_empty() || steps.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("every step size must be positive".into());
        }
        let horizons = self.horizons();
        if horizons.is_empty() || horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("every horizon must be positive".into());
        }
        let fine = steps.iter().copied().fold(f64::INFINITY, f64::min);
        for h in &steps {
            let ratio = h / fine;
            if (ratio - ratio.round()).abs() > 1e-9 {
                return bad(format!("step {h} is not a multiple of the finest step {fine}"));
            }
        }
        let r = &self.radii;
        match kind {
            ExperimentKind::Gaussian => {
                if r.levels.as_ref().is_none_or(|l| l.is_empty() || l.iter().any(|c| *c < 0.0)) {
                    return bad("gaussian needs nonnegative radii.levels".into());
                }
            }
            ExperimentKind::Escape | ExperimentKind::Return => {
                let (big, s, rb) = (need(r.r_big, "R", kind)?, need(r.s, "S", kind)?, need(r.r_bar, "R_bar", kind)?);
                if !(1.0 <= rb && rb < big && s > rb) {
                    return bad(format!("need 1 <= R_bar < R and S > R_bar (R = {big}, S = {s}, R_bar = {rb})"));
                }
            }
            ExperimentKind::Dip => {
                let (s, rb) = (need(r.s, "S", kind)?, need(r.r_bar, "R_bar", kind)?);
                if !(1.0 <= rb && rb < s) {
                    return bad(format!("need 1 <= R_bar < S (S = {s}, R_bar = {rb})"));
                }
            }
            ExperimentKind::TwoPoint => {
                let sep = need(r.separation, "separation", kind)?;
                let u = need(r.u, "u", kind)?;
                if sep < 0.0 || u <= 0.0 {
                    return bad("need separation >= 0 and u > 0".into());
                }
            }
            ExperimentKind::Diameter => {
                let xi = need(r.xi, "xi", kind)?;
                let u = need(r.u, "u", kind)?;
                if xi < 0.0 || u <= 0.0 || r.grid == Some(0) {
                    return bad("need xi >= 0, u > 0 and grid >= 1".into());
                }
            }
            ExperimentKind::Attraction => {
                for (v, n) in [(r.r, "r"), (r.r0, "r0"), (r.gamma, "gamma"), (r.xi, "xi")] {
                    if need(v, n, kind)? <= 0.0 {
                        return bad(format!("radii.{n} must be positive"));
                    }
                }
            }
            ExperimentKind::Expansion => {
                for (v, n) in [(r.r, "r"), (r.gamma, "gamma"), (r.xi, "xi")] {
                    if need(v, n, kind)? <= 0.0 {
                        return bad(format!("radii.{n} must be positive"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ESCAPE: &str = r#"{
        "model": {"id": "radial2d-in", "beta": 3},
        "experiment": "escape",
        "radii": {"R": 10, "S": 20, "R_bar": 5},
        "horizon": 1, "step": 0.001, "replicas": 1000, "seed": "0x2a"
    }"#;

    #[test]
    fn parses_and_echoes() {
        let c = ExperimentConfig::from_json(ESCAPE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Escape);
        assert_eq!(c.seed.value, 42);
        assert_eq!(c.radii.r_big, Some(10.0));
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = ESCAPE.replace("\"R_bar\"", "\"Rbar\"");
        assert!(matches!(ExperimentConfig::from_json(&typo), Err(FlowError::ConfigInvalid(_))));
        let extra = ESCAPE.replace("\"replicas\"", "\"color\": 1, \"replicas\"");
        assert!(ExperimentConfig::from_json(&extra).is_err());
    }

    #[test]
    fn hypotheses_are_checked_at_load() {
        let bad = ESCAPE.replace("\"R_bar\": 5", "\"R_bar\": 0.5");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = ESCAPE.replace("\"R\": 10", "\"R\": 4");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let few = ESCAPE.replace("1000", "10");
        assert!(ExperimentConfig::from_json(&few).is_err());
        let ladder = ESCAPE.replace("\"step\": 0.001", "\"step\": [0.001, 0.0003]");
        assert!(ExperimentConfig::from_json(&ladder).is_err());
        let ladder = ESCAPE.replace("\"step\": 0.001", "\"step\": [0.001, 0.00025]");
        assert_eq!(ExperimentConfig::from_json(&ladder).unwrap().steps(), vec![0.001, 0.00025]);
    }
}
