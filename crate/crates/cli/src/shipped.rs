//! Configurations shipped with the tool, one per regression fixture.

use flowlab_core::{ExperimentConfig, Result};

pub const GAUSSIAN: &str = include_str!("../../../configs/gaussian.json");
pub const ESCAPE: &str = include_str!("../../../configs/escape.json");
pub const RETURN: &str = include_str!("../../../configs/return.json");
pub const DIP: &str = include_str!("../../../configs/dip.json");
pub const DIP_NEAR: &str = include_str!("../../../configs/dip_near.json");
pub const TWO_POINT: &str = include_str!("../../../configs/two_point.json");
pub const DIAMETER_MULT: &str = include_str!("../../../configs/diameter_mult.json");
pub const DIAMETER_RADIAL: &str = include_str!("../../../configs/diameter_radial.json");
pub const ATTRACTION: &str = include_str!("../../../configs/attraction.json");
pub const EXPANSION: &str = include_str!("../../../configs/expansion.json");

pub fn suite(name: &str) -> Result<Vec<ExperimentConfig>> {
    let texts: &[&str] = match name {
        "gaussian" => &[GAUSSIAN],
        "one-point" => &[ESCAPE, RETURN, DIP, DIP_NEAR],
        "two-point" => &[TWO_POINT],
        "diameter" => &[DIAMETER_MULT, DIAMETER_RADIAL],
        "chaining" => &[],
        "all" => &[GAUSSIAN, ESCAPE, RETURN, DIP, DIP_NEAR, TWO_POINT, DIAMETER_MULT, DIAMETER_RADIAL],
        other => {
            return Err(flowlab_core::FlowError::ConfigInvalid(format!("unknown suite `{other}`")));
        }
    };
    texts.iter().map(|t| ExperimentConfig::from_json(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_shipped_config_loads() {
        for t in [GAUSSIAN, ESCAPE, RETURN, DIP, DIP_NEAR, TWO_POINT, DIAMETER_MULT, DIAMETER_RADIAL, ATTRACTION, EXPANSION] {
            ExperimentConfig::from_json(t).unwrap();
        }
        assert_eq!(suite("all").unwrap().len(), 8);
        assert!(suite("nope").is_err());
    }
}
