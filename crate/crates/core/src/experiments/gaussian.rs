use std::collections::BTreeMap;

use crate::bounds::{running_max_exact, running_max_tail};
use crate::error::Result;
use crate::noise::{NoiseSource, Seed};
use crate::report::BoundReport;

use super::{check_replicas, replicate, step_count};

/// Grid running maximum of one Brownian path against `exp(-c^2 / 2T)`, one
/// report per level `c`. All levels share the same paths.
pub fn gaussian_suite(levels: &[f64], t: f64, h: f64, n: u64, seed: &Seed) -> Result<Vec<BoundReport>> {
    check_replicas(n)?;
    let steps = step_count(t, h)? as u64;
    let maxima: Vec<f64> = replicate(n, seed.value, |s| {
        NoiseSource::new(s, 1, h)
            .and_then(|src| src.running_max_path(1, steps))
            .expect("valid noise parameters")
    });
    levels
        .iter()
        .map(|&c| {
            let bound = running_max_tail(c, t)?;
            let hits = maxima.iter().filter(|&&m| m >= c).count() as u64;
            let params = BTreeMap::from([("c".to_string(), c), ("T".to_string(), t)]);
            Ok(BoundReport::new("gaussian-running-max", "brownian", params, hits, n, 0, bound.raw, &seed.text, h)
                .with_exact(running_max_exact(c, t)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_is_always_hit_and_levels_are_ordered() {
        let r = gaussian_suite(&[0.0, 0.5, 1.0, 2.0], 1.0, 0.01, 4000, &Seed::new(3)).unwrap();
        assert_eq!(r[0].mc_estimate, 1.0);
        for w in r.windows(2) {
            assert!(w[1].mc_estimate <= w[0].mc_estimate);
        }
        assert!(r.iter().all(|x| x.pass));
    }
}
