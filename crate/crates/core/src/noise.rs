//! Counter-based Brownian increments.
//!
//! Every increment is a pure function of `(seed, driver, step)`, so a pullback
//! run over `[-t', 0]` sees exactly the increments of a run over `[-t, 0]` on
//! its last `t / h` steps, and replicas can be evaluated on any number of
//! workers without changing a single bit of the output.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FlowError, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream whose starting state is a hash of a `(key, stream, counter)` triple.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    #[inline]
    pub fn keyed(key: u64, stream: u64, counter: u64) -> Self {
        let a = mix64(key.wrapping_add(GOLDEN));
        let b = mix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(GOLDEN));
        let state = mix64(b ^ counter.wrapping_mul(0xA076_1D64_78BD_642F).wrapping_add(GOLDEN));
        CounterRng { state }
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Seed of replica `replica` under a run seed.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    mix64(mix64(seed ^ 0x5851_F42D_4C95_7F2D) ^ mix64(replica.wrapping_add(GOLDEN)))
}

/// A 64-bit seed that remembers how it was written, so reports can echo it verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub value: u64,
    pub text: String,
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed {
            value,
            text: value.to_string(),
        }
    }
}

impl FromStr for Seed {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let parsed = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            u64::from_str_radix(hex, 16)
        } else {
            t.parse::<u64>()
        };
        parsed
            .map(|value| Seed {
                value,
                text: t.to_string(),
            })
            .map_err(|_| FlowError::ConfigInvalid(format!("seed `{s}` is neither decimal nor 0x-hex")))
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Ok(Seed::new(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Two-sided source of Brownian increments for `driver_count` independent drivers.
///
/// Step `k` covers `[k h, (k + 1) h]` for every `k` in `i64`. A coarsened
/// source sums consecutive increments of its parent, which puts several step
/// sizes on one Brownian path.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    seed: u64,
    driver_count: usize,
    base_step: f64,
    substeps: u32,
}

impl NoiseSource {
    pub fn new(seed: u64, driver_count: usize, step_size: f64) -> Result<Self> {
        if driver_count == 0 {
            return Err(FlowError::ConfigInvalid("noise needs at least one driver".into()));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(FlowError::ConfigInvalid(format!("step size {step_size} must be positive")));
        }
        Ok(NoiseSource {
            seed,
            driver_count,
            base_step: step_size,
            substeps: 1,
        })
    }

    /// The same Brownian path observed on a grid `factor` times coarser.
    pub fn coarsened(&self, factor: u32) -> Self {
        assert!(factor >= 1, "coarsening factor must be >= 1");
        NoiseSource {
            substeps: self.substeps * factor,
            ..self.clone()
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn driver_count(&self) -> usize {
        self.driver_count
    }

    pub fn step_size(&self) -> f64 {
        self.base_step * self.substeps as f64
    }

    #[inline]
    fn base_increment(&self, driver0: usize, step: i64) -> f64 {
        let mut rng = CounterRng::keyed(self.seed, driver0 as u64, step as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        z * self.base_step.sqrt()
    }

    #[inline]
    fn increment0(&self, driver0: usize, step: i64) -> f64 {
        if self.substeps == 1 {
            return self.base_increment(driver0, step);
        }
        let f = self.substeps as i64;
        (0..f).map(|j| self.base_increment(driver0, step * f + j)).sum()
    }

    /// Increment of driver `driver` (1-based) over step `step`.
    pub fn increment(&self, driver: usize, step: i64) -> Result<f64> {
        if driver == 0 || driver > self.driver_count {
            return Err(FlowError::InvalidDriver {
                driver,
                count: self.driver_count,
            });
        }
        Ok(self.increment0(driver - 1, step))
    }

    /// Increments of the first `out.len()` drivers over one step.
    #[inline]
    pub fn fill_increments(&self, step: i64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.driver_count);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.increment0(i, step);
        }
    }

    /// Grid running maximum of the driver path over its first `steps` steps.
    /// `W_0 = 0` is part of the supremum, so the result is never negative.
    pub fn running_max_path(&self, driver: usize, steps: u64) -> Result<f64> {
        if driver == 0 || driver > self.driver_count {
            return Err(FlowError::InvalidDriver {
                driver,
                count: self.driver_count,
            });
        }
        let mut w = 0.0_f64;
        let mut max = 0.0_f64;
        for k in 0..steps as i64 {
            w += self.increment0(driver - 1, k);
            max = max.max(w);
        }
        Ok(max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_are_pure() {
        let src = NoiseSource::new(7, 3, 0.01).unwrap();
        for k in [-5_i64, 0, 12, i64::MIN / 4] {
            assert_eq!(src.increment(2, k).unwrap(), src.increment(2, k).unwrap());
        }
        let copy = NoiseSource::new(7, 3, 0.01).unwrap();
        assert_eq!(src.increment(3, -1).unwrap(), copy.increment(3, -1).unwrap());
    }

    #[test]
    fn driver_index_is_checked() {
        let src = NoiseSource::new(1, 2, 0.1).unwrap();
        assert!(matches!(src.increment(0, 0), Err(FlowError::InvalidDriver { .. })));
        assert!(matches!(src.increment(3, 0), Err(FlowError::InvalidDriver { .. })));
        assert!(src.increment(2, 0).is_ok());
    }

    #[test]
    fn coarsened_source_sums_the_fine_path() {
        let fine = NoiseSource::new(99, 2, 0.25e-3).unwrap();
        let coarse = fine.coarsened(4);
        assert!((coarse.step_size() - 1e-3).abs() < 1e-18);
        for k in -3..3_i64 {
            let sum: f64 = (0..4).map(|j| fine.increment(1, 4 * k + j).unwrap()).sum();
            assert_eq!(coarse.increment(1, k).unwrap(), sum);
        }
    }

    #[test]
    fn running_max_is_clamped_at_zero() {
        // Find a seed whose first increment is negative; a one-step path then peaks at W_0 = 0.
        let src = (0..100)
            .map(|s| NoiseSource::new(s, 1, 1e-3).unwrap())
            .find(|s| s.increment(1, 0).unwrap() < 0.0)
            .unwrap();
        assert_eq!(src.running_max_path(1, 1).unwrap(), 0.0);
    }

    #[test]
    fn seeds_parse_decimal_and_hex() {
        let s: Seed = "0x1F".parse().unwrap();
        assert_eq!(s.value, 31);
        assert_eq!(s.text, "0x1F");
        assert_eq!("42".parse::<Seed>().unwrap().value, 42);
        assert!("forty".parse::<Seed>().is_err());
        let json: Seed = serde_json::from_str("\"0xff\"").unwrap();
        assert_eq!(json.value, 255);
        assert_eq!(serde_json::to_string(&json).unwrap(), "\"0xff\"");
    }

    #[test]
    fn replica_seeds_differ() {
        let a: Vec<u64> = (0..1000).map(|k| replica_seed(5, k)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}
