use serde::{Deserialize, Serialize};

use crate::bounds::{chaining_bound, dyadic_weights};
use crate::error::{FlowError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingRow {
    pub steps: u32,
    pub u: f64,
    /// `P{max_k X_k - X_n >= u}` over all paths.
    pub lhs: f64,
    /// The chaining sum with `eps_j = 2^-j`.
    pub rhs: f64,
    pub terms: Vec<f64>,
    pub holds: bool,
}

fn walk(bits: u32, steps: u32) -> Vec<i32> {
    let mut x = vec![0; steps as usize + 1];
    for k in 0..steps as usize {
        x[k + 1] = x[k] + if bits >> k & 1 == 1 { 1 } else { -1 };
    }
    x
}

/// `max over s of P{X_s - X_{s+gap} >= v}` for the simple walk, by enumerating all paths.
pub fn walk_increment_tail(steps: u32, gap: u32, v: f64) -> f64 {
    let total = 1u64 << steps;
    (0..=steps - gap)
        .map(|s| {
            let hits = (0..total as u32)
                .filter(|&b| {
                    let x = walk(b, steps);
                    f64::from(x[s as usize] - x[(s + gap) as usize]) >= v
                })
                .count();
            hits as f64 / total as f64
        })
        .fold(0.0, f64::max)
}

/// Exhaustive check of the one-sided chaining bound for the simple random
/// walk on `0, 1, ..., steps`.
///
/// The walk is indexed by integers, so the dyadic levels stop at gap one:
/// `j` runs over `1..=log2(steps)`.
pub fn chaining_exact_check(steps: u32, u_grid: &[f64]) -> Result<Vec<ChainingRow>> {
    if !(2..=16).contains(&steps) || !steps.is_power_of_two() {
        return Err(FlowError::ConfigInvalid(format!("steps = {steps} must be a power of two in [2, 16]")));
    }
    let levels = steps.trailing_zeros() as usize;
    let weights = dyadic_weights(levels);
    let total = 1u64 << steps;
    let paths: Vec<Vec<i32>> = (0..total as u32).map(|b| walk(b, steps)).collect();
    u_grid
        .iter()
        .map(|&u| {
            let hits = paths
                .iter()
                .filter(|x| f64::from(x.iter().max().copied().unwrap_or(0) - x[steps as usize]) >= u)
                .count();
            let lhs = hits as f64 / total as f64;
            let cb = chaining_bound(
                |gap, v| walk_increment_tail(steps, gap.round() as u32, v),
                &weights,
                u,
                f64::from(steps),
                levels,
            )?;
            Ok(ChainingRow {
                steps,
                u,
                lhs,
                rhs: cb.bound.raw,
                terms: cb.terms,
                holds: lhs <= cb.bound.raw,
            })
        })
        .collect()
}

/// The quarter grid `0, 1/4, ..., steps`.
pub fn quarter_grid(steps: u32) -> Vec<f64> {
    (0..=4 * steps).map(|k| f64::from(k) / 4.0).collect()
}
