//! Closed-form tail bounds for flows and Brownian functionals.
//!
//! Each bound is returned raw and capped at one; the raw value may exceed one,
//! in which case the bound is vacuous and reported as such.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::model::{beta0, gamma0, CertifiedConstants};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub name: String,
    pub raw: f64,
    pub capped: f64,
    pub inputs: BTreeMap<String, f64>,
}

impl TailBound {
    pub fn new(name: &str, raw: f64, inputs: &[(&str, f64)]) -> Self {
        let raw = if raw.is_nan() { f64::INFINITY } else { raw.max(0.0) };
        TailBound {
            name: name.to_string(),
            raw,
            capped: raw.min(1.0),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[inline]
fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(FlowError::HypothesisViolation(msg()))
    }
}

/// `P{W_t >= c} <= exp(-c^2 / 2t) / 2`.
pub fn gaussian_tail(c: f64, t: f64) -> Result<TailBound> {
    require(c >= 0.0 && t > 0.0, || format!("need c >= 0, t > 0 (c = {c}, t = {t})"))?;
    Ok(TailBound::new("gaussian_tail", 0.5 * (-c * c / (2.0 * t)).exp(), &[("c", c), ("t", t)]))
}

/// `P{sup_{s<=t} W_s >= c} <= exp(-c^2 / 2t)`.
pub fn running_max_tail(c: f64, t: f64) -> Result<TailBound> {
    require(c >= 0.0 && t > 0.0, || format!("need c >= 0, t > 0 (c = {c}, t = {t})"))?;
    Ok(TailBound::new("running_max_tail", (-c * c / (2.0 * t)).exp(), &[("c", c), ("t", t)]))
}

/// Reflection principle: `P{sup_{s<=t} W_s >= c} = 2 (1 - Phi(c / sqrt t))`.
pub fn running_max_exact(c: f64, t: f64) -> f64 {
    if c <= 0.0 {
        1.0
    } else {
        2.0 * (1.0 - normal_cdf(c / t.sqrt()))
    }
}

/// `P{sup_{s<=t} (vol W_s + drift s) >= level}` for a drifted Brownian motion.
pub fn drifted_running_max_exact(level: f64, drift: f64, vol: f64, t: f64) -> f64 {
    if level <= 0.0 {
        return 1.0;
    }
    let b = level / vol;
    let nu = drift / vol;
    let st = t.sqrt();
    let first = 1.0 - normal_cdf((b - nu * t) / st);
    let phi = normal_cdf((-b - nu * t) / st);
    let second = if phi > 0.0 { (2.0 * nu * b + phi.ln()).exp() } else { 0.0 };
    (first + second).clamp(0.0, 1.0)
}

fn check_one_point(r: f64, s: f64, r_bar: f64, t: f64) -> Result<()> {
    require(1.0 <= r_bar && r_bar < r && s > r_bar && t > 0.0, || {
        format!("need 1 <= R_bar < R, S > R_bar, T > 0 (R = {r}, S = {s}, R_bar = {r_bar}, T = {t})")
    })
}

fn escape_argument(r: f64, s: f64, t: f64, sigma_b: f64, beta: f64) -> f64 {
    let st = t.sqrt();
    positive_part(-(r - s) / (sigma_b * st) - beta * st / sigma_b)
}

fn return_argument(r: f64, s: f64, t: f64, sigma_b: f64, beta: f64) -> f64 {
    let st = t.sqrt();
    positive_part(beta * st / sigma_b - (r - s) / (sigma_b * st))
}

/// Bound on `P{|phi_T(x)| >= S, inf_t |phi_t(x)| >= R_bar}` for `|x| = R`.
pub fn escape_upper(r: f64, s: f64, r_bar: f64, t: f64, sigma_b: f64, beta_star_up: f64) -> Result<TailBound> {
    check_one_point(r, s, r_bar, t)?;
    let arg = escape_argument(r, s, t, sigma_b, beta_star_up);
    Ok(TailBound::new(
        "escape_upper",
        (-0.5 * arg * arg).exp(),
        &[("R", r), ("S", s), ("R_bar", r_bar), ("T", t), ("sigma_B", sigma_b), ("beta_star", beta_star_up)],
    ))
}

/// Bound on `P{|phi_T(x)| <= R, inf_t |phi_t(x)| >= R_bar}` for `|x| = S`.
pub fn return_upper(r: f64, s: f64, r_bar: f64, t: f64, sigma_b: f64, beta_star_lo: f64) -> Result<TailBound> {
    check_one_point(r, s, r_bar, t)?;
    let arg = return_argument(r, s, t, sigma_b, beta_star_lo);
    Ok(TailBound::new(
        "return_upper",
        (-0.5 * arg * arg).exp(),
        &[("R", r), ("S", s), ("R_bar", r_bar), ("T", t), ("sigma_B", sigma_b), ("beta_star_lower", beta_star_lo)],
    ))
}

/// Bound on `P{inf_t |phi_t(x)| <= R_bar}` for `|x| = S` under outward drift.
pub fn dip_bound(s: f64, r_bar: f64, sigma_b: f64, beta_star_lo: f64) -> Result<TailBound> {
    require(1.0 <= r_bar && r_bar < s, || format!("need 1 <= R_bar < S (S = {s}, R_bar = {r_bar})"))?;
    let raw = if beta_star_lo <= 0.0 {
        1.0
    } else {
        (-2.0 * (s - r_bar) * beta_star_lo / (sigma_b * sigma_b)).exp()
    };
    Ok(TailBound::new(
        "dip_bound",
        raw,
        &[("S", s), ("R_bar", r_bar), ("sigma_B", sigma_b), ("beta_star_lower", beta_star_lo)],
    ))
}

/// Bound on `P{|phi_T(x)| >= S, inf_t |phi_t(x)| <= R}` when the drift points inward beyond `R`.
pub fn crossing_bound(r: f64, s: f64, t: f64, sigma_b: f64) -> Result<TailBound> {
    require(s >= r && t > 0.0, || format!("need S >= R, T > 0 (R = {r}, S = {s}, T = {t})"))?;
    let z = (s - r) / sigma_b;
    Ok(TailBound::new(
        "crossing_bound",
        2.0 * (-z * z / (8.0 * t)).exp(),
        &[("R", r), ("S", s), ("T", t), ("sigma_B", sigma_b)],
    ))
}

/// Bound on `P{sup_{s<=h} |phi_s(x)| >= R_bar + delta}` for `|x| = R_bar`.
pub fn excursion_bound(delta: f64, h: f64, sigma_b: f64) -> Result<TailBound> {
    require(delta > 0.0 && h > 0.0, || format!("need delta > 0, h > 0 (delta = {delta}, h = {h})"))?;
    Ok(TailBound::new(
        "excursion_bound",
        3.0 * (-delta * delta / (8.0 * sigma_b * sigma_b * h)).exp(),
        &[("delta", delta), ("h", h), ("sigma_B", sigma_b)],
    ))
}

/// Two-point tail of `sup_{t<=T} |phi_t(x) - phi_t(y)| >= u`.
///
/// `log |phi_t(x) - phi_t(y)|` is dominated by `log |x - y| + sigma_L W*_t + lambda t`,
/// so the event forces `W*_T >= c` with `c = (log(u / |x - y|) - lambda T) / sigma_L`.
/// Returns the exact reflection-principle probability of that event and the
/// exponential bound on it.
pub fn two_point_tail(separation: f64, u: f64, t: f64, sigma_l: f64, lambda: f64) -> Result<(f64, TailBound)> {
    require(separation >= 0.0 && u > 0.0 && t > 0.0, || {
        format!("need separation >= 0, u > 0, T > 0 (separation = {separation}, u = {u}, T = {t})")
    })?;
    let inputs = [("separation", separation), ("u", u), ("T", t), ("sigma_L", sigma_l), ("lambda", lambda)];
    if separation == 0.0 {
        return Ok((0.0, TailBound::new("two_point_tail", 0.0, &inputs)));
    }
    let c = ((u / separation).ln() - lambda * t) / sigma_l;
    if c <= 0.0 {
        return Ok((1.0, TailBound::new("two_point_tail", 1.0, &inputs)));
    }
    let exact = running_max_exact(c, t);
    let bound = running_max_tail(c, t)?.raw;
    Ok((exact, TailBound::new("two_point_tail", bound, &inputs)))
}

/// Natural log of the quantitative Kolmogorov bound and of its moment factor `E(S^a)`.
fn kolmogorov_log(a: f64, b: f64, c_ln: f64, kappa: f64, d: usize, u: f64) -> Result<(f64, f64)> {
    let upper = b / a;
    if !(kappa > 0.0 && kappa < upper) {
        return Err(FlowError::KappaOutOfRange { kappa, upper });
    }
    let df = d as f64;
    let e = a * kappa - b;
    let denom = 1.0 - e.exp2();
    let moment_ln = if denom > 0.0 {
        c_ln + df.ln() + e * std::f64::consts::LN_2 - denom.ln()
    } else {
        f64::INFINITY
    };
    let chain_ln = a * (2.0 * df / (1.0 - (-kappa).exp2())).ln();
    Ok((chain_ln + moment_ln - a * u.ln(), moment_ln))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovBound {
    pub bound: TailBound,
    /// The moment bound on `E(S^a)`.
    pub moment: f64,
}

/// Quantitative Kolmogorov continuity bound on `P{sup rho(Z_x, Z_y) >= u}` over `[0,1]^d`.
///
/// A pole of the constant (`2^(a kappa - b)` rounding to one) is reported as `raw = +inf`.
pub fn kolmogorov_tail(a: f64, b: f64, c: f64, kappa: f64, d: usize, u: f64) -> Result<KolmogorovBound> {
    require(a >= 1.0 && b > 0.0 && c > 0.0 && u > 0.0, || {
        format!("need a >= 1, b > 0, c > 0, u > 0 (a = {a}, b = {b}, c = {c}, u = {u})")
    })?;
    let (log_raw, moment_ln) = kolmogorov_log(a, b, c.ln(), kappa, d, u)?;
    Ok(KolmogorovBound {
        bound: TailBound::new(
            "kolmogorov_tail",
            log_raw.exp(),
            &[("a", a), ("b", b), ("c", c), ("kappa", kappa), ("d", d as f64), ("u", u)],
        ),
        moment: moment_ln.exp(),
    })
}

/// Parameters of the small-cube diameter bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallParams {
    /// Cube side.
    pub xi: f64,
    pub t: f64,
    pub u: f64,
    pub c_bar: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub d: usize,
}

/// Log of the moment constant `c = c_bar^q exp((Lambda + q sigma^2 / 2) q T) xi^q`.
fn ball_c_ln(p: &BallParams, q: f64) -> f64 {
    q * p.c_bar.ln() + (p.lambda + 0.5 * q * p.sigma * p.sigma) * q * p.t + q * p.xi.ln()
}

/// Natural log of [`ball_diameter_bound`]'s raw value.
pub fn ball_diameter_log_bound(p: &BallParams, q: f64, kappa: f64) -> Result<f64> {
    let df = p.d as f64;
    if q <= df {
        return Err(FlowError::QTooSmall { q, d: p.d });
    }
    if p.xi <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(kolmogorov_log(q, q - df, ball_c_ln(p, q), kappa, p.d, p.u)?.0)
}

/// Bound on the probability that a cube of side `xi` reaches diameter `u` before `T`.
pub fn ball_diameter_bound(p: &BallParams, q: f64, kappa: f64) -> Result<TailBound> {
    let log_raw = ball_diameter_log_bound(p, q, kappa)?;
    Ok(TailBound::new(
        "ball_diameter_bound",
        log_raw.exp(),
        &[
            ("xi", p.xi),
            ("T", p.t),
            ("u", p.u),
            ("q", q),
            ("kappa", kappa),
            ("c_bar", p.c_bar),
            ("Lambda", p.lambda),
            ("sigma", p.sigma),
            ("d", p.d as f64),
        ],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedBall {
    pub bound: TailBound,
    pub log_raw: f64,
    pub q: f64,
    pub kappa: f64,
}

/// Candidate exponents: 200 log-spaced values of `q - d` in `[0.02, 50]`, plus `q = d + 1`.
fn q_grid(d: usize) -> Vec<f64> {
    let (lo, hi) = (0.02_f64.ln(), 50.0_f64.ln());
    let mut g: Vec<f64> = (0..200)
        .map(|k| d as f64 + (lo + (hi - lo) * k as f64 / 199.0).exp())
        .collect();
    g.push(d as f64 + 1.0);
    g
}

/// [`ball_diameter_bound`] minimized over a grid of `(q, kappa)`; kappa runs over
/// `(1 - d/q) k / 50` for `k = 1..49`.
pub fn ball_diameter_bound_opt(p: &BallParams) -> OptimizedBall {
    let df = p.d as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for q in q_grid(p.d) {
        let width = 1.0 - df / q;
        for k in 1..50 {
            let kappa = width * k as f64 / 50.0;
            if let Ok(v) = ball_diameter_log_bound(p, q, kappa) {
                if best.is_none_or(|(b, _, _)| v < b) {
                    best = Some((v, q, kappa));
                }
            }
        }
    }
    let (log_raw, q, kappa) = best.expect("grid is nonempty");
    let mut bound = ball_diameter_bound(p, q, kappa).expect("grid point is admissible");
    bound.name = "ball_diameter_bound_opt".into();
    OptimizedBall {
        bound,
        log_raw,
        q,
        kappa,
    }
}

/// Exponential decay rate of the probability that a cube of side `exp(-gamma T)`
/// reaches unit diameter. With `one_to_one`, `d` is replaced by `d - 1`.
pub fn rate_i(gamma: f64, lambda: f64, sigma: f64, d: usize, one_to_one: bool) -> f64 {
    let d = if one_to_one { d.saturating_sub(1) } else { d } as f64;
    let s2 = sigma * sigma;
    if gamma >= lambda + s2 * d {
        (gamma - lambda).powi(2) / (2.0 * s2)
    } else if gamma >= lambda + 0.5 * s2 * d {
        d * (gamma - lambda - 0.5 * s2 * d)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingBound {
    pub bound: TailBound,
    /// Set when the last summed term exceeds `1e-12`.
    pub truncated: bool,
    pub terms: Vec<f64>,
}

/// One-sided chaining bound
/// `P{sup_t X_t - X_T >= u} <= sum_j 2^(j-1) tail(2^-j T, eps_j u)`, truncated at `j_max`.
///
/// `increment_tail(gap, v)` must bound `P{X_s - X_t >= v}` over pairs with `t - s = gap`.
pub fn chaining_bound<F>(increment_tail: F, epsilons: &[f64], u: f64, t: f64, j_max: usize) -> Result<ChainingBound>
where
    F: Fn(f64, f64) -> f64,
{
    if epsilons.len() < j_max {
        return Err(FlowError::ConfigInvalid(format!(
            "{} weights supplied for j_max = {j_max}",
            epsilons.len()
        )));
    }
    if epsilons[..j_max].iter().any(|&e| !(e > 0.0)) {
        return Err(FlowError::ConfigInvalid("chaining weights must be positive".into()));
    }
    let total: f64 = epsilons[..j_max].iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(FlowError::WeightViolation(total));
    }
    let terms: Vec<f64> = (1..=j_max)
        .map(|j| {
            let gap = t * (-(j as f64)).exp2();
            ((j - 1) as f64).exp2() * increment_tail(gap, epsilons[j - 1] * u)
        })
        .collect();
    let truncated = terms.last().is_some_and(|&v| v > 1e-12);
    Ok(ChainingBound {
        bound: TailBound::new("chaining_bound", terms.iter().sum(), &[("u", u), ("T", t), ("j_max", j_max as f64)]),
        truncated,
        terms,
    })
}

/// Dyadic weights `eps_j = 2^-j`.
pub fn dyadic_weights(j_max: usize) -> Vec<f64> {
    (1..=j_max).map(|j| (-(j as f64)).exp2()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub gamma_cover: f64,
    pub gamma0: f64,
    pub beta0: f64,
    /// `(d-1) G - (beta - gamma)^2 / (2 sigma_B^2)`
    pub rate_a1: f64,
    /// `(d-1) G - (beta0 + eps)^2 / (2 sigma_B^2)`, which dominates `rate_a1`.
    pub rate_a1_margin: f64,
    /// `(d-1) G - (G - lambda)^2 / (2 sigma_L^2)`
    pub rate_a3: f64,
    /// The dip term decays faster than any exponential of the time scale.
    pub rate_a2: String,
    pub feasible: bool,
}

/// Searches a covering exponent `G` in `(Gamma0, Gamma0 + 10]` (1000 points) making
/// every exponential rate of the expansion estimate strictly negative.
pub fn rate_certificate(
    beta: f64,
    gamma: f64,
    epsilon: f64,
    constants: &CertifiedConstants,
    d: usize,
) -> Result<RateCertificate> {
    let b0 = beta0(constants, d);
    let g0 = gamma0(constants, d);
    require(epsilon > 0.0 && epsilon < 0.5 && gamma > 0.0, || {
        format!("need 0 < epsilon < 1/2, gamma > 0 (epsilon = {epsilon}, gamma = {gamma})")
    })?;
    require(gamma + epsilon < beta - b0, || {
        format!("gamma + epsilon = {} must be below beta - beta0 = {}", gamma + epsilon, beta - b0)
    })?;
    let k = (d - 1) as f64;
    let CertifiedConstants {
        lambda,
        sigma_l,
        sigma_b,
    } = *constants;
    let rates = |g: f64| {
        (
            k * g - (beta - gamma).powi(2) / (2.0 * sigma_b * sigma_b),
            k * g - (b0 + epsilon).powi(2) / (2.0 * sigma_b * sigma_b),
            k * g - (g - lambda).powi(2) / (2.0 * sigma_l * sigma_l),
        )
    };
    let side = |g: f64| {
        if d >= 2 {
            g >= lambda + sigma_l * sigma_l * d as f64
        } else {
            g >= lambda
        }
    };
    let found = (1..=1000).map(|i| g0 + 10.0 * i as f64 / 1000.0).find(|&g| {
        let (a1, a1m, a3) = rates(g);
        side(g) && a1 < 0.0 && a1m < 0.0 && a3 < 0.0
    });
    let g = found.unwrap_or(g0 + 10.0 / 1000.0);
    let (rate_a1, rate_a1_margin, rate_a3) = rates(g);
    Ok(RateCertificate {
        gamma_cover: g,
        gamma0: g0,
        beta0: b0,
        rate_a1,
        rate_a1_margin,
        rate_a3,
        rate_a2: "neg-infinity".into(),
        feasible: found.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// `(S_i, T_i)` with `S_{i+1} = S_i + gamma S_i^alpha` and `T_i = S_i^alpha`.
    pub pairs: Vec<(f64, f64)>,
    /// Partial sums of `exp(-c T_i)`.
    pub partial_sums: Vec<f64>,
}

/// Radius schedule along which the expansion events are summable.
pub fn borel_cantelli_schedule(s0: f64, gamma: f64, alpha: f64, n: usize, c: f64) -> Result<Schedule> {
    require(s0 >= 2.0 && gamma > 0.0 && alpha > 0.0 && alpha < 1.0, || {
        format!("need S0 >= 2, gamma > 0, alpha in (0,1) (S0 = {s0}, gamma = {gamma}, alpha = {alpha})")
    })?;
    let mut pairs = Vec::with_capacity(n);
    let mut partial_sums = Vec::with_capacity(n);
    let mut s = s0;
    let mut acc = 0.0;
    for _ in 0..n {
        let t = s.powf(alpha);
        pairs.push((s, t));
        acc += (-c * t).exp();
        partial_sums.push(acc);
        s += gamma * t;
    }
    Ok(Schedule { pairs, partial_sums })
}
