//! Flow models: drift, Brownian vector fields and their certified constants.
//!
//! A model is `dX = b(X) dt + sum_i V_i(X) dW_i`. The Lipschitz and
//! boundedness constants are supplied by whoever writes the model and are
//! only spot-checked here (see [`check_a1_numeric`]); sampling cannot certify
//! a supremum.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::noise::CounterRng;

pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-sided Lipschitz rate `lambda`, two-point diffusion rate `sigma_l` and diffusion bound `sigma_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub lambda: f64,
    pub sigma_l: f64,
    pub sigma_b: f64,
}

impl CertifiedConstants {
    pub fn new(lambda: f64, sigma_l: f64, sigma_b: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(FlowError::InvalidConstants(format!("lambda = {lambda} must be >= 0")));
        }
        if !(sigma_l > 0.0 && sigma_l.is_finite()) {
            return Err(FlowError::InvalidConstants(format!("sigma_L = {sigma_l} must be > 0")));
        }
        if !(sigma_b > 0.0 && sigma_b.is_finite()) {
            return Err(FlowError::InvalidConstants(format!("sigma_B = {sigma_b} must be > 0")));
        }
        Ok(CertifiedConstants {
            lambda,
            sigma_l,
            sigma_b,
        })
    }
}

/// Critical radial drift magnitude separating attraction from expansion.
pub fn beta0(c: &CertifiedConstants, d: usize) -> f64 {
    assert!(d >= 1, "dimension must be >= 1");
    if d == 1 {
        return 0.0;
    }
    let k = (d - 1) as f64;
    let sl2 = c.sigma_l * c.sigma_l;
    let inner = c.lambda * k
        + sl2 * k * k
        + (sl2 * sl2 * k.powi(4) + 2.0 * c.lambda * sl2 * k.powi(3)).sqrt();
    std::f64::consts::SQRT_2 * c.sigma_b * inner.sqrt()
}

/// Larger root of `(d-1) G - (G - lambda)^2 / (2 sigma_L^2)`, the smallest admissible
/// exponential covering scale.
pub fn gamma0(c: &CertifiedConstants, d: usize) -> f64 {
    assert!(d >= 1, "dimension must be >= 1");
    let k = (d - 1) as f64;
    let sl2 = c.sigma_l * c.sigma_l;
    c.lambda + sl2 * k + (2.0 * c.lambda * sl2 * k + sl2 * sl2 * k * k).sqrt()
}

/// Parameters of a built-in model, as they appear in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl ModelSpec {
    pub fn named(id: &str) -> Self {
        ModelSpec {
            id: id.to_string(),
            beta: None,
            sigma: None,
            tau: None,
            lambda: None,
        }
    }

    pub fn build(&self) -> Result<FlowModel> {
        match self.id.as_str() {
            "ou1d" => FlowModel::ou1d(self.beta.unwrap_or(1.0), self.sigma.unwrap_or(1.0)),
            "radial2d-in" | "radial2d-out" => {
                let sign = if self.id.ends_with("in") { -1.0 } else { 1.0 };
                FlowModel::radial2d(
                    sign,
                    self.beta.unwrap_or(3.0),
                    self.sigma.unwrap_or(0.5),
                    self.tau.unwrap_or(0.1),
                )
            }
            "mult1d" => FlowModel::mult1d(self.lambda.unwrap_or(0.0), self.sigma.unwrap_or(1.0)),
            other => Err(FlowError::UnknownModel(other.to_string())),
        }
    }
}

/// A flow model of the finite-driver class.
#[derive(Clone)]
pub struct FlowModel {
    id: String,
    dimension: usize,
    drift: FieldFn,
    fields: Vec<FieldFn>,
    constants: CertifiedConstants,
    radial_upper: ProfileFn,
    radial_lower: ProfileFn,
    a2_certified: bool,
    drift_magnitude: Option<f64>,
    linear_flow: Option<(f64, f64)>,
}

impl fmt::Debug for FlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowModel")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("fields", &self.fields.len())
            .field("constants", &self.constants)
            .field("a2_certified", &self.a2_certified)
            .finish()
    }
}

#[inline]
fn unit_ball_projection_scale(x: &[f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    1.0 / n.max(1.0)
}

impl FlowModel {
    pub fn builder(dimension: usize) -> FlowModelBuilder {
        FlowModelBuilder {
            id: "custom".into(),
            dimension,
            drift: None,
            fields: Vec::new(),
            constants: None,
            radial_upper: None,
            radial_lower: None,
            a2_certified: true,
            drift_magnitude: None,
            linear_flow: None,
        }
    }

    /// `b(x) = -beta x / max(|x|, 1)`, one constant field `sigma`.
    ///
    /// The drift is monotone and the noise additive, so `lambda = 0`. `A(x, y)`
    /// vanishes and any positive `sigma_L` is valid; `sigma` is shipped.
    pub fn ou1d(beta: f64, sigma: f64) -> Result<Self> {
        check_params(&[("beta", beta)], &[("sigma", sigma)])?;
        FlowModel::builder(1)
            .id("ou1d")
            .drift(move |x, out| out[0] = -beta * x[0] * unit_ball_projection_scale(x))
            .field(move |_, out| out[0] = sigma)
            .constants(CertifiedConstants::new(0.0, sigma, sigma)?)
            .radial(move |_| -beta, move |_| -beta)
            .drift_magnitude(beta)
            .build()
    }

    /// Radial drift `sign * beta * x / max(|x|, 1)` in the plane, driven by two
    /// additive fields `(sigma, 0)`, `(0, sigma)` and two bounded rotational
    /// fields `tau (-sin x2, cos x1)`, `tau (cos x2, sin x1)`.
    ///
    /// Model card: each rotational field is `tau`-Lipschitz, so
    /// `sigma_L^2 = 2 tau^2`; `a(x, x) = sigma^2 I + tau^2 [[1, s], [s, 1]]`
    /// with `s = sin(x1 - x2)`, so `sigma_B^2 = sigma^2 + 2 tau^2`. The unit-ball
    /// projection is monotone and nonexpansive, giving `lambda = tau^2` inward
    /// and `lambda = beta + tau^2` outward.
    pub fn radial2d(sign: f64, beta: f64, sigma: f64, tau: f64) -> Result<Self> {
        check_params(&[("beta", beta)], &[("sigma", sigma), ("tau", tau)])?;
        let s = if sign < 0.0 { -1.0 } else { 1.0 };
        let sigma_l = (2.0_f64).sqrt() * tau;
        let sigma_b = (sigma * sigma + 2.0 * tau * tau).sqrt();
        let lambda = if s < 0.0 { tau * tau } else { beta + tau * tau };
        let id = if s < 0.0 { "radial2d-in" } else { "radial2d-out" };
        FlowModel::builder(2)
            .id(id)
            .drift(move |x, out| {
                let k = s * beta * unit_ball_projection_scale(x);
                out[0] = k * x[0];
                out[1] = k * x[1];
            })
            .field(move |_, out| {
                out[0] = sigma;
                out[1] = 0.0;
            })
            .field(move |_, out| {
                out[0] = 0.0;
                out[1] = sigma;
            })
            .field(move |x, out| {
                out[0] = -tau * x[1].sin();
                out[1] = tau * x[0].cos();
            })
            .field(move |x, out| {
                out[0] = tau * x[1].cos();
                out[1] = tau * x[0].sin();
            })
            .constants(CertifiedConstants::new(lambda, sigma_l, sigma_b)?)
            .radial(move |_| s * beta, move |_| s * beta)
            .drift_magnitude(beta)
            .build()
    }

    /// Linear multiplicative model `b(x) = lambda x`, `V_1(x) = sigma x`, with the
    /// exact flow `x exp(sigma W_t + (lambda - sigma^2/2) t)`.
    ///
    /// `a(x, x) = sigma^2 x^2` is unbounded, so this model is admitted only
    /// for two-point and diameter experiments. The shipped `sigma_B = sigma`
    /// holds on `|x| <= 1` only.
    pub fn mult1d(lambda: f64, sigma: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(FlowError::InvalidConstants("lambda must be finite".into()));
        }
        check_params(&[], &[("sigma", sigma)])?;
        let upper = move |r: f64| {
            if lambda > 0.0 {
                f64::INFINITY
            } else if lambda == 0.0 {
                0.0
            } else {
                lambda * r
            }
        };
        let lower = move |r: f64| {
            if lambda < 0.0 {
                f64::NEG_INFINITY
            } else {
                lambda * r
            }
        };
        FlowModel::builder(1)
            .id("mult1d")
            .drift(move |x, out| out[0] = lambda * x[0])
            .field(move |x, out| out[0] = sigma * x[0])
            .constants(CertifiedConstants::new(lambda.max(0.0), sigma, sigma)?)
            .radial(upper, lower)
            .a2_certified(false)
            .linear_flow(lambda, sigma)
            .build()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn constants(&self) -> &CertifiedConstants {
        &self.constants
    }

    /// Whether the diffusion bound `sigma_B` is certified on all of space.
    pub fn a2_certified(&self) -> bool {
        self.a2_certified
    }

    /// Magnitude `beta` of a built-in radial drift.
    pub fn drift_magnitude(&self) -> Option<f64> {
        self.drift_magnitude
    }

    /// `(lambda, sigma)` when the flow is `x exp(sigma W_t + (lambda - sigma^2/2) t)`.
    pub fn linear_flow(&self) -> Option<(f64, f64)> {
        self.linear_flow
    }

    #[inline]
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    #[inline]
    pub fn field(&self, i: usize, x: &[f64], out: &mut [f64]) {
        (self.fields[i])(x, out)
    }

    pub fn radial_upper(&self, r_bar: f64) -> f64 {
        (self.radial_upper)(r_bar)
    }

    pub fn radial_lower(&self, r_bar: f64) -> f64 {
        (self.radial_lower)(r_bar)
    }

    /// `a(x, x) = sum_i V_i(x) V_i(x)^T`.
    pub fn diffusion_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dimension;
        let mut a = DMatrix::zeros(d, d);
        let mut v = vec![0.0; d];
        for f in &self.fields {
            f(x, &mut v);
            for r in 0..d {
                for c in 0..d {
                    a[(r, c)] += v[r] * v[c];
                }
            }
        }
        a
    }

    /// `A(x, y) = sum_i (V_i(x) - V_i(y)) (V_i(x) - V_i(y))^T`.
    pub fn two_point_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let d = self.dimension;
        let mut a = DMatrix::zeros(d, d);
        let mut vx = vec![0.0; d];
        let mut vy = vec![0.0; d];
        for f in &self.fields {
            f(x, &mut vx);
            f(y, &mut vy);
            for r in 0..d {
                for c in 0..d {
                    a[(r, c)] += (vx[r] - vy[r]) * (vx[c] - vy[c]);
                }
            }
        }
        a
    }
}

fn check_params(any: &[(&str, f64)], positive: &[(&str, f64)]) -> Result<()> {
    for (name, v) in any {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(FlowError::InvalidConstants(format!("{name} = {v} must be finite and >= 0")));
        }
    }
    for (name, v) in positive {
        if !(v.is_finite() && *v > 0.0) {
            return Err(FlowError::InvalidConstants(format!("{name} = {v} must be finite and > 0")));
        }
    }
    Ok(())
}

pub struct FlowModelBuilder {
    id: String,
    dimension: usize,
    drift: Option<FieldFn>,
    fields: Vec<FieldFn>,
    constants: Option<CertifiedConstants>,
    radial_upper: Option<ProfileFn>,
    radial_lower: Option<ProfileFn>,
    a2_certified: bool,
    drift_magnitude: Option<f64>,
    linear_flow: Option<(f64, f64)>,
}

impl FlowModelBuilder {
    pub fn id(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self
    }

    pub fn drift(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn field(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.fields.push(Arc::new(f));
        self
    }

    pub fn constants(mut self, c: CertifiedConstants) -> Self {
        self.constants = Some(c);
        self
    }

    /// Analytic `r -> sup_{|y| >= r} y.b(y)/|y|` and the matching infimum.
    pub fn radial(
        mut self,
        upper: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.radial_upper = Some(Arc::new(upper));
        self.radial_lower = Some(Arc::new(lower));
        self
    }

    pub fn a2_certified(mut self, yes: bool) -> Self {
        self.a2_certified = yes;
        self
    }

    pub fn linear_flow(mut self, lambda: f64, sigma: f64) -> Self {
        self.linear_flow = Some((lambda, sigma));
        self
    }

    pub fn drift_magnitude(mut self, beta: f64) -> Self {
        self.drift_magnitude = Some(beta);
        self
    }

    pub fn build(self) -> Result<FlowModel> {
        if self.dimension == 0 {
            return Err(FlowError::UnsupportedDimension(0));
        }
        let missing = |what: &str| FlowError::ConfigInvalid(format!("model `{}` has no {what}", self.id));
        let drift = self.drift.clone().ok_or_else(|| missing("drift"))?;
        let constants = self.constants.ok_or_else(|| missing("certified constants"))?;
        let radial_upper = self.radial_upper.clone().ok_or_else(|| missing("radial profile"))?;
        let radial_lower = self.radial_lower.clone().ok_or_else(|| missing("radial profile"))?;
        Ok(FlowModel {
            id: self.id,
            dimension: self.dimension,
            drift,
            fields: self.fields,
            constants,
            radial_upper,
            radial_lower,
            a2_certified: self.a2_certified,
            drift_magnitude: self.drift_magnitude,
            linear_flow: self.linear_flow,
        })
    }
}

fn check_r_bar(r_bar: f64) -> Result<()> {
    if r_bar >= 1.0 && r_bar.is_finite() {
        Ok(())
    } else {
        Err(FlowError::InvalidRadius(r_bar))
    }
}

/// `sup_{|y| >= r_bar} y.b(y)/|y| + (d-1) sigma_B^2 / (2 r_bar)`.
pub fn beta_star_upper(model: &FlowModel, r_bar: f64) -> Result<f64> {
    check_r_bar(r_bar)?;
    let sup = model.radial_upper(r_bar);
    if !sup.is_finite() {
        return Err(FlowError::UnboundedRadialProfile(r_bar));
    }
    let sb = model.constants.sigma_b;
    Ok(sup + (model.dimension - 1) as f64 * sb * sb / (2.0 * r_bar))
}

/// `inf_{|y| >= r_bar} y.b(y)/|y|`.
pub fn beta_star_lower(model: &FlowModel, r_bar: f64) -> Result<f64> {
    check_r_bar(r_bar)?;
    let inf = model.radial_lower(r_bar);
    if !inf.is_finite() {
        return Err(FlowError::UnboundedRadialProfile(r_bar));
    }
    Ok(inf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `||A(x, y)|| <= sigma_L^2 |x - y|^2`
    TwoPointDiffusion,
    /// `(x - y).(b(x) - b(y)) + (d-1)/2 sigma_L^2 |x - y|^2 <= lambda |x - y|^2`
    OneSidedDrift,
    /// `||a(x, x)|| <= sigma_B^2`
    BoundedDiffusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub bound: f64,
}

const CHECK_RTOL: f64 = 1e-9;

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.symmetric_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spot-check of the certified constants on `sample_count` pairs drawn
/// uniformly from `[-box_radius, box_radius]^d`. An empty list means no
/// sampled pair contradicts them.
pub fn check_a1_numeric(model: &FlowModel, sample_count: usize, box_radius: f64, seed: u64) -> Vec<Violation> {
    assert!(sample_count >= 1, "sample_count must be >= 1");
    let d = model.dimension;
    let c = model.constants;
    let sl2 = c.sigma_l * c.sigma_l;
    let sb2 = c.sigma_b * c.sigma_b;
    let mut out = Vec::new();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    for s in 0..sample_count as u64 {
        let mut rng = CounterRng::keyed(seed, 0xA1, s);
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = rng.random_range(-box_radius..=box_radius);
        }
        let dist2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();

        if dist2 > 0.0 {
            let a_norm = spectral_norm(model.two_point_matrix(&x, &y));
            let q = a_norm / dist2;
            if q > sl2 * (1.0 + CHECK_RTOL) {
                out.push(Violation {
                    condition: Condition::TwoPointDiffusion,
                    x: x.clone(),
                    y: y.clone(),
                    value: q,
                    bound: sl2,
                });
            }

            model.drift(&x, &mut bx);
            model.drift(&y, &mut by);
            let dot: f64 = (0..d).map(|i| (x[i] - y[i]) * (bx[i] - by[i])).sum();
            let extra = 0.5 * (d - 1) as f64 * sl2 * dist2;
            let q = (dot + extra) / dist2;
            let magnitude: f64 = (0..d).map(|i| (x[i] - y[i]).abs() * (bx[i].abs() + by[i].abs())).sum();
            let scale = c.lambda.abs().max((magnitude + extra) / dist2);
            if q > c.lambda + CHECK_RTOL * scale {
                out.push(Violation {
                    condition: Condition::OneSidedDrift,
                    x: x.clone(),
                    y: y.clone(),
                    value: q,
                    bound: c.lambda,
                });
            }
        }

        let a_norm = spectral_norm(model.diffusion_matrix(&x));
        if a_norm > sb2 * (1.0 + CHECK_RTOL) {
            out.push(Violation {
                condition: Condition::BoundedDiffusion,
                x: x.clone(),
                y: x.clone(),
                value: a_norm,
                bound: sb2,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn cc(l: f64, sl: f64, sb: f64) -> CertifiedConstants {
        CertifiedConstants::new(l, sl, sb).unwrap()
    }

    #[test]
    fn beta0_examples() {
        assert_eq!(beta0(&cc(5.0, 3.0, 7.0), 1), 0.0);
        assert_relative_eq!(beta0(&cc(1.0, 1.0, 1.0), 2), 1.0 + 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(beta0(&cc(0.0, 1.0, 1.0), 2), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma0_examples() {
        assert_eq!(gamma0(&cc(4.0, 2.0, 1.0), 1), 4.0);
        let c = cc(1.0, 1.0, 1.0);
        assert_relative_eq!(gamma0(&c, 2), 2.0 + 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(gamma0(&c, 2), beta0(&c, 2).powi(2) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn constants_are_validated() {
        assert!(CertifiedConstants::new(-1.0, 1.0, 1.0).is_err());
        assert!(CertifiedConstants::new(0.0, 0.0, 1.0).is_err());
        assert!(CertifiedConstants::new(0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn beta_star_examples() {
        let m = FlowModel::radial2d(-1.0, 3.0, 1.0, 1e-9).unwrap();
        // sigma_B^2 = 1 + 2e-18, indistinguishable from 1 here.
        assert_relative_eq!(beta_star_upper(&m, 2.0).unwrap(), -2.75, epsilon = 1e-12);

        let ou = FlowModel::ou1d(1.5, 2.0).unwrap();
        assert_eq!(beta_star_upper(&ou, 3.0).unwrap(), -1.5);

        let zero = FlowModel::builder(3)
            .drift(|_, o| o.fill(0.0))
            .field(|_, o| {
                o.fill(0.0);
                o[0] = 1.0
            })
            .constants(cc(0.0, 1.0, 1.0))
            .radial(|_| 0.0, |_| 0.0)
            .build()
            .unwrap();
        assert_eq!(beta_star_upper(&zero, 1.0).unwrap(), 1.0);
        assert_eq!(beta_star_lower(&zero, 1.0).unwrap(), 0.0);

        let out = FlowModel::radial2d(1.0, 2.0, 0.5, 0.1).unwrap();
        assert_eq!(beta_star_lower(&out, 1.0).unwrap(), 2.0);

        assert_eq!(beta_star_upper(&out, 0.5), Err(FlowError::InvalidRadius(0.5)));
        assert_eq!(beta_star_lower(&out, 0.99), Err(FlowError::InvalidRadius(0.99)));
    }

    #[test]
    fn unbounded_infimum_is_rejected() {
        let m = FlowModel::mult1d(-1.0, 1.0).unwrap();
        assert_eq!(beta_star_lower(&m, 1.0), Err(FlowError::UnboundedRadialProfile(1.0)));
        let m = FlowModel::mult1d(1.0, 1.0).unwrap();
        assert!(beta_star_upper(&m, 1.0).is_err());
        assert_eq!(beta_star_lower(&m, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn built_in_ids_resolve() {
        for id in ["ou1d", "radial2d-in", "radial2d-out", "mult1d"] {
            let m = ModelSpec::named(id).build().unwrap();
            assert_eq!(m.id(), id);
        }
        assert!(matches!(ModelSpec::named("lorenz").build(), Err(FlowError::UnknownModel(_))));
    }

    #[test]
    fn constant_field_passes_check() {
        let m = FlowModel::builder(2)
            .drift(|_, o| o.fill(0.0))
            .field(|_, o| {
                o[0] = 3.0;
                o[1] = 4.0
            })
            .constants(cc(0.045, 0.3, 5.0))
            .radial(|_| 0.0, |_| 0.0)
            .build()
            .unwrap();
        let v = check_a1_numeric(&m, 2000, 50.0, 3);
        assert!(v.is_empty(), "{:?}", &v[..v.len().min(3)]);
    }

    #[test]
    fn multiplicative_model_fails_only_the_diffusion_bound() {
        let m = FlowModel::mult1d(0.0, 1.0).unwrap();
        let v = check_a1_numeric(&m, 5000, 10.0, 11);
        assert!(!v.is_empty());
        for viol in &v {
            assert_eq!(viol.condition, Condition::BoundedDiffusion);
            assert!(viol.x[0].abs() > 1.0);
        }
        // Every sample beyond |x| = sigma_B is flagged.
        let beyond = (0..5000u64)
            .filter(|&s| {
                let mut rng = CounterRng::keyed(11, 0xA1, s);
                let x: f64 = rng.random_range(-10.0..=10.0);
                x.abs() > 1.0 + 1e-9
            })
            .count();
        assert_eq!(v.len(), beyond);
    }

    #[test]
    fn built_in_models_pass_their_own_certificates() {
        for id in ["ou1d", "radial2d-in", "radial2d-out"] {
            let m = ModelSpec::named(id).build().unwrap();
            let v = check_a1_numeric(&m, 100_000, 100.0, 2024);
            assert!(v.is_empty(), "{id}: {:?}", &v[..v.len().min(3)]);
        }
    }

    #[test]
    fn radial_profiles_are_ordered() {
        for id in ["ou1d", "radial2d-in", "radial2d-out", "mult1d"] {
            let m = ModelSpec::named(id).build().unwrap();
            for k in 0..50 {
                let r = 1.0 + k as f64 * 0.7;
                assert!(m.radial_lower(r) <= m.radial_upper(r), "{id} at {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn beta0_identity_and_monotonicity(
            l in 0.0..5.0f64, sl in 0.05..3.0f64, sb in 0.05..3.0f64, d in 1usize..=5, bump in 0.0..1.0f64,
        ) {
            let c = cc(l, sl, sb);
            let b = beta0(&c, d);
            let lhs = (d - 1) as f64 * gamma0(&c, d);
            let rhs = b * b / (2.0 * sb * sb);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300));
            prop_assert!(beta0(&cc(l + bump, sl, sb), d) >= b);
            prop_assert!(beta0(&cc(l, sl + bump, sb), d) >= b);
            prop_assert!(beta0(&cc(l, sl, sb + bump), d) >= b);
            prop_assert_eq!(beta0(&c, 1), 0.0);
        }
    }
}
