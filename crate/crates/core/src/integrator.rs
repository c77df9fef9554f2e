//! Euler–Maruyama evolution of coupled point clouds.
//!
//! All points of a cloud see the same increments, so the cloud follows the
//! n-point motion of one flow realization. Step indices are absolute and may
//! be negative; `evolve(s..u)` equals `evolve(t..u)` after `evolve(s..t)`
//! bit for bit.

use std::io::{self, Write};
use std::ops::ControlFlow;

use crate::error::{FlowError, Result};
use crate::model::FlowModel;
use crate::noise::NoiseSource;

/// Coordinates beyond this magnitude abort the run as divergent.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// Largest cloud for which per-pair running maxima are kept.
pub const PAIR_TRACKING_LIMIT: usize = 64;

#[derive(Debug, Clone)]
pub struct PointCloud {
    dimension: usize,
    time: f64,
    points: Vec<f64>,
    norm_max: Vec<f64>,
    norm_min: Vec<f64>,
    pair_max: Option<Vec<f64>>,
    diameter_max: Option<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl PointCloud {
    /// Cloud at time 0 from a flat coordinate buffer (`points.len()` divisible by `dimension`).
    pub fn new(dimension: usize, points: Vec<f64>) -> Result<Self> {
        if dimension == 0 {
            return Err(FlowError::UnsupportedDimension(0));
        }
        if !points.len().is_multiple_of(dimension) {
            return Err(FlowError::ConfigInvalid(format!(
                "{} coordinates do not form {dimension}-dimensional points",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::ConfigInvalid("point coordinates must be finite".into()));
        }
        let norms: Vec<f64> = points.chunks(dimension).map(norm).collect();
        Ok(PointCloud {
            dimension,
            time: 0.0,
            next: vec![0.0; points.len()],
            scratch: vec![0.0; 2 * dimension],
            points,
            norm_max: norms.clone(),
            norm_min: norms,
            pair_max: None,
            diameter_max: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(1);
        if points.iter().any(|p| p.len() != d) {
            return Err(FlowError::ConfigInvalid("points of mixed dimension".into()));
        }
        PointCloud::new(d, points.concat())
    }

    /// Keep the running maximum of every pairwise distance.
    pub fn with_pair_tracking(mut self) -> Result<Self> {
        let n = self.len();
        if n > PAIR_TRACKING_LIMIT {
            return Err(FlowError::ConfigInvalid(format!(
                "pair tracking is limited to {PAIR_TRACKING_LIMIT} points, cloud has {n}"
            )));
        }
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push(dist(self.point(i), self.point(j)));
            }
        }
        self.pair_max = Some(pairs);
        Ok(self)
    }

    /// Keep the running maximum of the cloud diameter.
    pub fn with_diameter_tracking(mut self) -> Self {
        self.diameter_max = Some(crate::geometry::diameter_flat(self.dimension, &self.points));
        self
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dimension)
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.points
    }

    pub fn norm(&self, i: usize) -> f64 {
        norm(self.point(i))
    }

    pub fn running_norm_max(&self) -> &[f64] {
        &self.norm_max
    }

    pub fn running_norm_min(&self) -> &[f64] {
        &self.norm_min
    }

    /// Running pair maxima in the order `(0,1), (0,2), .., (1,2), ..`.
    pub fn pair_tracking(&self) -> Option<&[f64]> {
        self.pair_max.as_deref()
    }

    pub fn running_diameter_max(&self) -> Option<f64> {
        self.diameter_max
    }

    /// Largest running pair distance, from pair tracking or diameter tracking.
    pub fn running_pair_sup(&self) -> Option<f64> {
        match (&self.pair_max, self.diameter_max) {
            (_, Some(d)) => Some(d),
            (Some(p), None) => Some(p.iter().copied().fold(0.0, f64::max)),
            (None, None) => None,
        }
    }

    fn refresh_statistics(&mut self) {
        let d = self.dimension;
        for (i, p) in self.points.chunks(d).enumerate() {
            let r = norm(p);
            if r > self.norm_max[i] {
                self.norm_max[i] = r;
            }
            if r < self.norm_min[i] {
                self.norm_min[i] = r;
            }
        }
        if let Some(pairs) = self.pair_max.as_mut() {
            let n = self.points.len() / d;
            let mut k = 0;
            for i in 0..n {
                let pi = &self.points[i * d..(i + 1) * d];
                for j in i + 1..n {
                    let r = dist(pi, &self.points[j * d..(j + 1) * d]);
                    if r > pairs[k] {
                        pairs[k] = r;
                    }
                    k += 1;
                }
            }
        }
        if let Some(current) = self.diameter_max {
            if crate::geometry::diameter_upper_estimate(d, &self.points) > current {
                let diam = crate::geometry::diameter_flat(d, &self.points);
                if diam > current {
                    self.diameter_max = Some(diam);
                }
            }
        }
    }
}

/// One Euler–Maruyama step `x <- x + b(x) h + sum_i V_i(x) dW_i` applied to every
/// point with the same increments.
pub fn step(model: &FlowModel, cloud: &mut PointCloud, increments: &[f64], h: f64) -> Result<()> {
    let d = cloud.dimension;
    if d != model.dimension() {
        return Err(FlowError::ConfigInvalid(format!(
            "cloud dimension {d} does not match model dimension {}",
            model.dimension()
        )));
    }
    if increments.len() != model.field_count() {
        return Err(FlowError::ConfigInvalid(format!(
            "expected {} increments, got {}",
            model.field_count(),
            increments.len()
        )));
    }
    let step_index = (cloud.time / h).round() as i64;
    let PointCloud {
        points, next, scratch, ..
    } = cloud;
    let (drift, field) = scratch.split_at_mut(d);
    for (x, out) in points.chunks(d).zip(next.chunks_mut(d)) {
        model.drift(x, drift);
        for k in 0..d {
            out[k] = x[k] + drift[k] * h;
        }
        for (i, dw) in increments.iter().enumerate() {
            model.field(i, x, field);
            for k in 0..d {
                out[k] += field[k] * dw;
            }
        }
        if out.iter().any(|v| !(v.abs() <= OVERFLOW_GUARD)) {
            return Err(FlowError::NumericOverflow { step: step_index });
        }
    }
    std::mem::swap(points, next);
    cloud.time += h;
    cloud.refresh_statistics();
    Ok(())
}

/// Evolve over steps `from_step .. to_step` and leave the cloud at time `to_step * h`.
pub fn evolve(
    model: &FlowModel,
    cloud: &mut PointCloud,
    from_step: i64,
    to_step: i64,
    noise: &NoiseSource,
) -> Result<()> {
    evolve_with(model, cloud, from_step, to_step, noise, |_, _| ControlFlow::Continue(()))
}

/// [`evolve`] with an observer called after every step with the index of the
/// step just completed. Returning `Break` stops early.
pub fn evolve_with<F>(
    model: &FlowModel,
    cloud: &mut PointCloud,
    from_step: i64,
    to_step: i64,
    noise: &NoiseSource,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(i64, &PointCloud) -> ControlFlow<()>,
{
    if from_step > to_step {
        return Err(FlowError::ConfigInvalid(format!(
            "from_step {from_step} is after to_step {to_step}"
        )));
    }
    let m = model.field_count();
    if m > 0 && noise.driver_count() < m {
        return Err(FlowError::ConfigInvalid(format!(
            "noise has {} drivers, model needs {m}",
            noise.driver_count()
        )));
    }
    let h = noise.step_size();
    let mut dw = vec![0.0; m];
    for k in from_step..to_step {
        cloud.time = k as f64 * h;
        noise.fill_increments(k, &mut dw);
        step(model, cloud, &dw, h).map_err(|e| match e {
            FlowError::NumericOverflow { .. } => FlowError::NumericOverflow { step: k },
            other => other,
        })?;
        cloud.time = (k + 1) as f64 * h;
        if observe(k, cloud).is_break() {
            return Ok(());
        }
    }
    cloud.time = to_step as f64 * h;
    Ok(())
}

/// Writes trajectory rows `t,point_index,x_1..x_d`.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, dimension: usize) -> io::Result<Self> {
        let mut header = String::from("t,point_index");
        for k in 1..=dimension {
            header.push_str(&format!(",x_{k}"));
        }
        writeln!(out, "{header}")?;
        Ok(TrajectoryWriter { out })
    }

    pub fn record(&mut self, cloud: &PointCloud) -> io::Result<()> {
        let t = crate::report::fmt_sig(cloud.time());
        for (i, p) in cloud.points().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| crate::report::fmt_sig(*v)).collect();
            writeln!(self.out, "{t},{i},{}", coords.join(","))?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CertifiedConstants;

    fn linear_decay() -> FlowModel {
        FlowModel::builder(1)
            .drift(|x, o| o[0] = -x[0])
            .constants(CertifiedConstants::new(0.0, 1.0, 1.0).unwrap())
            .radial(|_| f64::NEG_INFINITY, |_| f64::NEG_INFINITY)
            .build()
            .unwrap()
    }

    #[test]
    fn identity_flow_only_advances_time() {
        let m = FlowModel::builder(2)
            .drift(|_, o| o.fill(0.0))
            .field(|_, o| o.fill(0.0))
            .constants(CertifiedConstants::new(0.0, 1.0, 1.0).unwrap())
            .radial(|_| 0.0, |_| 0.0)
            .build()
            .unwrap();
        let mut c = PointCloud::new(2, vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        let before = c.coordinates().to_vec();
        step(&m, &mut c, &[0.7], 0.1).unwrap();
        assert_eq!(c.coordinates(), &before[..]);
        assert!((c.time() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn deterministic_decay_matches_exponential() {
        let m = linear_decay();
        let noise = NoiseSource::new(0, 1, 1e-4).unwrap();
        let mut c = PointCloud::new(1, vec![1.0]).unwrap();
        evolve(&m, &mut c, 0, 10_000, &noise).unwrap();
        assert!((c.point(0)[0] - (-1.0f64).exp()).abs() < 1e-3);
        assert!((c.time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_range_is_identity() {
        let m = FlowModel::ou1d(1.0, 1.0).unwrap();
        let noise = NoiseSource::new(3, 1, 1e-3).unwrap();
        let mut c = PointCloud::new(1, vec![2.5]).unwrap();
        evolve(&m, &mut c, 7, 7, &noise).unwrap();
        assert_eq!(c.point(0), &[2.5]);
        assert!(evolve(&m, &mut c, 8, 7, &noise).is_err());
    }

    #[test]
    fn wrong_increment_count_is_rejected() {
        let m = FlowModel::radial2d(-1.0, 1.0, 0.5, 0.1).unwrap();
        let mut c = PointCloud::new(2, vec![1.0, 1.0]).unwrap();
        assert!(step(&m, &mut c, &[0.1, 0.2], 1e-3).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let m = FlowModel::builder(1)
            .drift(|x, o| o[0] = x[0] * x[0])
            .constants(CertifiedConstants::new(0.0, 1.0, 1.0).unwrap())
            .radial(|_| f64::INFINITY, |_| 0.0)
            .build()
            .unwrap();
        let noise = NoiseSource::new(0, 1, 0.1).unwrap();
        let mut c = PointCloud::new(1, vec![10.0]).unwrap();
        let err = evolve(&m, &mut c, 0, 1000, &noise).unwrap_err();
        assert!(matches!(err, FlowError::NumericOverflow { step } if step > 0 && step < 1000));
    }

    #[test]
    fn pair_tracking_limit() {
        let pts: Vec<f64> = (0..65).map(|i| i as f64).collect();
        assert!(PointCloud::new(1, pts.clone()).unwrap().with_pair_tracking().is_err());
        assert!(PointCloud::new(1, pts[..64].to_vec()).unwrap().with_pair_tracking().is_ok());
    }

    #[test]
    fn running_extrema_bracket_current_norm() {
        let m = FlowModel::radial2d(-1.0, 2.0, 0.5, 0.1).unwrap();
        let noise = NoiseSource::new(17, 4, 1e-2).unwrap();
        let mut c = PointCloud::new(2, vec![3.0, 0.0, 0.0, -2.0, 0.1, 0.1]).unwrap();
        let mut prev_max = c.running_norm_max().to_vec();
        let mut prev_min = c.running_norm_min().to_vec();
        evolve_with(&m, &mut c, 0, 300, &noise, |_, cl| {
            for i in 0..cl.len() {
                let r = cl.norm(i);
                assert!(cl.running_norm_min()[i] <= r && r <= cl.running_norm_max()[i]);
                assert!(cl.running_norm_max()[i] >= prev_max[i]);
                assert!(cl.running_norm_min()[i] <= prev_min[i]);
            }
            prev_max = cl.running_norm_max().to_vec();
            prev_min = cl.running_norm_min().to_vec();
            ControlFlow::Continue(())
        })
        .unwrap();
    }

    #[test]
    fn trajectory_csv_layout() {
        let c = PointCloud::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut w = TrajectoryWriter::new(Vec::new(), 2).unwrap();
        w.record(&c).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,point_index,x_1,x_2");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("0,1,3"));
    }
}
