//! Sphere coverings, diameters and ball-containment predicates on point-cloud images.
//!
//! Containment is judged from the image of a sphere covering only. That is
//! sound for the continuous flow, which is a homeomorphism; the Euler scheme
//! is not injective, and the slack for that is the `resolution_margin` of
//! [`contains_ball`].

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{FlowError, Result};
use crate::integrator::PointCloud;

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Centers on `dS_S` whose `xi`-balls cover the sphere.
#[derive(Debug, Clone, Serialize)]
pub struct Covering {
    pub dimension: usize,
    pub sphere_radius: f64,
    pub ball_radius: f64,
    pub centers: Vec<Vec<f64>>,
    /// `N (xi / S)^(d-1)`, the constant this construction achieves.
    pub achieved_cd: f64,
}

impl Covering {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn to_cloud(&self) -> PointCloud {
        PointCloud::from_points(&self.centers).expect("covering centers are finite and uniform")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dimension).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for c in &self.centers {
            let row: Vec<String> = c.iter().map(|v| crate::report::fmt_sig(*v)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Checks that every probe point of `dS_S` lies within `xi` of some center.
    /// The probe mesh is at most `xi / 10`.
    pub fn verify(&self) -> bool {
        let xi2 = self.ball_radius * self.ball_radius;
        let mesh = self.ball_radius / 10.0;
        let mut hint = 0usize;
        let mut covered = |p: &[f64]| -> bool {
            if dist2(p, &self.centers[hint]) <= xi2 {
                return true;
            }
            match self.centers.iter().position(|c| dist2(p, c) <= xi2) {
                Some(i) => {
                    hint = i;
                    true
                }
                None => false,
            }
        };
        let s = self.sphere_radius;
        match self.dimension {
            1 => covered(&[s]) && covered(&[-s]),
            2 => {
                let n = ((2.0 * PI * s) / mesh).ceil().max(8.0) as usize;
                (0..n).all(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    covered(&[s * a.cos(), s * a.sin()])
                })
            }
            3 => {
                let rings = ((PI * s) / mesh).ceil().max(4.0) as usize;
                (0..=rings).all(|i| {
                    let theta = PI * i as f64 / rings as f64;
                    let ring_r = s * theta.sin();
                    let n = ((2.0 * PI * ring_r) / mesh).ceil().max(1.0) as usize;
                    (0..n).all(|k| {
                        let a = 2.0 * PI * k as f64 / n as f64;
                        covered(&[ring_r * a.cos(), ring_r * a.sin(), s * theta.cos()])
                    })
                })
            }
            _ => false,
        }
    }
}

fn fibonacci_sphere(n: usize, s: f64) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            vec![s * r * a.cos(), s * r * a.sin(), s * z]
        })
        .collect()
}

/// Cover `dS_S` in `R^d` by balls of radius `xi` centered on the sphere.
///
/// d = 1 uses the two points `±S`; d = 2 equally spaced points with angular
/// spacing at most `2 asin(xi / 2S)`; d = 3 a Fibonacci lattice grown until
/// the probe check passes.
pub fn cover_sphere(d: usize, s: f64, xi: f64) -> Result<Covering> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(FlowError::ConfigInvalid(format!("sphere radius {s} must be positive")));
    }
    if !(xi > 0.0 && xi <= s) {
        return Err(FlowError::ConfigInvalid(format!("ball radius {xi} must lie in (0, {s}]")));
    }
    let centers = match d {
        1 => vec![vec![-s], vec![s]],
        2 => {
            let n = (PI / (xi / (2.0 * s)).asin()).ceil() as usize;
            (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    vec![s * a.cos(), s * a.sin()]
                })
                .collect()
        }
        3 => {
            let ratio = s / xi;
            let mut n = ((4.0 * ratio * ratio).ceil() as usize).max(4);
            loop {
                let cov = Covering {
                    dimension: 3,
                    sphere_radius: s,
                    ball_radius: xi,
                    centers: fibonacci_sphere(n, s),
                    achieved_cd: 0.0,
                };
                if cov.verify() {
                    break cov.centers;
                }
                n = (n as f64 * 1.05).ceil() as usize + 1;
            }
        }
        other => return Err(FlowError::UnsupportedDimension(other)),
    };
    let achieved_cd = centers.len() as f64 * (xi / s).powi(d as i32 - 1);
    Ok(Covering {
        dimension: d,
        sphere_radius: s,
        ball_radius: xi,
        centers,
        achieved_cd,
    })
}

/// Max pairwise distance of a flat coordinate buffer.
pub fn diameter_flat(d: usize, coords: &[f64]) -> f64 {
    let n = coords.len() / d;
    if n <= 1 {
        return 0.0;
    }
    if d == 2 && n > 4096 {
        return planar_diameter(coords);
    }
    let mut best = 0.0_f64;
    for i in 0..n {
        let p = &coords[i * d..(i + 1) * d];
        for j in i + 1..n {
            best = best.max(dist2(p, &coords[j * d..(j + 1) * d]));
        }
    }
    best.sqrt()
}

/// Cheap upper bound on the diameter: twice the largest distance to the centroid.
pub fn diameter_upper_estimate(d: usize, coords: &[f64]) -> f64 {
    let n = coords.len() / d;
    if n <= 1 {
        return 0.0;
    }
    let mut c = [0.0_f64; 8];
    let c = if d <= 8 { &mut c[..d] } else { return diameter_flat(d, coords) };
    for p in coords.chunks(d) {
        for k in 0..d {
            c[k] += p[k];
        }
    }
    for v in c.iter_mut() {
        *v /= n as f64;
    }
    let r = coords.chunks(d).map(|p| dist2(p, c)).fold(0.0, f64::max);
    2.0 * r.sqrt() * (1.0 + 1e-12)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull, counterclockwise, no repeated endpoint.
fn convex_hull(coords: &[f64]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = coords.chunks(2).map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Rotating calipers over the convex hull.
fn planar_diameter(coords: &[f64]) -> f64 {
    let hull = convex_hull(coords);
    let h = hull.len();
    if h == 1 {
        return 0.0;
    }
    if h == 2 {
        return dist2(&hull[0], &hull[1]).sqrt();
    }
    let mut best = 0.0_f64;
    let mut j = 1;
    for i in 0..h {
        let ni = (i + 1) % h;
        while cross(hull[i], hull[ni], hull[(j + 1) % h]).abs() > cross(hull[i], hull[ni], hull[j]).abs() {
            j = (j + 1) % h;
        }
        best = best.max(dist2(&hull[i], &hull[j])).max(dist2(&hull[ni], &hull[j]));
    }
    best.sqrt()
}

/// Largest pairwise Euclidean distance in the cloud.
pub fn diameter(cloud: &PointCloud) -> f64 {
    diameter_flat(cloud.dimension(), cloud.coordinates())
}

/// Smallest norm among the image points of a sphere covering.
///
/// For a homeomorphic flow whose image region contains the origin, the image
/// of the sphere bounds the image of the ball, so this lower-bounds the true
/// inner radius up to the covering resolution.
pub fn inner_radius(boundary_image: &PointCloud) -> f64 {
    boundary_image.points().map(norm).fold(f64::INFINITY, f64::min)
}

pub fn outer_radius(cloud: &PointCloud) -> f64 {
    cloud.points().map(norm).fold(0.0, f64::max)
}

/// Winding number of the closed polygon through the points (in order) around the origin.
pub fn winding_number(polygon: &PointCloud) -> i64 {
    assert_eq!(polygon.dimension(), 2, "winding number needs planar points");
    let n = polygon.len();
    if n < 2 {
        return 0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = polygon.point(i);
        let b = polygon.point((i + 1) % n);
        let ang = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        total += ang;
    }
    (total / (2.0 * PI)).round() as i64
}

/// Whether the origin lies in the interior of the convex hull of a 3-d point set.
///
/// The origin is outside (or on the boundary) iff some plane through it has
/// every point on one closed side, and such a plane can be rotated until it
/// touches two of the points.
fn origin_inside_hull_3d(cloud: &PointCloud) -> bool {
    let pts: Vec<[f64; 3]> = cloud.points().map(|p| [p[0], p[1], p[2]]).collect();
    if pts.len() < 4 {
        return false;
    }
    let scale = pts.iter().map(|p| norm(p)).fold(0.0, f64::max);
    let eps = 1e-12 * scale * scale;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i], pts[j]);
            let n = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            if n.iter().map(|v| v * v).sum::<f64>() <= eps * eps {
                continue;
            }
            let mut pos = false;
            let mut neg = false;
            for p in &pts {
                let s = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
                pos |= s > eps;
                neg |= s < -eps;
                if pos && neg {
                    break;
                }
            }
            if !(pos && neg) {
                return false;
            }
        }
    }
    true
}

/// Whether the image of a sphere covering encloses the ball `B_rho`.
///
/// True iff the inner radius is at least `rho + resolution_margin` and the
/// image surrounds the origin: two image points on either side of it (d = 1),
/// winding number 1 (d = 2, points in covering order), or the origin interior
/// to the convex hull (d = 3, an under-approximation).
pub fn contains_ball(boundary_image: &PointCloud, rho: f64, resolution_margin: f64) -> bool {
    if boundary_image.is_empty() || inner_radius(boundary_image) < rho + resolution_margin {
        return false;
    }
    match boundary_image.dimension() {
        1 => {
            let neg = boundary_image.points().any(|p| p[0] < 0.0);
            let pos = boundary_image.points().any(|p| p[0] > 0.0);
            neg && pos
        }
        2 => winding_number(boundary_image) == 1,
        3 => origin_inside_hull_3d(boundary_image),
        _ => false,
    }
}

/// Largest distance between neighbouring image points of a covering: consecutive
/// points for d = 2, nearest neighbours otherwise.
pub fn adjacent_gap(boundary_image: &PointCloud) -> f64 {
    let n = boundary_image.len();
    if n < 2 {
        return 0.0;
    }
    if boundary_image.dimension() == 2 {
        return (0..n)
            .map(|i| dist2(boundary_image.point(i), boundary_image.point((i + 1) % n)))
            .fold(0.0, f64::max)
            .sqrt();
    }
    if boundary_image.dimension() == 1 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist2(boundary_image.point(i), boundary_image.point(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Default margin for [`contains_ball`]: twice the largest neighbour gap.
pub fn default_margin(boundary_image: &PointCloud) -> f64 {
    2.0 * adjacent_gap(boundary_image)
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    fn directed(a: &PointCloud, b: &PointCloud) -> f64 {
        a.points()
            .map(|p| b.points().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    directed(a, b).max(directed(b, a)).sqrt()
}

/// Lattice points of spacing `spacing` inside the closed ball `B_r`.
pub fn ball_grid(d: usize, r: f64, spacing: f64) -> Vec<Vec<f64>> {
    let k = (r / spacing).floor() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-k; d];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 * spacing).collect();
        if norm(&p) <= r * (1.0 + 1e-12) {
            out.push(p);
        }
        let mut c = 0;
        loop {
            if c == d {
                return out;
            }
            idx[c] += 1;
            if idx[c] <= k {
                break;
            }
            idx[c] = -k;
            c += 1;
        }
    }
}

/// `g^d` lattice points of the cube `corner + [0, side]^d`.
pub fn cube_lattice(corner: &[f64], side: f64, g: usize) -> Vec<Vec<f64>> {
    let d = corner.len();
    let g = g.max(1);
    let step = if g > 1 { side / (g - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(g.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        out.push((0..d).map(|k| corner[k] + idx[k] as f64 * step).collect());
        let mut c = 0;
        loop {
            if c == d {
                return out;
            }
            idx[c] += 1;
            if idx[c] < g {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}
