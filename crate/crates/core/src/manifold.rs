//! Manifolds, angle parametrizations and seeded random configurations.
//!
//! Points are stored as two angles each. On the unit sphere these are the
//! polar angle θ and the azimuth φ; on the torus of major radius `l` and minor
//! radius `a` they are the angle `u` about the symmetry axis and the angle `v`
//! around the tube. All kernels work with chordal (Euclidean) distances.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Minimum polar distance (radians) a sphere point must keep from either pole
/// for derivatives in (θ, φ) to be evaluated.
pub const POLE_GUARD: f64 = 1e-3;

/// Default separation factor for random starts.
pub const DEFAULT_SEP_FACTOR: f64 = 0.5;

/// Surface on which points live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Manifold {
    /// Unit sphere.
    Sphere,
    /// Torus of revolution about the z axis.
    Torus { major: f64, minor: f64 },
}

impl Manifold {
    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        let m = Manifold::Torus { major, minor };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Manifold::Sphere => Ok(()),
            Manifold::Torus { major, minor } => {
                if major.is_finite() && minor.is_finite() && minor > 0.0 && major > minor {
                    Ok(())
                } else {
                    Err(Error::InvalidManifold(format!(
                        "torus requires l > a > 0, got l = {major}, a = {minor}"
                    )))
                }
            }
        }
    }

    /// Dimension of the continuous rigid-motion group acting on the surface.
    pub fn rigid_dim(&self) -> usize {
        match self {
            Manifold::Sphere => 3,
            Manifold::Torus { .. } => 1,
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Manifold::Sphere => 4.0 * PI,
            Manifold::Torus { major, minor } => 4.0 * PI * PI * major * minor,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Manifold::Sphere)
    }

    /// Embedded point for one pair of angles.
    #[inline]
    pub fn embed_point(&self, p0: f64, p1: f64) -> Vec3 {
        match *self {
            Manifold::Sphere => {
                let (st, ct) = p0.sin_cos();
                let (sp, cp) = p1.sin_cos();
                [st * cp, st * sp, ct]
            }
            Manifold::Torus { major, minor } => {
                let (su, cu) = p0.sin_cos();
                let (sv, cv) = p1.sin_cos();
                let rho = major + minor * cv;
                [rho * cu, rho * su, minor * sv]
            }
        }
    }

    /// Angles of an embedded point, in the canonical ranges
    /// (sphere: θ ∈ [0, π], φ ∈ [0, 2π); torus: u, v ∈ [0, 2π)).
    pub fn angles_of(&self, x: Vec3) -> (f64, f64) {
        match *self {
            Manifold::Sphere => {
                let rho = x[0].hypot(x[1]);
                let theta = rho.atan2(x[2]);
                (theta, wrap_angle(x[1].atan2(x[0])))
            }
            Manifold::Torus { major, .. } => {
                let u = wrap_angle(x[1].atan2(x[0]));
                let rho = x[0].hypot(x[1]);
                (u, wrap_angle(x[2].atan2(rho - major)))
            }
        }
    }

    /// Embedding together with its first and second angle derivatives.
    #[inline]
    pub(crate) fn frame(&self, p0: f64, p1: f64) -> Frame {
        match *self {
            Manifold::Sphere => {
                let (st, ct) = p0.sin_cos();
                let (sp, cp) = p1.sin_cos();
                let x = [st * cp, st * sp, ct];
                Frame {
                    x,
                    d: [[ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0]],
                    dd: [
                        [-x[0], -x[1], -x[2]],
                        [-ct * sp, ct * cp, 0.0],
                        [-st * cp, -st * sp, 0.0],
                    ],
                }
            }
            Manifold::Torus { major, minor } => {
                let (su, cu) = p0.sin_cos();
                let (sv, cv) = p1.sin_cos();
                let rho = major + minor * cv;
                Frame {
                    x: [rho * cu, rho * su, minor * sv],
                    d: [[-rho * su, rho * cu, 0.0], [-minor * sv * cu, -minor * sv * su, minor * cv]],
                    dd: [
                        [-rho * cu, -rho * su, 0.0],
                        [minor * sv * su, -minor * sv * cu, 0.0],
                        [-minor * cv * cu, -minor * cv * su, -minor * sv],
                    ],
                }
            }
        }
    }

    /// Unit-normalized parameter-space directions generated by the rigid
    /// motions at the given parameters (rotations for the sphere, rotation
    /// about the axis for the torus), orthonormalized.
    pub(crate) fn rigid_generators(&self, params: &[f64]) -> Vec<Vec<f64>> {
        let n = params.len() / 2;
        let mut gens: Vec<Vec<f64>> = match self {
            Manifold::Sphere => (0..3)
                .map(|axis| {
                    let mut e = [0.0; 3];
                    e[axis] = 1.0;
                    let mut g = vec![0.0; 2 * n];
                    for i in 0..n {
                        let f = self.frame(params[2 * i], params[2 * i + 1]);
                        let w = vec3::cross(e, f.x);
                        let st2 = vec3::norm2(f.d[1]);
                        g[2 * i] = vec3::dot(w, f.d[0]);
                        g[2 * i + 1] = if st2 > 0.0 { vec3::dot(w, f.d[1]) / st2 } else { 0.0 };
                    }
                    g
                })
                .collect(),
            Manifold::Torus { .. } => {
                let mut g = vec![0.0; 2 * n];
                for i in 0..n {
                    g[2 * i] = 1.0;
                }
                vec![g]
            }
        };
        // Modified Gram-Schmidt.
        for k in 0..gens.len() {
            for j in 0..k {
                let proj: f64 = gens[k].iter().zip(&gens[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = gens.split_at_mut(k);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= proj * b;
                }
            }
            let nrm = gens[k].iter().map(|a| a * a).sum::<f64>().sqrt();
            if nrm > 0.0 {
                gens[k].iter_mut().for_each(|a| *a /= nrm);
            }
        }
        gens
    }
}

/// Embedding plus derivatives with respect to the two angles.
/// `dd` holds the (0,0), (0,1) and (1,1) second derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub x: Vec3,
    pub d: [Vec3; 2],
    pub dd: [Vec3; 3],
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angular distance of a sphere point with polar parameter `theta` from the
/// nearest pole; valid for any real `theta`.
#[inline]
pub(crate) fn polar_distance(theta: f64) -> f64 {
    theta.sin().abs().asin()
}

/// `n` points on a manifold, stored as `2n` angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    manifold: Manifold,
    params: Vec<f64>,
}

/// Closest pair of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub min_sep: f64,
    pub i: usize,
    pub j: usize,
}

impl Configuration {
    /// Builds a configuration from `2n` angles, reducing them to the canonical
    /// ranges. Fails for `n < 2`, non-finite angles or coincident points.
    pub fn new(manifold: Manifold, params: Vec<f64>) -> Result<Self> {
        manifold.validate()?;
        if params.len() % 2 != 0 {
            return Err(Error::InvalidConfiguration(format!(
                "expected an even number of angles, got {}",
                params.len()
            )));
        }
        if params.len() < 4 {
            return Err(Error::InvalidConfiguration("at least two points are required".into()));
        }
        if let Some(bad) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("angle parameter {bad}")));
        }
        let config = Configuration { manifold, params: canonical_params(&manifold, params) };
        min_separation(&config)?;
        Ok(config)
    }

    /// Builds a sphere configuration from unit vectors.
    pub fn from_sphere_points(points: &[Vec3]) -> Result<Self> {
        let mut params = Vec::with_capacity(2 * points.len());
        for p in points {
            let (t, f) = Manifold::Sphere.angles_of(*p);
            params.push(t);
            params.push(f);
        }
        Configuration::new(Manifold::Sphere, params)
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn n(&self) -> usize {
        self.params.len() / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Angles of point `i`.
    pub fn angles(&self, i: usize) -> (f64, f64) {
        (self.params[2 * i], self.params[2 * i + 1])
    }

    pub fn points(&self) -> Vec<Vec3> {
        embed_params(&self.manifold, &self.params)
    }
}

fn canonical_params(manifold: &Manifold, mut params: Vec<f64>) -> Vec<f64> {
    for pair in params.chunks_exact_mut(2) {
        match manifold {
            Manifold::Sphere => {
                let mut theta = pair[0].rem_euclid(TAU);
                let mut phi = pair[1];
                if theta > PI {
                    theta = TAU - theta;
                    phi += PI;
                }
                pair[0] = theta;
                pair[1] = wrap_angle(phi);
            }
            Manifold::Torus { .. } => {
                pair[0] = wrap_angle(pair[0]);
                pair[1] = wrap_angle(pair[1]);
            }
        }
    }
    params
}

pub(crate) fn embed_params(manifold: &Manifold, params: &[f64]) -> Vec<Vec3> {
    params.chunks_exact(2).map(|p| manifold.embed_point(p[0], p[1])).collect()
}

/// Embedded coordinates of every point.
pub fn embed(config: &Configuration) -> Vec<Vec3> {
    config.points()
}

/// Exact closest pair by exhaustive search.
pub fn min_separation(config: &Configuration) -> Result<SeparationReport> {
    separation_of_points(&config.points())
}

pub(crate) fn separation_of_points(points: &[Vec3]) -> Result<SeparationReport> {
    if points.len() < 2 {
        return Err(Error::InvalidConfiguration("at least two points are required".into()));
    }
    let mut best = SeparationReport { min_sep: f64::INFINITY, i: 0, j: 1 };
    let mut best_q = f64::INFINITY;
    for (i, &xi) in points.iter().enumerate() {
        for (j, &xj) in points.iter().enumerate().skip(i + 1) {
            let q = vec3::norm2(vec3::sub(xi, xj));
            if q < best_q {
                best_q = q;
                best.i = i;
                best.j = j;
            }
        }
    }
    if best_q <= 0.0 {
        return Err(Error::Degenerate { i: best.i, j: best.j });
    }
    best.min_sep = best_q.sqrt();
    Ok(best)
}

const PLACEMENT_ATTEMPTS: usize = 20_000;

/// Area-uniform random points, accepted only when every pairwise distance is
/// at least `sep_factor * sqrt(area / n)`. Deterministic for a given seed.
pub fn random_config(manifold: Manifold, n: usize, seed: u64, sep_factor: f64) -> Result<Configuration> {
    manifold.validate()?;
    if n < 2 {
        return Err(Error::Precondition(format!("need at least two points, got {n}")));
    }
    if !(sep_factor > 0.0 && sep_factor < 1.0) {
        return Err(Error::Precondition(format!("sep_factor must lie in (0, 1), got {sep_factor}")));
    }
    let min_dist = sep_factor * (manifold.area() / n as f64).sqrt();
    let min_q = min_dist * min_dist;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(2 * n);
    let mut points: Vec<Vec3> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    for point in 0..n {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            attempts += 1;
            let (p0, p1) = sample_uniform(&manifold, &mut rng);
            let x = manifold.embed_point(p0, p1);
            if points.iter().all(|&y| vec3::norm2(vec3::sub(x, y)) >= min_q) {
                points.push(x);
                params.push(p0);
                params.push(p1);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InitFailure { point, attempts });
        }
    }
    Configuration::new(manifold, params)
}

fn sample_uniform(manifold: &Manifold, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match *manifold {
        Manifold::Sphere => {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..TAU);
            (z.acos(), phi)
        }
        Manifold::Torus { major, minor } => {
            let u: f64 = rng.random_range(0.0..TAU);
            loop {
                let v: f64 = rng.random_range(0.0..TAU);
                let accept: f64 = rng.random();
                if accept * (major + minor) <= major + minor * v.cos() {
                    return (u, v);
                }
            }
        }
    }
}

/// Rotates a sphere configuration so that no point lies within
/// [`POLE_GUARD`] of either pole. Configurations that already satisfy this
/// are returned unchanged.
pub fn canonical_align(config: &Configuration) -> Result<Configuration> {
    if !config.manifold.is_sphere() {
        return Err(Error::Unsupported("pole alignment applies to sphere configurations only".into()));
    }
    if min_polar_distance(config.params()) >= POLE_GUARD {
        return Ok(config.clone());
    }
    align_poles_away(config)
}

pub(crate) fn min_polar_distance(params: &[f64]) -> f64 {
    params.chunks_exact(2).map(|p| polar_distance(p[0])).fold(f64::INFINITY, f64::min)
}

/// Rotation that puts the poles as far from the points as a finite search
/// over candidate axes can manage.
pub(crate) fn align_poles_away(config: &Configuration) -> Result<Configuration> {
    let points = config.points();
    let n = points.len();
    let candidates = (8 * n + 200).min(20_000);
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut best_axis = [0.0, 0.0, 1.0];
    let mut best_score = f64::INFINITY;
    // Only a hemisphere of axes is needed since d and -d are equivalent.
    for k in 0..candidates {
        let z = 1.0 - (k as f64 + 0.5) / candidates as f64;
        let r = (1.0 - z * z).sqrt();
        let (s, c) = (golden * k as f64).sin_cos();
        let d = [r * c, r * s, z];
        let score = points.iter().map(|&x| vec3::dot(d, x).abs()).fold(0.0, f64::max);
        if score < best_score {
            best_score = score;
            best_axis = d;
        }
    }
    let closest = best_score.min(1.0).acos();
    if closest < POLE_GUARD {
        return Err(Error::Alignment { closest });
    }
    let rot = vec3::rotation_between(best_axis, [0.0, 0.0, 1.0]);
    let rotated: Vec<Vec3> = points.iter().map(|&x| vec3::normalize(vec3::mat_vec(&rot, x))).collect();
    Configuration::from_sphere_points(&rotated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> Configuration {
        let s = 1.0 / 3f64.sqrt();
        Configuration::from_sphere_points(&[[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]]).unwrap()
    }

    #[test]
    fn embed_examples() {
        let x = Manifold::Sphere.embed_point(0.0, 0.0);
        assert!((x[2] - 1.0).abs() < 1e-15 && x[0].abs() < 1e-15);
        let y = Manifold::Sphere.embed_point(PI / 2.0, PI / 2.0);
        assert!((y[1] - 1.0).abs() < 1e-15 && y[0].abs() < 1e-15 && y[2].abs() < 1e-15);
        let t = Manifold::torus(2.0, 1.0).unwrap().embed_point(0.0, 0.0);
        assert_eq!(t, [3.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_validation() {
        assert!(Manifold::torus(1.0, 1.0).is_err());
        assert!(Manifold::torus(2.0, 0.0).is_err());
        assert_eq!(Manifold::torus(3.0, 1.0).unwrap().rigid_dim(), 1);
        assert_eq!(Manifold::Sphere.rigid_dim(), 3);
    }

    #[test]
    fn separation_examples() {
        let pair = Configuration::new(Manifold::Sphere, vec![0.3, 0.2, PI - 0.3, 0.2 + PI]).unwrap();
        assert!((min_separation(&pair).unwrap().min_sep - 2.0).abs() < 1e-14);
        let tet = min_separation(&tetrahedron()).unwrap();
        assert!((tet.min_sep - (8.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let err = Configuration::new(Manifold::Sphere, vec![1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(err, Err(Error::Degenerate { .. })));
    }

    #[test]
    fn random_config_is_deterministic_and_separated() {
        let a = random_config(Manifold::Sphere, 100, 7, 0.5).unwrap();
        let b = random_config(Manifold::Sphere, 100, 7, 0.5).unwrap();
        assert_eq!(a, b);
        let want = 0.5 * (4.0 * PI / 100.0).sqrt();
        assert!(min_separation(&a).unwrap().min_sep >= want);
    }

    #[test]
    fn impossible_separation_reports_attempts() {
        // The largest attainable minimum distance for four points is the
        // tetrahedron edge sqrt(8/3) ≈ 1.633 < 0.99 sqrt(pi) ≈ 1.755.
        for seed in 0..3 {
            match random_config(Manifold::Sphere, 4, seed, 0.99) {
                Err(Error::InitFailure { attempts, .. }) => assert!(attempts >= PLACEMENT_ATTEMPTS),
                other => panic!("expected init failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn torus_random_points_lie_on_torus() {
        let m = Manifold::torus(2.0, 1.0).unwrap();
        let c = random_config(m, 50, 3, 0.5).unwrap();
        for x in c.points() {
            let rho = x[0].hypot(x[1]);
            assert!(((rho - 2.0).powi(2) + x[2] * x[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn angles_round_trip() {
        let c = random_config(Manifold::Sphere, 40, 11, 0.5).unwrap();
        for (i, x) in c.points().iter().enumerate() {
            let (t, f) = Manifold::Sphere.angles_of(*x);
            let y = Manifold::Sphere.embed_point(t, f);
            assert!(vec3::norm(vec3::sub(*x, y)) < 1e-12, "point {i}");
            assert!(((vec3::norm(*x)) - 1.0).abs() <= 1e-12);
        }
        let m = Manifold::torus(1.5, 1.0).unwrap();
        let c = random_config(m, 40, 11, 0.5).unwrap();
        for x in c.points() {
            let (u, v) = m.angles_of(x);
            assert!(vec3::norm(vec3::sub(x, m.embed_point(u, v))) < 1e-12);
        }
    }

    #[test]
    fn alignment_moves_points_off_the_pole() {
        let mut params = tetrahedron().into_params();
        params[0] = 0.0;
        params[1] = 0.0;
        let c = Configuration::new(Manifold::Sphere, params).unwrap();
        let aligned = canonical_align(&c).unwrap();
        for i in 0..aligned.n() {
            let (t, _) = aligned.angles(i);
            assert!(t.min(PI - t) >= POLE_GUARD);
        }
        let sorted = |c: &Configuration| {
            let p = c.points();
            let mut d = vec![];
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    d.push(vec3::norm(vec3::sub(p[i], p[j])));
                }
            }
            d.sort_by(f64::total_cmp);
            d
        };
        for (a, b) in sorted(&c).iter().zip(sorted(&aligned)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_input_is_unchanged() {
        let c = random_config(Manifold::Sphere, 30, 1, 0.5).unwrap();
        if min_polar_distance(c.params()) >= POLE_GUARD {
            assert_eq!(canonical_align(&c).unwrap(), c);
        }
    }

    #[test]
    fn rigid_generators_are_orthonormal() {
        let c = random_config(Manifold::Sphere, 10, 5, 0.5).unwrap();
        let g = c.manifold().rigid_generators(c.params());
        assert_eq!(g.len(), 3);
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = g[a].iter().zip(&g[b]).map(|(x, y)| x * y).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
