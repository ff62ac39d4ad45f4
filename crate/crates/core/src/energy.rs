//! Riesz s-energy, point energies and analytic angle derivatives.
//!
//! The energy sums over ordered pairs, so each unordered pair is counted
//! twice. Kernels are evaluated as functions of the squared distance
//! `q = |x_i - x_j|^2`, which keeps the chain rule through the embedding short:
//! with `f(q) = k_s(sqrt q)` and `d = x_i - x_j`,
//!
//! ```text
//! dE/dx_i          = 4 Σ_j f'(q) d
//! d²E/dx_i dx_j    = -4 (f'(q) I + 2 f''(q) d dᵀ)        (i ≠ j)
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{polar_distance, Configuration, Manifold, POLE_GUARD};
use crate::summation::BinnedAccumulator;
use crate::vec3::{self, Vec3};

const PAR_THRESHOLD: usize = 128;

/// Riesz exponent; `s = 0` selects the logarithmic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RieszParam(f64);

impl RieszParam {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s >= 0.0 {
            Ok(RieszParam(s))
        } else {
            Err(Error::Domain(format!("Riesz exponent must be finite and non-negative, got {s}")))
        }
    }

    pub fn s(self) -> f64 {
        self.0
    }

    pub fn is_log(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for RieszParam {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        RieszParam::new(s)
    }
}

impl From<RieszParam> for f64 {
    fn from(p: RieszParam) -> f64 {
        p.0
    }
}

/// Kernel value at distance `r`: `r^-s`, or `-ln r` for `s = 0`.
pub fn kernel(s: RieszParam, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("kernel distance must be positive and finite, got {r}")));
    }
    Ok(if s.is_log() { -r.ln() } else { r.powf(-s.0) })
}

/// Kernel as a function of squared distance, with two derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Kern {
    Log,
    S1,
    S2,
    S3,
    Pow(f64),
}

impl Kern {
    pub(crate) fn of(s: RieszParam) -> Kern {
        match s.0 {
            x if x == 0.0 => Kern::Log,
            x if x == 1.0 => Kern::S1,
            x if x == 2.0 => Kern::S2,
            x if x == 3.0 => Kern::S3,
            x => Kern::Pow(0.5 * x),
        }
    }

    #[inline]
    pub(crate) fn f(self, q: f64) -> f64 {
        match self {
            Kern::Log => -0.5 * q.ln(),
            Kern::S1 => 1.0 / q.sqrt(),
            Kern::S2 => 1.0 / q,
            Kern::S3 => 1.0 / (q * q.sqrt()),
            Kern::Pow(h) => q.powf(-h),
        }
    }

    #[inline]
    pub(crate) fn df(self, q: f64) -> f64 {
        match self {
            Kern::Log => -0.5 / q,
            Kern::S1 => -0.5 / (q * q.sqrt()),
            Kern::S2 => -1.0 / (q * q),
            Kern::S3 => -1.5 / (q * q * q.sqrt()),
            Kern::Pow(h) => -h * q.powf(-h - 1.0),
        }
    }

    /// First and second derivatives.
    #[inline]
    pub(crate) fn d12(self, q: f64) -> (f64, f64) {
        match self {
            Kern::Log => (-0.5 / q, 0.5 / (q * q)),
            Kern::S1 => {
                let a = 1.0 / (q * q.sqrt());
                (-0.5 * a, 0.75 * a / q)
            }
            Kern::S2 => {
                let a = 1.0 / (q * q);
                (-a, 2.0 * a / q)
            }
            Kern::S3 => {
                let a = 1.0 / (q * q * q.sqrt());
                (-1.5 * a, 3.75 * a / q)
            }
            Kern::Pow(h) => {
                let a = q.powf(-h - 1.0);
                (-h * a, h * (h + 1.0) * a / q)
            }
        }
    }
}

/// Total energy and the energy of each point against all others.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub point_energies: Vec<f64>,
}

fn row_energy(kern: Kern, points: &[Vec3], i: usize, acc: &mut BinnedAccumulator) -> Result<f64> {
    acc.reset();
    let xi = points[i];
    for (j, &xj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let q = vec3::norm2(vec3::sub(xi, xj));
        if q <= 0.0 {
            return Err(Error::Degenerate { i: i.min(j), j: i.max(j) });
        }
        acc.add(kern.f(q));
    }
    acc.finish()
}

/// Point energies and their total, both binned.
pub fn total_energy(config: &Configuration, s: RieszParam) -> Result<EnergyBreakdown> {
    breakdown_of_points(&config.points(), s)
}

pub(crate) fn breakdown_of_points(points: &[Vec3], s: RieszParam) -> Result<EnergyBreakdown> {
    let kern = Kern::of(s);
    let n = points.len();
    let point_energies: Vec<f64> = if n >= PAR_THRESHOLD {
        (0..n)
            .into_par_iter()
            .map_init(BinnedAccumulator::new, |acc, i| row_energy(kern, points, i, acc))
            .collect::<Result<_>>()?
    } else {
        let mut acc = BinnedAccumulator::new();
        (0..n).map(|i| row_energy(kern, points, i, &mut acc)).collect::<Result<_>>()?
    };
    let total = crate::summation::binned_sum(point_energies.iter().copied())?;
    Ok(EnergyBreakdown { total, point_energies })
}

fn upper_row(kern: Kern, points: &[Vec3], i: usize, acc: &mut BinnedAccumulator) -> Result<()> {
    let xi = points[i];
    for (j, &xj) in points.iter().enumerate().skip(i + 1) {
        let q = vec3::norm2(vec3::sub(xi, xj));
        if q <= 0.0 {
            return Err(Error::Degenerate { i, j });
        }
        acc.add(kern.f(q));
    }
    Ok(())
}

/// Total energy from raw angles, summing each unordered pair once.
pub(crate) fn energy_of_params(manifold: &Manifold, params: &[f64], s: RieszParam) -> Result<f64> {
    let points = crate::manifold::embed_params(manifold, params);
    let kern = Kern::of(s);
    let n = points.len();
    let acc = if n >= PAR_THRESHOLD {
        (0..n)
            .into_par_iter()
            .try_fold(BinnedAccumulator::new, |mut acc, i| {
                upper_row(kern, &points, i, &mut acc)?;
                Ok::<_, Error>(acc)
            })
            .try_reduce(BinnedAccumulator::new, |mut a, b| {
                a.merge(&b);
                Ok(a)
            })?
    } else {
        let mut acc = BinnedAccumulator::new();
        for i in 0..n {
            upper_row(kern, &points, i, &mut acc)?;
        }
        acc
    };
    Ok(2.0 * acc.finish()?)
}

pub(crate) fn check_pole_guard(manifold: &Manifold, params: &[f64]) -> Result<()> {
    if manifold.is_sphere() {
        for (point, p) in params.chunks_exact(2).enumerate() {
            let polar = polar_distance(p[0]);
            if polar < POLE_GUARD {
                return Err(Error::AlignmentRequired { point, polar_distance: polar });
            }
        }
    }
    Ok(())
}

fn cartesian_row(kern: Kern, points: &[Vec3], i: usize) -> Vec3 {
    let xi = points[i];
    let mut g = [0.0; 3];
    for (j, &xj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = vec3::sub(xi, xj);
        let c = 4.0 * kern.df(vec3::norm2(d));
        g[0] += c * d[0];
        g[1] += c * d[1];
        g[2] += c * d[2];
    }
    g
}

/// Gradient with respect to embedded coordinates, one row per point.
/// Each row is summed in a fixed order so results do not depend on the
/// number of worker threads.
pub(crate) fn cartesian_gradient(points: &[Vec3], s: RieszParam) -> Vec<Vec3> {
    let kern = Kern::of(s);
    let n = points.len();
    if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(|i| cartesian_row(kern, points, i)).collect()
    } else {
        (0..n).map(|i| cartesian_row(kern, points, i)).collect()
    }
}

/// Angle gradient from raw parameters without the pole check.
pub(crate) fn gradient_params(manifold: &Manifold, params: &[f64], s: RieszParam) -> Vec<f64> {
    let frames: Vec<_> = params.chunks_exact(2).map(|p| manifold.frame(p[0], p[1])).collect();
    let points: Vec<Vec3> = frames.iter().map(|f| f.x).collect();
    let gx = cartesian_gradient(&points, s);
    let mut g = Vec::with_capacity(params.len());
    for (f, gi) in frames.iter().zip(&gx) {
        g.push(vec3::dot(*gi, f.d[0]));
        g.push(vec3::dot(*gi, f.d[1]));
    }
    g
}

/// Analytic gradient with respect to the `2n` angles.
pub fn gradient(config: &Configuration, s: RieszParam) -> Result<Vec<f64>> {
    check_pole_guard(&config.manifold(), config.params())?;
    let g = gradient_params(&config.manifold(), config.params(), s);
    if let Some(k) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {k}")));
    }
    Ok(g)
}

pub(crate) fn hessian_params(manifold: &Manifold, params: &[f64], s: RieszParam) -> DMatrix<f64> {
    let kern = Kern::of(s);
    let n = params.len() / 2;
    let frames: Vec<_> = params.chunks_exact(2).map(|p| manifold.frame(p[0], p[1])).collect();
    let points: Vec<Vec3> = frames.iter().map(|f| f.x).collect();
    let gx = cartesian_gradient(&points, s);

    // Rows of the Hessian for point i: the two angle rows against all 2n columns.
    let block_rows = |i: usize| -> Vec<f64> {
        let fi = &frames[i];
        let mut rows = vec![0.0; 4 * n];
        let mut diag = [[0.0; 3]; 3];
        for (j, fj) in frames.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = vec3::sub(fi.x, fj.x);
            let (f1, f2) = kern.d12(vec3::norm2(d));
            // b = -4 (f1 I + 2 f2 d dᵀ)
            let mut b = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    b[r][c] = -8.0 * f2 * d[r] * d[c];
                }
                b[r][r] -= 4.0 * f1;
            }
            for r in 0..3 {
                for c in 0..3 {
                    diag[r][c] -= b[r][c];
                }
            }
            for a in 0..2 {
                let left = vec3::mat_vec(&b, fj.d[0]);
                let right = vec3::mat_vec(&b, fj.d[1]);
                rows[a * 2 * n + 2 * j] = vec3::dot(fi.d[a], left);
                rows[a * 2 * n + 2 * j + 1] = vec3::dot(fi.d[a], right);
            }
        }
        let g = gx[i];
        let second = [vec3::dot(g, fi.dd[0]), vec3::dot(g, fi.dd[1]), vec3::dot(g, fi.dd[2])];
        for a in 0..2 {
            for c in 0..2 {
                let bd = vec3::mat_vec(&diag, fi.d[c]);
                rows[a * 2 * n + 2 * i + c] = vec3::dot(fi.d[a], bd) + second[a + c];
            }
        }
        rows
    };

    let blocks: Vec<Vec<f64>> = if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(block_rows).collect()
    } else {
        (0..n).map(block_rows).collect()
    };
    let dim = 2 * n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (i, rows) in blocks.iter().enumerate() {
        for a in 0..2 {
            for c in 0..dim {
                h[(2 * i + a, c)] = rows[a * dim + c];
            }
        }
    }
    for r in 0..dim {
        for c in r + 1..dim {
            let m = 0.5 * (h[(r, c)] + h[(c, r)]);
            h[(r, c)] = m;
            h[(c, r)] = m;
        }
    }
    h
}

/// Analytic Hessian with respect to the `2n` angles; exactly symmetric.
pub fn hessian(config: &Configuration, s: RieszParam) -> Result<DMatrix<f64>> {
    check_pole_guard(&config.manifold(), config.params())?;
    let h = hessian_params(&config.manifold(), config.params(), s);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Hessian entry".into()));
    }
    Ok(h)
}
