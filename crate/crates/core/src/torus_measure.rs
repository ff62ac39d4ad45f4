//! Equilibrium measure of the s = 1 energy on a torus of revolution.
//!
//! The exact energy comes from a series of ratios of toroidal Legendre
//! functions `Q_{n−1/2}(l/a) / P_{n−1/2}(l/a)`. Independently, the measure is
//! computed numerically: by rotational symmetry it is described by a density
//! in the tube angle v alone, and the azimuthally averaged kernel between two
//! circles of the torus reduces to a complete elliptic integral. The density
//! is approximated by cell-wise constant weights on a uniform v grid
//! (Galerkin), and the constrained quadratic energy is minimized exactly.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constants::ewald_c;
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::quadrature::{gauss_legendre, integrate_fixed};

/// Complete elliptic integrals K(m) and E(m) given the complementary
/// parameter `m1 = 1 − m`, by the arithmetic-geometric mean.
pub fn elliptic_ke_complement(m1: f64) -> (f64, f64) {
    let mut a = 1.0f64;
    let mut b = m1.sqrt();
    let mut pow = 0.5;
    let mut sum = 0.5 * (1.0 - m1);
    for _ in 0..64 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
        if c.abs() <= 1e-9 * a {
            break;
        }
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// Complete elliptic integral of the first kind, parameter convention.
pub fn ellip_k(m: f64) -> f64 {
    elliptic_ke_complement(1.0 - m).0
}

/// Complete elliptic integral of the second kind, parameter convention.
pub fn ellip_e(m: f64) -> f64 {
    elliptic_ke_complement(1.0 - m).1
}

/// A double held as `mant · 2^exp2` so that very large or very small
/// Legendre function values stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: f64,
    pub exp2: i32,
}

impl Scaled {
    fn new(x: f64) -> Self {
        Scaled { mant: x, exp2: 0 }.normalized()
    }

    fn normalized(self) -> Self {
        if self.mant == 0.0 || !self.mant.is_finite() {
            return self;
        }
        let e = self.mant.abs().log2().floor() as i32;
        Scaled { mant: self.mant * 2f64.powi(-e), exp2: self.exp2 + e }
    }

    /// Value as a plain double; may overflow to infinity or underflow to zero.
    pub fn value(self) -> f64 {
        self.mant * 2f64.powi(self.exp2.clamp(-1100, 1100))
    }

    pub fn ratio(self, other: Scaled) -> f64 {
        (self.mant / other.mant) * 2f64.powi((self.exp2 - other.exp2).clamp(-1100, 1100))
    }
}

/// `P_{n−1/2}(z)` and `Q_{n−1/2}(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToroidalFunctionPair {
    pub n: usize,
    pub z: f64,
    pub p: Scaled,
    pub q: Scaled,
}

impl ToroidalFunctionPair {
    pub fn ratio(&self) -> f64 {
        self.q.ratio(self.p)
    }
}

/// Degree-zero and degree-one seeds from complete elliptic integrals.
fn seeds(z: f64) -> ([f64; 2], [f64; 2]) {
    let w = (z * z - 1.0).sqrt();
    let zw = z + w;
    // P: modulus k² = 2w/(z+w), complement (z−w)/(z+w) = 1/(z+w)².
    let (kp, ep) = elliptic_ke_complement(1.0 / (zw * zw));
    let p0 = 2.0 / PI * kp / zw.sqrt();
    let p1 = 2.0 / PI * zw.sqrt() * ep;
    // Q: parameter 2/(z+1), complement (z−1)/(z+1).
    let m = 2.0 / (z + 1.0);
    let (kq, eq) = elliptic_ke_complement((z - 1.0) / (z + 1.0));
    let q0 = m.sqrt() * kq;
    let q1 = z * m.sqrt() * kq - (2.0 * (z + 1.0)).sqrt() * eq;
    ([p0, p1], [q0, q1])
}

const RESCALE: f64 = 1e200;

/// `P_{k−1/2}(z), Q_{k−1/2}(z)` for `k = 0..=n_max`.
pub fn toroidal_table(n_max: usize, z: f64) -> Result<Vec<ToroidalFunctionPair>> {
    if !(z > 1.0) || !z.is_finite() {
        return Err(Error::Domain(format!("toroidal functions need z > 1, got {z}")));
    }
    let ([p0, p1], [q0, q1]) = seeds(z);
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(Scaled::new(p0));
    if n_max >= 1 {
        p.push(Scaled::new(p1));
    }
    // Forward recurrence, dominant for P.
    let (mut pm, mut pc, mut e) = (p0, p1, 0i32);
    for k in 1..n_max {
        let kf = k as f64;
        let pn = (2.0 * kf * z * pc - (kf - 0.5) * pm) / (kf + 0.5);
        pm = pc;
        pc = pn;
        if pc.abs() > RESCALE {
            let s = pc.abs().log2().floor() as i32;
            pc *= 2f64.powi(-s);
            pm *= 2f64.powi(-s);
            e += s;
        }
        p.push(Scaled { mant: pc, exp2: e }.normalized());
    }
    // Backward (Miller) recurrence for the minimal solution Q.
    let offset = (40.0 / z.acosh()).ceil() as usize + 10;
    let top = n_max + offset;
    let mut q = vec![Scaled { mant: 0.0, exp2: 0 }; n_max + 1];
    let (mut qn, mut qc, mut e) = (0.0f64, 1e-300f64, 0i32);
    for k in (1..=top).rev() {
        if k <= n_max {
            q[k] = Scaled { mant: qc, exp2: e }.normalized();
        }
        let kf = k as f64;
        let qm = (2.0 * kf * z * qc - (kf + 0.5) * qn) / (kf - 0.5);
        qn = qc;
        qc = qm;
        if qc.abs() > RESCALE {
            let s = qc.abs().log2().floor() as i32;
            qc *= 2f64.powi(-s);
            qn *= 2f64.powi(-s);
            e += s;
        }
    }
    q[0] = Scaled { mant: qc, exp2: e }.normalized();
    // Normalize against Q_{-1/2}; use Q_{1/2} instead if it is better scaled.
    let norm = Scaled::new(q0).ratio(q[0]);
    let _ = q1;
    let out = (0..=n_max)
        .map(|k| {
            let qk = Scaled { mant: q[k].mant * norm, exp2: q[k].exp2 }.normalized();
            ToroidalFunctionPair { n: k, z, p: p[k], q: qk }
        })
        .collect();
    Ok(out)
}

/// `P_{n−1/2}(z)` and `Q_{n−1/2}(z)` for a single degree.
pub fn toroidal_pq(n: usize, z: f64) -> Result<ToroidalFunctionPair> {
    Ok(toroidal_table(n, z)?[n])
}

const SERIES_CAP: usize = 100_000;

/// Exact s = 1 equilibrium energy of the torus with major radius `l` and
/// minor radius `a`.
pub fn landkof_energy(l: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && l > a && l.is_finite()) {
        return Err(Error::Domain(format!("Landkof energy needs l > a > 0, got l = {l}, a = {a}")));
    }
    let z = l / a;
    let c = (l * l - a * a).sqrt();
    let mut n_max = 64;
    loop {
        let table = toroidal_table(n_max, z)?;
        let mut sum = table[0].ratio();
        let mut done = false;
        for t in &table[1..] {
            let term = 2.0 * t.ratio();
            sum += term;
            if term < 1e-14 * sum {
                done = true;
                break;
            }
        }
        if done {
            return Ok(PI / (2.0 * c * sum));
        }
        if n_max >= SERIES_CAP {
            return Err(Error::Domain(format!("Landkof series did not converge for l/a = {z}")));
        }
        n_max *= 4;
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    l: f64,
    a: f64,
}

fn validate_torus(l: f64, a: f64) -> Result<Geometry> {
    Manifold::torus(l, a)?;
    Ok(Geometry { l, a })
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

impl Geometry {
    /// `(D, m1)` for circles at tube angles v and w.
    fn chord(&self, v: f64, w: f64) -> (f64, f64, f64) {
        let rv = self.l + self.a * v.cos();
        let rw = self.l + self.a * w.cos();
        let dz = self.a * (v.sin() - w.sin());
        let d_big2 = (rv + rw).powi(2) + dz * dz;
        let half = 0.5 * wrap_pi(v - w);
        let d2 = 4.0 * self.a * self.a * half.sin().powi(2);
        (d_big2.sqrt(), d2 / d_big2, half)
    }

    fn kernel(&self, v: f64, w: f64) -> f64 {
        let (d_big, m1, _) = self.chord(v, w);
        2.0 / (PI * d_big) * elliptic_ke_complement(m1).0
    }

    /// Splits the kernel as `g · (−ln|Δv|) + r` with g and r smooth.
    fn split(&self, v: f64, w: f64) -> (f64, f64) {
        let (d_big, m1, half) = self.chord(v, w);
        let (kc, h) = log_split(m1);
        let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
        let pre = 2.0 / (PI * d_big);
        let g = pre * kc;
        let r = pre * (kc * (d_big.ln() - (self.a * sinc.abs()).ln()) + h);
        (g, r)
    }
}

/// `K(m) = (2/π)K(m1) · ln(1/√m1) + H(m1)`; returns `((2/π)K(m1), H(m1))`.
fn log_split(m1: f64) -> (f64, f64) {
    let kc = 2.0 / PI * elliptic_ke_complement(1.0 - m1).0;
    if m1 > 0.1 {
        let km = elliptic_ke_complement(m1).0;
        return (kc, km + 0.5 * kc * m1.ln());
    }
    let mut c = 1.0;
    let mut d = 2.0 * LN_2;
    let mut pow = 1.0;
    let mut h = d;
    for k in 1..60 {
        let kf = k as f64;
        c *= ((kf - 0.5) / kf).powi(2);
        d -= 1.0 / (kf * (2.0 * kf - 1.0));
        pow *= m1;
        let term = c * d * pow;
        h += term;
        if term.abs() < 1e-18 * h.abs() {
            break;
        }
    }
    (kc, h)
}

/// Azimuthal average over u of the s = 1 kernel between the circles at tube
/// angles `v` and `w` of the torus `(l, a)`.
pub fn revolution_kernel(l: f64, a: f64, v: f64, w: f64) -> Result<f64> {
    let geom = validate_torus(l, a)?;
    if wrap_pi(v - w) == 0.0 {
        return Err(Error::Domain("coincident circles: the kernel is singular".into()));
    }
    Ok(geom.kernel(v, w))
}

/// `∫_lo^hi −ln|x| dx`.
fn neg_log_integral(lo: f64, hi: f64) -> f64 {
    let f = |x: f64| if x == 0.0 { 0.0 } else { x * x.abs().ln() - x };
    -(f(hi) - f(lo))
}

struct Rules {
    near: (Vec<f64>, Vec<f64>),
    outer: (Vec<f64>, Vec<f64>),
    mid: (Vec<f64>, Vec<f64>),
    far: (Vec<f64>, Vec<f64>),
}

impl Rules {
    fn new() -> Self {
        Rules { near: gauss_legendre(24), outer: gauss_legendre(16), mid: gauss_legendre(6), far: gauss_legendre(3) }
    }
}

/// `∫_lo^hi K(v, t) dt` for an interval within a few cells of v, with the
/// logarithmic singularity integrated analytically.
fn near_integral(geom: &Geometry, rules: &Rules, v: f64, lo: f64, hi: f64) -> f64 {
    let (g0, _) = geom.split(v, v);
    let smooth = |t: f64| {
        let (g, r) = geom.split(v, t);
        let x = (t - v).abs();
        let lg = if x == 0.0 { 0.0 } else { -x.ln() };
        (g - g0) * lg + r
    };
    let pieces: Vec<(f64, f64)> = if lo < v && v < hi { vec![(lo, v), (v, hi)] } else { vec![(lo, hi)] };
    let regular: f64 = pieces.iter().map(|&(a, b)| integrate_fixed(smooth, a, b, &rules.near)).sum();
    regular + g0 * neg_log_integral(lo - v, hi - v)
}

/// `∫ K(v, t) dt` over cell `k`, choosing the rule by distance.
fn cell_integral(geom: &Geometry, rules: &Rules, grid: &Grid, v: f64, k: usize) -> f64 {
    let center = grid.center(k);
    let shift = v + wrap_pi(center - v) - center;
    let (lo, hi) = (grid.lo(k) + shift, grid.lo(k) + grid.h + shift);
    let dist = (wrap_pi(center - v)).abs() / grid.h;
    if dist <= 1.5 {
        near_integral(geom, rules, v, lo, hi)
    } else if dist <= 8.5 {
        integrate_fixed(|t| geom.kernel(v, t), lo, hi, &rules.mid)
    } else {
        integrate_fixed(|t| geom.kernel(v, t), lo, hi, &rules.far)
    }
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    m: usize,
    h: f64,
}

impl Grid {
    fn new(m: usize) -> Self {
        Grid { m, h: 2.0 * PI / m as f64 }
    }

    fn lo(&self, j: usize) -> f64 {
        j as f64 * self.h - PI
    }

    fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h - PI
    }

    fn cyclic_distance(&self, j: usize, k: usize) -> usize {
        let d = j.abs_diff(k);
        d.min(self.m - d)
    }
}

/// Cell-averaged kernel matrix `A_jk = h⁻² ∫_j ∫_k K`.
fn assemble(geom: &Geometry, grid: &Grid) -> DMatrix<f64> {
    let rules = Rules::new();
    let m = grid.m;
    let h2 = grid.h * grid.h;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = (grid.lo(j), grid.lo(j) + grid.h);
            (j..m)
                .map(|k| {
                    let dist = grid.cyclic_distance(j, k);
                    let rule = if dist <= 1 {
                        &rules.outer
                    } else if dist <= 8 {
                        &rules.mid
                    } else {
                        &rules.far
                    };
                    integrate_fixed(|v| cell_integral(geom, &rules, grid, v, k), lo, hi, rule) / h2
                })
                .collect()
        })
        .collect();
    let mut a = DMatrix::zeros(m, m);
    for (j, row) in rows.iter().enumerate() {
        for (off, &val) in row.iter().enumerate() {
            a[(j, j + off)] = val;
            a[(j + off, j)] = val;
        }
    }
    a
}

/// Discretized rotation-invariant equilibrium measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub l: f64,
    pub a: f64,
    /// Cell centers in tube angle, ascending in (−π, π).
    pub v: Vec<f64>,
    /// Cell masses, summing to one.
    pub weights: Vec<f64>,
    /// Surface density with respect to area at each cell center.
    pub density: Vec<f64>,
    pub energy: f64,
    /// Set when negative weights forced a constrained re-solve.
    pub constrained: bool,
}

impl DensityProfile {
    pub fn m(&self) -> usize {
        self.v.len()
    }
}

fn constrained_weights(a: &DMatrix<f64>) -> Result<(DVector<f64>, bool)> {
    let m = a.nrows();
    let mut active: Vec<usize> = (0..m).collect();
    let mut constrained = false;
    loop {
        let sub = DMatrix::from_fn(active.len(), active.len(), |r, c| a[(active[r], active[c])]);
        let chol = sub.cholesky().ok_or_else(|| {
            Error::Discretization("kernel matrix is not positive definite; increase M".into())
        })?;
        let y = chol.solve(&DVector::from_element(active.len(), 1.0));
        let total: f64 = y.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Discretization("kernel system is singular; increase M".into()));
        }
        if y.iter().all(|&x| x >= 0.0) {
            let mut q = DVector::zeros(m);
            for (k, &idx) in active.iter().enumerate() {
                q[idx] = y[k] / total;
            }
            return Ok((q, constrained));
        }
        constrained = true;
        active = active.iter().zip(y.iter()).filter(|(_, &x)| x > 0.0).map(|(&i, _)| i).collect();
        if active.is_empty() {
            return Err(Error::Discretization("no admissible weights remain".into()));
        }
    }
}

/// Minimizes the discretized energy over cell masses on an `m`-cell grid of
/// tube angles.
pub fn solve_equilibrium(l: f64, a: f64, m: usize) -> Result<DensityProfile> {
    let geom = validate_torus(l, a)?;
    if m < 100 {
        return Err(Error::Precondition(format!("at least 100 cells are required, got {m}")));
    }
    let grid = Grid::new(m);
    let mat = assemble(&geom, &grid);
    let (q, constrained) = constrained_weights(&mat)?;
    if constrained {
        log::warn!("equilibrium solve produced negative weights; used the constrained fallback");
    }
    let energy = (&q).dot(&(&mat * &q));
    let v: Vec<f64> = (0..m).map(|j| grid.center(j)).collect();
    let density = v
        .iter()
        .zip(q.iter())
        .map(|(&vj, &w)| w / (2.0 * PI * a * (l + a * vj.cos()) * grid.h))
        .collect();
    Ok(DensityProfile { l, a, v, weights: q.iter().copied().collect(), density, energy, constrained })
}

/// Potential `∫ K(v, t) dμ(t)` of the discretized measure at tube angle `v`.
pub fn potential(profile: &DensityProfile, v: f64) -> Result<f64> {
    let geom = validate_torus(profile.l, profile.a)?;
    let grid = Grid::new(profile.m());
    let rules = Rules::new();
    Ok(profile
        .weights
        .iter()
        .enumerate()
        .map(|(k, &w)| w / grid.h * cell_integral(&geom, &rules, &grid, v, k))
        .sum())
}

/// Second-order s = 1 coefficient `2 C √(√3/2) ∫ √(dμ/dH) dμ`. The sphere
/// uses the uniform measure; a torus needs a solved density profile.
pub fn second_term_coefficient(manifold: &Manifold, profile: Option<&DensityProfile>) -> Result<f64> {
    let pre = 2.0 * ewald_c() * (3f64.sqrt() / 2.0).sqrt();
    match *manifold {
        Manifold::Sphere => Ok(pre / (4.0 * PI).sqrt()),
        Manifold::Torus { major, minor } => {
            let p = profile.ok_or_else(|| Error::Precondition("a torus needs an equilibrium density profile".into()))?;
            if p.l != major || p.a != minor {
                return Err(Error::Precondition("density profile belongs to a different torus".into()));
            }
            let integral: f64 = p.weights.iter().zip(&p.density).map(|(w, d)| w * d.max(0.0).sqrt()).sum();
            Ok(pre * integral)
        }
    }
}
