//! Special functions, hexagonal-lattice constants and expansion catalogs.
//!
//! Lattice conventions: Λ is generated by (1, 0) and (1/2, √3/2), so its cell
//! area is √3/2. The dual lattice Λ* consists of the points
//! `(m, (2n - m)/√3)` for integers m, n.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_fixed};

/// Cell area of the hexagonal lattice.
pub const HEX_CELL_AREA: f64 = 0.866_025_403_784_438_6;

/// B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const EM_TERMS: usize = 24;

/// Euler–Maclaurin correction `f(K)/2 − Σ_j B_2j/(2j)! f^(2j−1)(K)` for
/// `f(x) = Σ_c w_c (3x + c)^{−α}`-type sums, given the odd derivatives.
fn em_correction(f_k: f64, odd_derivative: impl Fn(usize) -> f64) -> f64 {
    let mut out = 0.5 * f_k;
    let mut fact = 1.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let m = 2 * j + 1;
        fact *= (m * (m + 1)) as f64;
        out -= b / fact * odd_derivative(m);
    }
    out
}

/// Rising factorial (α)_m.
fn pochhammer(alpha: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |p, k| p * (alpha + k as f64))
}

/// m-th derivative of `(a x + c)^{−α}` at `x`.
fn power_derivative(alpha: f64, a: f64, c: f64, x: f64, m: usize) -> f64 {
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * pochhammer(alpha, m) * a.powi(m as i32) * (a * x + c).powf(-alpha - m as f64)
}

fn zeta_euler_maclaurin(alpha: f64) -> f64 {
    let k = EM_TERMS as f64;
    let head: f64 = (1..EM_TERMS).rev().map(|j| (j as f64).powf(-alpha)).sum();
    let tail = k.powf(1.0 - alpha) / (alpha - 1.0);
    head + tail + em_correction(k.powf(-alpha), |m| power_derivative(alpha, 1.0, 0.0, k, m))
}

/// ζ(α) = η(α)/(1 − 2^{1−α}) with Borwein's accelerated alternating series.
fn zeta_eta(alpha: f64) -> f64 {
    const N: usize = 32;
    let mut d = [0.0f64; N + 1];
    let mut term = 1.0 / N as f64;
    let mut sum = term;
    d[0] = N as f64 * sum;
    for i in 1..=N {
        term *= ((N + i - 1) as f64 * 4.0 * (N + 1 - i) as f64) / ((2 * i - 1) as f64 * (2 * i) as f64);
        sum += term;
        d[i] = N as f64 * sum;
    }
    let dn = d[N];
    let mut eta = 0.0;
    for k in (0..N).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        eta += sign * (d[k] - dn) / ((k + 1) as f64).powf(alpha);
    }
    eta = -eta / dn;
    eta / (1.0 - 2f64.powf(1.0 - alpha))
}

/// Riemann ζ for real α > 0, α ≠ 1.
pub fn riemann_zeta(alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Domain(format!("zeta is provided for 0 < α, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::Domain("zeta has a pole at α = 1".into()));
    }
    Ok(if alpha > 1.0 { zeta_euler_maclaurin(alpha) } else { zeta_eta(alpha) })
}

/// Dirichlet L-function of the non-principal character mod 3,
/// `1 − 2^{−α} + 4^{−α} − 5^{−α} + …`, for α > 0.
pub fn dirichlet_l3(alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Domain(format!("L_-3 is provided for α > 0, got {alpha}")));
    }
    let k = EM_TERMS as f64;
    let head: f64 = (0..EM_TERMS)
        .rev()
        .map(|j| {
            let j = j as f64;
            (3.0 * j + 1.0).powf(-alpha) - (3.0 * j + 2.0).powf(-alpha)
        })
        .sum();
    let a = 3.0 * k + 1.0;
    let b = 3.0 * k + 2.0;
    let lr = (b / a).ln();
    let tail = if alpha == 1.0 {
        lr / 3.0
    } else {
        a.powf(1.0 - alpha) * ((1.0 - alpha) * lr).exp_m1() / (3.0 * (1.0 - alpha))
    };
    let f_k = a.powf(-alpha) - b.powf(-alpha);
    let corr = em_correction(f_k, |m| power_derivative(alpha, 3.0, 1.0, k, m) - power_derivative(alpha, 3.0, 2.0, k, m));
    Ok(head + tail + corr)
}

/// Hexagonal-lattice zeta function `Σ_{x ∈ Λ∖0} |x|^{−s}` by the factorization
/// `6 ζ(s/2) L₋₃(s/2)`, continued analytically below s = 2.
pub fn hex_zeta(s: f64) -> Result<f64> {
    if s == 2.0 {
        return Err(Error::Domain("the hexagonal zeta function has a pole at s = 2".into()));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("hexagonal zeta is provided for s > 0, got {s}")));
    }
    Ok(6.0 * riemann_zeta(0.5 * s)? * dirichlet_l3(0.5 * s)?)
}

fn smooth_step(t: f64) -> f64 {
    // 1 at t ≤ 0, 0 at t ≥ 1, C^∞ in between.
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        psi(1.0 - t) / (psi(1.0 - t) + psi(t))
    }
}

/// Direct lattice sum for s > 2 with a smooth cutoff between `radius/2` and
/// `radius`; the removed part is restored by the continuum integral.
pub fn hex_zeta_direct(s: f64, radius: f64) -> Result<f64> {
    if !(s > 2.0) {
        return Err(Error::Domain(format!("the direct lattice sum converges only for s > 2, got {s}")));
    }
    if !(radius >= 4.0) {
        return Err(Error::Precondition("radius must be at least 4".into()));
    }
    let r0 = 0.5 * radius;
    let m_max = (1.2 * radius) as i64 + 2;
    let r2 = radius * radius;
    let mut total = 0.0;
    for n in -m_max..=m_max {
        let mut row = 0.0;
        for m in -m_max..=m_max {
            let q = (m * m + m * n + n * n) as f64;
            if q == 0.0 || q >= r2 {
                continue;
            }
            let r = q.sqrt();
            row += r.powf(-s) * smooth_step((r - r0) / (radius - r0));
        }
        total += row;
    }
    let rule = gauss_legendre(64);
    let pieces = 8;
    let h = (radius - r0) / pieces as f64;
    let missing: f64 = (0..pieces)
        .map(|k| {
            let a = r0 + k as f64 * h;
            integrate_fixed(|r| r.powf(1.0 - s) * (1.0 - smooth_step((r - r0) / (radius - r0))), a, a + h, &rule)
        })
        .sum();
    Ok(total + 2.0 * PI / HEX_CELL_AREA * (missing + radius.powf(2.0 - s) / (s - 2.0)))
}

/// Truncation parameters of the regularized lattice sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwaldTruncation {
    /// Radius of the real-space sum.
    pub real_radius: f64,
    /// Dual-lattice rows `|m| ≤ rows` are summed point by point.
    pub rows: usize,
    /// Extent along each summed row before the analytic tail takes over.
    pub row_extent: f64,
}

impl Default for EwaldTruncation {
    fn default() -> Self {
        EwaldTruncation { real_radius: 40.0, rows: 10, row_extent: 1000.0 }
    }
}

impl EwaldTruncation {
    pub fn doubled(self) -> Self {
        EwaldTruncation { real_radius: 2.0 * self.real_radius, rows: 2 * self.rows, row_extent: 2.0 * self.row_extent }
    }
}

/// Real-space part `Σ_{x ∈ Λ∖0} e^{−|x|}/|x|`.
fn screened_real_sum(radius: f64) -> f64 {
    let m_max = (1.2 * radius) as i64 + 2;
    let r2 = radius * radius;
    let mut total = 0.0;
    for n in -m_max..=m_max {
        for m in -m_max..=m_max {
            let q = (m * m + m * n + n * n) as f64;
            if q == 0.0 || q > r2 {
                continue;
            }
            let r = q.sqrt();
            total += (-r).exp() / r;
        }
    }
    total
}

/// Dual-lattice part `Σ_{ξ ∈ Λ*∖0} (1/k − 1/√(1 + k²))` with `k = 2π|ξ|`.
///
/// Rows of constant first coordinate m are summed directly up to
/// `row_extent`, the rest of each row by its closed-form antiderivative, and
/// rows beyond `rows` by their integrals, whose sum over all m is
/// `ln(sinh(½)/½)`.
fn dual_sum(trunc: EwaldTruncation) -> f64 {
    let two_pi = 2.0 * PI;
    let spacing = 2.0 / 3f64.sqrt();
    let c = 1.0 / (two_pi * two_pi);
    let phi = |m2: f64, y: f64| {
        let k = two_pi * (m2 + y * y).sqrt();
        1.0 / k - 1.0 / (1.0 + k * k).sqrt()
    };
    let mut total = 0.0;
    for m in -(trunc.rows as i64)..=(trunc.rows as i64) {
        let m2 = (m * m) as f64;
        let n_max = ((trunc.row_extent * 3f64.sqrt() + m.abs() as f64) / 2.0).ceil() as i64;
        let mut row = 0.0;
        let mut y_hi: f64 = 0.0;
        let mut y_lo: f64 = 0.0;
        for n in -n_max..=n_max {
            if m == 0 && n == 0 {
                continue;
            }
            let y = (2 * n - m) as f64 / 3f64.sqrt();
            row += phi(m2, y);
            y_hi = y_hi.max(y);
            y_lo = y_lo.min(y);
        }
        // Midpoint cut half a spacing beyond the last summed point.
        let tail = |y: f64| -> f64 {
            if m == 0 {
                let f0 = |y: f64| (y.ln() - (two_pi * y).asinh()) / two_pi;
                -(4.0 * PI).ln() / two_pi - f0(y)
            } else {
                let am = m.unsigned_abs() as f64;
                let b = (m2 + c).sqrt();
                ((b / am).ln() - (y / am).asinh() + (y / b).asinh()) / two_pi
            }
        };
        row += (tail(y_hi + 0.5 * spacing) + tail(-y_lo + 0.5 * spacing)) / spacing;
        total += row;
    }
    let full: f64 = (0.5f64.sinh() / 0.5).ln();
    let summed: f64 = (1..=trunc.rows).map(|m| (1.0 + c / (m * m) as f64).ln()).sum();
    total + 2.0 * (full - summed) / (2.0 * PI * spacing)
}

/// The regularized hexagonal lattice sum at s = 1 from its Poisson-summation
/// representation,
/// `Σ_Λ e^{−|x|}/|x| + (2π/|Λ|) Σ_{Λ*} (1/k − 1/√(1+k²)) − 2π/|Λ| − 1`.
/// Its value coincides with the continued `hex_zeta(1)`.
pub fn hex_lattice_regularized_sum_with(trunc: EwaldTruncation) -> f64 {
    let k = 2.0 * PI / HEX_CELL_AREA;
    screened_real_sum(trunc.real_radius) + k * dual_sum(trunc) - k - 1.0
}

pub fn hex_lattice_regularized_sum() -> f64 {
    hex_lattice_regularized_sum_with(EwaldTruncation::default())
}

/// Lattice constant C entering the second-order s = 1 coefficient; half the
/// regularized lattice sum.
pub fn ewald_c() -> f64 {
    0.5 * hex_lattice_regularized_sum()
}

/// `6 (√3/8π)^{s/2} ζ(s/2) L₋₃(s/2)` for 0 < s < 2.
pub fn cs_coefficient(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::Domain(format!("C_s is defined here for 0 < s < 2, got {s}")));
    }
    Ok((3f64.sqrt() / (8.0 * PI)).powf(0.5 * s) * hex_zeta(s)?)
}

/// Functions of N used as expansion terms, in decreasing order of growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    N5_2,
    N2LogN,
    N2,
    N3_2,
    NLogN,
    N,
    N1_2,
    LogN,
    One,
}

impl Basis {
    pub const ALL: [Basis; 9] =
        [Basis::N5_2, Basis::N2LogN, Basis::N2, Basis::N3_2, Basis::NLogN, Basis::N, Basis::N1_2, Basis::LogN, Basis::One];

    pub fn eval(self, n: f64) -> f64 {
        match self {
            Basis::N5_2 => n * n * n.sqrt(),
            Basis::N2LogN => n * n * n.ln(),
            Basis::N2 => n * n,
            Basis::N3_2 => n * n.sqrt(),
            Basis::NLogN => n * n.ln(),
            Basis::N => n,
            Basis::N1_2 => n.sqrt(),
            Basis::LogN => n.ln(),
            Basis::One => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::N5_2 => "N^5/2",
            Basis::N2LogN => "N^2logN",
            Basis::N2 => "N^2",
            Basis::N3_2 => "N^3/2",
            Basis::NLogN => "NlogN",
            Basis::N => "N",
            Basis::N1_2 => "N^1/2",
            Basis::LogN => "logN",
            Basis::One => "1",
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace() && *c != '*').collect::<String>().to_ascii_lowercase();
        let b = match key.as_str() {
            "n^5/2" | "n^2.5" | "n5_2" => Basis::N5_2,
            "n^2logn" | "n2logn" => Basis::N2LogN,
            "n^2" | "n2" => Basis::N2,
            "n^3/2" | "n^1.5" | "n3_2" => Basis::N3_2,
            "nlogn" => Basis::NLogN,
            "n" => Basis::N,
            "n^1/2" | "n^0.5" | "sqrtn" | "sqrt(n)" | "n1_2" => Basis::N1_2,
            "logn" | "log(n)" => Basis::LogN,
            "1" | "one" | "const" => Basis::One,
            _ => return Err(Error::Precondition(format!("unknown basis term `{s}`"))),
        };
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Proven,
    Conjectured,
    /// Value taken from a least-squares fit.
    Empirical,
    /// Unknown; to be fitted.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub basis: Basis,
    /// Value used when the term is held fixed; `None` for free terms.
    pub coefficient: Option<f64>,
    pub provenance: Provenance,
    /// Conjectured value of a free coefficient, where one exists.
    pub conjectured: Option<f64>,
    /// Reported best-fit value from full-scale minimal-energy data.
    pub fitted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCatalog {
    pub s: u32,
    pub terms: Vec<ExpansionTerm>,
}

impl ExpansionCatalog {
    /// Sum of the first `k` terms at `n`; fails if any of them is free.
    pub fn partial_sum(&self, k: usize, n: f64) -> Result<f64> {
        if k > self.terms.len() {
            return Err(Error::Precondition(format!("catalog has only {} terms", self.terms.len())));
        }
        self.terms[..k].iter().try_fold(0.0, |acc, t| match t.coefficient {
            Some(c) if t.provenance != Provenance::Free => Ok(acc + c * t.basis.eval(n)),
            _ => Err(Error::Precondition(format!("term {} has no known coefficient", t.basis.label()))),
        })
    }
}

fn known(basis: Basis, value: f64, provenance: Provenance) -> ExpansionTerm {
    ExpansionTerm { basis, coefficient: Some(value), provenance, conjectured: None, fitted: None }
}

fn free(basis: Basis, conjectured: Option<f64>, fitted: Option<f64>) -> ExpansionTerm {
    ExpansionTerm { basis, coefficient: None, provenance: Provenance::Free, conjectured, fitted }
}

/// Known and free terms of the minimal-energy expansion on the sphere for
/// s ∈ {0, 1, 2, 3}, in the ordered-pair energy convention.
pub fn expansion_catalog(s: u32) -> Result<ExpansionCatalog> {
    use Basis::*;
    use Provenance::*;
    let terms = match s {
        0 => vec![
            known(N2, -0.5 * (4.0 / std::f64::consts::E).ln(), Proven),
            known(NLogN, -0.5, Proven),
            free(N, Some(-0.055605), Some(-0.0547)),
            free(LogN, None, Some(0.6000)),
            free(One, None, Some(-2.680)),
        ],
        1 => vec![
            known(N2, 1.0, Proven),
            known(N3_2, cs_coefficient(1.0)?, Conjectured),
            free(N, None, Some(0.05123)),
            free(N1_2, None, Some(-0.3207)),
        ],
        2 => vec![
            known(N2LogN, 0.25, Proven),
            ExpansionTerm { fitted: Some(-0.085079), ..known(N2, -0.085_768_410_300_902_483_65, Conjectured) },
            free(NLogN, None, Some(0.4415)),
            free(N, None, None),
            free(LogN, None, None),
            free(One, None, None),
        ],
        3 => vec![
            known(N5_2, (3f64.sqrt() / (8.0 * PI)).powf(1.5) * hex_zeta(3.0)?, Conjectured),
            ExpansionTerm { fitted: Some(-0.22), ..known(N2, -0.25, Conjectured) },
            free(N3_2, None, None),
            free(N, None, None),
            free(N1_2, None, None),
        ],
        _ => return Err(Error::Unsupported(format!("no expansion catalog for s = {s}"))),
    };
    Ok(ExpansionCatalog { s, terms })
}
