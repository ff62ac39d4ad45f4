//! Hessian spectra and the gradient/eigenvalue stability certificate.
//!
//! At a critical point the Hessian in angle coordinates has `r` zero modes
//! from rigid motions (`r = 3` on the sphere, `r = 1` on the torus). The
//! certificate looks at λ*, the `(r+1)`-th smallest eigenvalue. In strict mode
//! a configuration is stable when `‖∇E‖ / λ* ≤ min_sep / 10⁴`; in relaxed mode
//! it is stable when λ* lies above the zero band. A negative mode shifts one of
//! the rigid zeros into position `r`, so it always fails both tests.

use serde::{Deserialize, Serialize};

use crate::energy::{self, RieszParam};
use crate::error::{Error, Result};
use crate::manifold::{min_separation, Configuration};

/// Relative width of the band around zero attributed to rigid modes.
pub const ZERO_BAND: f64 = 1e-8;

/// Parameter count above which [`CertifyMode::Auto`] relaxes the test.
pub const AUTO_RELAX_DIM: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyMode {
    Strict,
    Relaxed,
    /// Strict unless the configuration has more than [`AUTO_RELAX_DIM`] parameters.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instability {
    /// λ* does not lie above the zero band.
    Indefinite,
    /// Gradient too large relative to λ* and the minimum separation.
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub grad_norm: f64,
    /// Up to four smallest eigenvalues, ascending.
    pub lambda_low: Vec<f64>,
    pub lambda_star: f64,
    pub rigid_dim: usize,
    /// Absolute zero band, `ZERO_BAND · ‖H‖₂`.
    pub zero_band: f64,
    pub min_sep: f64,
    pub criterion_lhs: f64,
    pub criterion_rhs: f64,
    pub stable: bool,
    pub relaxed: bool,
    pub reason: Option<Instability>,
}

impl StabilityCertificate {
    fn evaluate(&self) -> (bool, Option<Instability>) {
        if !(self.lambda_star > self.zero_band) {
            return (false, Some(Instability::Indefinite));
        }
        if self.relaxed || self.criterion_lhs <= self.criterion_rhs {
            (true, None)
        } else {
            (false, Some(Instability::Gradient))
        }
    }

    /// Recomputes the verdict from the stored fields.
    pub fn recompute_stable(&self) -> bool {
        self.evaluate().0
    }
}

/// All eigenvalues of the angle Hessian, ascending.
pub fn hessian_spectrum(config: &Configuration, s: RieszParam) -> Result<Vec<f64>> {
    let h = energy::hessian(config, s)?;
    let mut eigs: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    if eigs.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("Hessian eigenvalue".into()));
    }
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Number of eigenvalues within the zero band of a sorted spectrum.
pub fn zero_mode_count(eigs: &[f64]) -> usize {
    let band = ZERO_BAND * spectral_norm(eigs);
    eigs.iter().filter(|l| l.abs() <= band).count()
}

fn spectral_norm(eigs: &[f64]) -> f64 {
    eigs.iter().fold(0.0f64, |m, l| m.max(l.abs()))
}

pub fn certify(config: &Configuration, s: RieszParam, mode: CertifyMode) -> Result<StabilityCertificate> {
    let eigs = hessian_spectrum(config, s)?;
    let grad = energy::gradient(config, s)?;
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let min_sep = min_separation(config)?.min_sep;
    let rigid_dim = config.manifold().rigid_dim();
    let relaxed = match mode {
        CertifyMode::Strict => false,
        CertifyMode::Relaxed => true,
        CertifyMode::Auto => config.params().len() > AUTO_RELAX_DIM,
    };
    let lambda_star = eigs.get(rigid_dim).copied().unwrap_or(f64::NAN);
    let criterion_lhs = if lambda_star > 0.0 { grad_norm / lambda_star } else { f64::INFINITY };
    let mut cert = StabilityCertificate {
        grad_norm,
        lambda_low: eigs.iter().take(4).copied().collect(),
        lambda_star,
        rigid_dim,
        zero_band: ZERO_BAND * spectral_norm(&eigs),
        min_sep,
        criterion_lhs,
        criterion_rhs: min_sep / 1e4,
        stable: false,
        relaxed,
        reason: None,
    };
    let (stable, reason) = cert.evaluate();
    cert.stable = stable;
    cert.reason = reason;
    Ok(cert)
}
