//! Riesz s-energy point configurations on the unit sphere and on tori of
//! revolution.
//!
//! The crate covers the whole numerical pipeline:
//!
//! * [`manifold`]: parametrizations, embeddings and seeded random starts,
//! * [`energy`]: Riesz kernels, order-independent binned summation, analytic
//!   gradients and Hessians in angle coordinates,
//! * [`optimizer`]: Polak–Ribière conjugate gradient alternated with Newton
//!   polishing,
//! * [`stability`]: Hessian spectra and the gradient/eigenvalue stability
//!   certificate,
//! * [`voronoi`]: spherical Voronoi cells from the convex hull, defect counts,
//! * [`constants`]: ζ, L₋₃, the hexagonal zeta function, the regularized
//!   hexagonal lattice constant and the per-s expansion catalogs,
//! * [`torus_measure`]: toroidal Legendre functions, the exact torus
//!   equilibrium energy and a discretized equilibrium-measure solver,
//! * [`analysis`]: the configuration library, occurrence-weighted gaps,
//!   residuals and least-squares expansion fits.

pub mod analysis;
pub mod constants;
pub mod energy;
pub mod error;
pub mod manifold;
pub mod optimizer;
pub mod quadrature;
pub mod stability;
pub mod summation;
pub mod torus_measure;
pub mod voronoi;

mod vec3;

pub use error::{Error, Result};
pub use manifold::{Configuration, Manifold};
