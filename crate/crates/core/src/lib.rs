//! Escape metrics on `R^n`.
//!
//! The crate is organised around five pieces:
//!
//! * [`metric`]: radially normalised Riemannian metrics (`G(x) x/|x| = x/|x|`
//!   outside `r_c`), the explicit families, the integral constructions and the
//!   pointwise certification of the escape inequalities.
//! * [`geodesic`]: fixed-step RK4 integration of unit-speed geodesics plus the
//!   escape, asymptotic-speed and trapping diagnostics.
//! * [`wave_radial`]: the radial reduction `u_tt = u_rr + (m/r) u_r` with a
//!   Dirichlet inner boundary and local-energy decay classification.
//! * [`wave_general`]: a polar-grid solver for `u_tt = Δ_g u` on the exterior
//!   of a disc, with energy bookkeeping, the decay experiments and the discrete
//!   Morawetz identity check.
//! * [`cli`]: the config-driven command line driver.

pub mod cli;
pub mod error;
pub mod geodesic;
pub mod linalg;
pub mod metric;
pub mod quadrature;
pub mod wave_general;
pub mod wave_radial;

pub use error::{Error, Result};
pub use metric::{Alpha, CertificationReport, Family, MetricField, PBoundary, QField, SampleSpec};
