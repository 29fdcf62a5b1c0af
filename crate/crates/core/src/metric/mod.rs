//! Radially normalised metrics `G(x)` on `R^n` and the pointwise geometry needed
//! by the escape conditions.
//!
//! Every metric here satisfies `G(x) ω = ω` with `ω = x/|x|` for `|x| ≥ r_c`, so
//! outside `r_c` it is determined by its tangential block `Φ = G - W`,
//! `W = ω ⊗ ω`.

mod certify;
mod construct;
mod families;
pub mod spec;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm};

pub use certify::{certify_escape, directions, CertPoint, CertificationReport, SampleSpec, TOL_CERT};
pub use construct::{build_escape_metric, build_exterior_escape_metric};
pub use families::CubicSpline;

/// Family tag, mirrored in metric specification files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    RadialPower,
    RadialExp,
    Cylinder,
    Prop21General,
    Prop22Exterior,
    Tabulated,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::RadialPower => "radial_power",
            Family::RadialExp => "radial_exp",
            Family::Cylinder => "cylinder",
            Family::Prop21General => "prop21_general",
            Family::Prop22Exterior => "prop22_exterior",
            Family::Tabulated => "tabulated",
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
type BoundaryFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type GClosure = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Escape lower-bound function `α(x)`, only meaningful for `|x| ≥ r_c`.
#[derive(Clone)]
pub enum Alpha {
    Zero,
    /// `coef · r^exponent`
    Power { coef: f64, exponent: f64 },
    /// `coef · r^exponent + shift / r`
    ShiftedPower { coef: f64, exponent: f64, shift: f64 },
    /// `α(r, ω)`
    Custom(ScalarFn),
}

impl Alpha {
    pub fn custom(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Alpha::Custom(Arc::new(f))
    }

    pub fn value(&self, r: f64, omega: &[f64]) -> f64 {
        match self {
            Alpha::Zero => 0.0,
            Alpha::Power { coef, exponent } => coef * r.powf(*exponent),
            Alpha::ShiftedPower { coef, exponent, shift } => coef * r.powf(*exponent) + shift / r,
            Alpha::Custom(f) => f(r, omega),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, Alpha::Custom(_))
    }
}

impl fmt::Debug for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Zero => write!(f, "Zero"),
            Alpha::Power { coef, exponent } => write!(f, "Power({coef} r^{exponent})"),
            Alpha::ShiftedPower { coef, exponent, shift } => {
                write!(f, "ShiftedPower({coef} r^{exponent} + {shift}/r)")
            }
            Alpha::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Nonnegative source term `Q(y, θ)` of the integral constructions.
#[derive(Clone)]
pub enum QField {
    Zero,
    /// `Q = q(r) I` on the tangent space, `q(r) = Σ c r^p`.
    ScalarProfile { terms: Vec<(f64, f64)> },
    /// Full `n × n` matrix field; only its tangential block is used.
    Custom(MatrixFn),
}

impl QField {
    pub fn custom(f: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        QField::Custom(Arc::new(f))
    }

    /// The scalar profile value, when `Q` is a multiple of the identity.
    pub fn scalar(&self, r: f64) -> Option<f64> {
        match self {
            QField::Zero => Some(0.0),
            QField::ScalarProfile { terms } => Some(terms.iter().map(|(c, p)| c * r.powf(*p)).sum()),
            QField::Custom(_) => None,
        }
    }

    /// Tangential block `Π Q Π` at `(r, ω)`.
    pub fn projected(&self, r: f64, omega: &[f64]) -> DMatrix<f64> {
        let pi = linalg::tangential_projector(omega);
        match self.scalar(r) {
            Some(q) => pi * q,
            None => {
                let QField::Custom(f) = self else { unreachable!() };
                &pi * f(r, omega) * &pi
            }
        }
    }
}

impl fmt::Debug for QField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QField::Zero => write!(f, "Zero"),
            QField::ScalarProfile { terms } => write!(f, "ScalarProfile({terms:?})"),
            QField::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Boundary data `P(r_c, θ)` of the exterior construction.
#[derive(Clone)]
pub enum PBoundary {
    Identity,
    Scalar(f64),
    Custom(BoundaryFn),
}

impl PBoundary {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            PBoundary::Identity => Some(1.0),
            PBoundary::Scalar(p) => Some(*p),
            PBoundary::Custom(_) => None,
        }
    }

    pub fn projected(&self, omega: &[f64]) -> DMatrix<f64> {
        let pi = linalg::tangential_projector(omega);
        match self {
            PBoundary::Custom(f) => &pi * f(omega) * &pi,
            other => pi * other.scalar().unwrap_or(1.0),
        }
    }
}

impl fmt::Debug for PBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PBoundary::Identity => write!(f, "Identity"),
            PBoundary::Scalar(p) => write!(f, "Scalar({p})"),
            PBoundary::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Tangential factor `φ(r)` of a metric `G = W + φ(r)(I - W)`.
pub(crate) trait RadialProfile: Send + Sync {
    fn phi(&self, r: f64) -> f64;
    fn dphi(&self, r: f64) -> f64;
}

#[derive(Clone)]
pub(crate) enum Model {
    Radial(Arc<dyn RadialProfile>),
    Directional(Arc<construct::RayConstruction>),
    Closure(GClosure),
}

/// Both evaluations of `D²r(X, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianR {
    pub closed_form: f64,
    pub christoffel: f64,
}

/// Both evaluations of `Δ_g r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianR {
    pub closed_form: f64,
    pub christoffel: f64,
}

/// `Γ^k_{ij}` stored as one symmetric matrix per upper index `k`.
#[derive(Debug, Clone)]
pub struct Christoffel(pub Vec<DMatrix<f64>>);

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.0[k][(i, j)]
    }

    /// `Γ^k(v, w)` for every `k`.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .map(|gk| {
                let mut acc = 0.0;
                for i in 0..v.len() {
                    for j in 0..w.len() {
                        acc += gk[(i, j)] * v[i] * w[j];
                    }
                }
                acc
            })
            .collect()
    }
}

#[derive(Clone)]
pub struct MetricField {
    pub dim: usize,
    pub r_c: f64,
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    /// Defined only for `|x| ≥ r_c`.
    pub exterior: bool,
    pub alpha: Alpha,
    pub q_field: QField,
    pub p_boundary: PBoundary,
    /// Interior convexity constant of `D²r² ≥ 2 ρ_c g`.
    pub rho_c: f64,
    pub(crate) model: Model,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("r_c", &self.r_c)
            .field("family", &self.family)
            .field("params", &self.params)
            .field("exterior", &self.exterior)
            .field("alpha", &self.alpha)
            .field("q_field", &self.q_field)
            .field("p_boundary", &self.p_boundary)
            .field("rho_c", &self.rho_c)
            .finish()
    }
}

const FD_REL_STEP: f64 = 1e-5;

impl MetricField {
    pub fn with_alpha(mut self, alpha: Alpha) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_rho_c(mut self, rho_c: f64) -> Self {
        self.rho_c = rho_c;
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Dimension and domain checks; returns `|x|`.
    pub fn check_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let r = norm(x);
        if self.exterior && r < self.r_c * (1.0 - 1e-12) {
            return Err(self.domain_error(x, r));
        }
        Ok(r)
    }

    fn domain_error(&self, x: &[f64], r: f64) -> Error {
        Error::Domain {
            point: x.to_vec(),
            radius: r,
            r_c: self.r_c,
        }
    }

    fn require_exterior_point(&self, x: &[f64]) -> Result<f64> {
        let r = self.check_point(x)?;
        if r < self.r_c * (1.0 - 1e-12) {
            return Err(self.domain_error(x, r));
        }
        Ok(r)
    }

    /// `true` where the metric is the identity by construction (inside `r_c`
    /// for full-space radial and constructed metrics).
    fn flat_inside(&self, r: f64) -> bool {
        !self.exterior && r < self.r_c && !matches!(self.model, Model::Closure(_))
    }

    /// `α(x)`.
    pub fn alpha_at(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
        self.alpha.value(r, &omega)
    }

    /// `G(x)` without domain or definiteness checks. Exterior families are
    /// extended below `r_c` by their defining formula; the integrators use this
    /// for stages that cross the boundary by a fraction of a step.
    pub fn g_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let r = norm(x);
        if self.flat_inside(r) || (r == 0.0 && !matches!(self.model, Model::Closure(_))) {
            return DMatrix::identity(n, n);
        }
        match &self.model {
            Model::Radial(p) => {
                let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
                radial_g(&omega, p.phi(r))
            }
            Model::Directional(c) => {
                let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
                linalg::radial_projector(&omega) + c.phi_matrix(r, &omega)
            }
            Model::Closure(f) => f(x),
        }
    }

    /// `G(x)`.
    pub fn evaluate_g(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.check_point(x)?;
        if let Model::Radial(p) = &self.model {
            if !self.flat_inside(r) && r > 0.0 {
                let phi = p.phi(r);
                if !(phi > 0.0) {
                    return Err(Error::NonPositiveDefinite {
                        point: x.to_vec(),
                        min_eigenvalue: phi.min(1.0),
                    });
                }
            }
            return Ok(self.g_unchecked(x));
        }
        let mut g = self.g_unchecked(x);
        linalg::symmetrize(&mut g);
        let lmin = linalg::min_eigenvalue(&g);
        if !(lmin > 0.0) {
            return Err(Error::NonPositiveDefinite {
                point: x.to_vec(),
                min_eigenvalue: lmin,
            });
        }
        Ok(g)
    }

    /// `∂G/∂r` at `|x| ≥ r_c`.
    pub fn evaluate_dg_dr(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.require_exterior_point(x)?;
        Ok(self.dg_dr_unchecked(x, r))
    }

    fn dg_dr_unchecked(&self, x: &[f64], r: f64) -> DMatrix<f64> {
        let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
        match &self.model {
            Model::Radial(p) => linalg::tangential_projector(&omega) * p.dphi(r),
            Model::Directional(c) => c.dphi_dr(r, &omega),
            Model::Closure(f) => {
                let h = FD_REL_STEP * r.max(1.0);
                let xp: Vec<f64> = x.iter().zip(&omega).map(|(a, w)| a + h * w).collect();
                let xm: Vec<f64> = x.iter().zip(&omega).map(|(a, w)| a - h * w).collect();
                (f(&xp) - f(&xm)) / (2.0 * h)
            }
        }
    }

    /// `∂G/∂x_l` for `l = 0..n`, unchecked.
    pub fn metric_derivatives(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let r = norm(x);
        if self.flat_inside(r) {
            return vec![DMatrix::zeros(n, n); n];
        }
        match &self.model {
            Model::Radial(p) if r > 0.0 => {
                let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
                let phi = p.phi(r);
                let dphi = p.dphi(r);
                let pi = linalg::tangential_projector(&omega);
                (0..n)
                    .map(|l| {
                        DMatrix::from_fn(n, n, |i, j| {
                            let dij_w = (delta(i, l) * omega[j] + omega[i] * delta(j, l)
                                - 2.0 * omega[i] * omega[j] * omega[l])
                                / r;
                            dphi * omega[l] * pi[(i, j)] + (1.0 - phi) * dij_w
                        })
                    })
                    .collect()
            }
            _ => {
                let h = FD_REL_STEP * r.max(1.0);
                (0..n)
                    .map(|l| {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[l] += h;
                        xm[l] -= h;
                        (self.g_unchecked(&xp) - self.g_unchecked(&xm)) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// Christoffel symbols, unchecked domain.
    pub fn christoffel_unchecked(&self, x: &[f64]) -> Option<Christoffel> {
        let n = self.dim;
        let g = self.g_unchecked(x);
        let ginv = g.try_inverse()?;
        let dg = self.metric_derivatives(x);
        let lowered: Vec<DMatrix<f64>> = (0..n)
            .map(|l| {
                DMatrix::from_fn(n, n, |i, j| 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]))
            })
            .collect();
        let gamma = (0..n)
            .map(|k| {
                let mut m = DMatrix::zeros(n, n);
                for (l, low) in lowered.iter().enumerate() {
                    let c = ginv[(k, l)];
                    if c != 0.0 {
                        m += low * c;
                    }
                }
                m
            })
            .collect();
        Some(Christoffel(gamma))
    }

    /// `Γ^k_{ij}(x) = ½ G^{kl}(∂_i G_lj + ∂_j G_li − ∂_l G_ij)`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        self.evaluate_g(x)?;
        self.christoffel_unchecked(x).ok_or_else(|| Error::NonPositiveDefinite {
            point: x.to_vec(),
            min_eigenvalue: 0.0,
        })
    }

    /// Geodesic acceleration `-Γ(x)(v, v)`, unchecked.
    pub fn geodesic_accel(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if self.flat_inside(r) || r == 0.0 && !matches!(self.model, Model::Closure(_)) {
            return vec![0.0; self.dim];
        }
        if let Model::Radial(p) = &self.model {
            let phi = p.phi(r);
            let dphi = p.dphi(r);
            let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
            let s = dot(&omega, v);
            let w = dot(v, v);
            let radial = (0.5 * dphi - (1.0 - phi) / r) * (w - s * s);
            let tang = dphi / phi * s;
            return omega
                .iter()
                .zip(v)
                .map(|(o, vi)| radial * o - tang * (vi - s * o))
                .collect();
        }
        match self.christoffel_unchecked(x) {
            Some(gamma) => gamma.contract(v, v).into_iter().map(|a| -a).collect(),
            None => vec![f64::NAN; self.dim],
        }
    }

    /// `|v|²_g` at `x`.
    pub fn speed_sq(&self, x: &[f64], v: &[f64]) -> f64 {
        let r = norm(x);
        if let Model::Radial(p) = &self.model {
            if self.flat_inside(r) || r == 0.0 {
                return dot(v, v);
            }
            let s = v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / r;
            return p.phi(r) * dot(v, v) + (1.0 - p.phi(r)) * s * s;
        }
        linalg::quad_form(&self.g_unchecked(x), v)
    }

    /// `⟨∂r, v⟩_g = ωᵀ G v`; zero at the origin.
    pub fn radial_component(&self, x: &[f64], v: &[f64]) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return 0.0;
        }
        let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
        if matches!(self.model, Model::Radial(_)) {
            // G ω = ω (or G = I inside).
            return dot(&omega, v);
        }
        let gv = self.g_unchecked(x) * linalg::to_dvector(v);
        dot(&omega, gv.as_slice())
    }

    /// `D²r(X, X)` for `X` tangent to the sphere through `x`, `|x| ≥ r_c`.
    pub fn hessian_r(&self, x: &[f64], xv: &[f64]) -> Result<HessianR> {
        let r = self.require_exterior_point(x)?;
        if xv.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: xv.len(),
            });
        }
        let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
        let radial = dot(xv, &omega);
        if radial.abs() > 1e-9 * norm(xv).max(1.0) {
            return Err(Error::NotTangent(radial));
        }
        let g = self.evaluate_g(x)?;
        let dgr = self.dg_dr_unchecked(x, r);
        let xg2 = linalg::quad_form(&g, xv);
        let closed_form = 0.5 * linalg::quad_form(&dgr, xv) + xg2 / r;

        let gamma = self.christoffel(x)?;
        let gxx = gamma.contract(xv, xv);
        // X(X r) for a constant field X tangent at x: (|X|² − (ω·X)²)/r.
        let xxr = (dot(xv, xv) - radial * radial) / r;
        let christoffel = xxr - dot(&gxx, &omega);
        Ok(HessianR {
            closed_form,
            christoffel,
        })
    }

    /// Full Christoffel Hessian of `r`, `H_ij = ∂_i∂_j r − Γ^k_ij ω_k`.
    fn hessian_r_matrix(&self, x: &[f64], r: f64) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
        let gamma = self.christoffel(x)?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let flat = (delta(i, j) - omega[i] * omega[j]) / r;
            let corr: f64 = (0..n).map(|k| gamma.get(k, i, j) * omega[k]).sum();
            flat - corr
        }))
    }

    /// `Δ_g r` at `|x| ≥ r_c`.
    pub fn laplacian_r(&self, x: &[f64]) -> Result<LaplacianR> {
        let r = self.require_exterior_point(x)?;
        let g = self.evaluate_g(x)?;
        let ginv = g.try_inverse().ok_or_else(|| Error::NonPositiveDefinite {
            point: x.to_vec(),
            min_eigenvalue: 0.0,
        })?;
        let dgr = self.dg_dr_unchecked(x, r);
        let closed_form = (self.dim as f64 - 1.0) / r + 0.5 * (&ginv * dgr).trace();
        let hess = self.hessian_r_matrix(x, r)?;
        let christoffel = (&ginv * hess).trace();
        Ok(LaplacianR {
            closed_form,
            christoffel,
        })
    }

    /// `D²(r²)` as a matrix: `2I − 2 Σ_k Γ^k x_k`.
    pub fn hessian_r2_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let gamma = self.christoffel(x)?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let corr: f64 = (0..n).map(|k| gamma.get(k, i, j) * x[k]).sum();
            2.0 * delta(i, j) - 2.0 * corr
        }))
    }

    /// `κ(x)` such that `D²r(X, X) = κ |X|²_g` for tangential `X` in the plane
    /// (only meaningful for `n = 2`, where the tangent space is a line).
    pub fn tangential_hessian_ratio(&self, x: &[f64]) -> Result<f64> {
        let frame = linalg::TangentFrame::at(x)?;
        let e = &frame.basis[0];
        let h = self.hessian_r(x, e)?;
        let g = self.evaluate_g(x)?;
        Ok(h.closed_form / linalg::quad_form(&g, e))
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn radial_g(omega: &[f64], phi: f64) -> DMatrix<f64> {
    let n = omega.len();
    DMatrix::from_fn(n, n, |i, j| phi * delta(i, j) + (1.0 - phi) * omega[i] * omega[j])
}
