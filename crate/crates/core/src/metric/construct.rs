//! Metrics built from escape data `(α, Q, P)` by integrating along rays:
//!
//! `Φ(r, θ) = e^{A(r)} [P Π + ∫_{r_c}^r 2 e^{-A(y)} Π Q(y) Π dy]`,
//! `A(r) = ∫_{r_c}^r 2α`, `Π = I - W`.
//!
//! Then `½ ∂_r Φ = α Φ + Π Q Π`, so the escape inequality holds with margin
//! `λ_min(T⁻¹ FᵀQF) ≥ 0`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use super::{Alpha, Family, MetricField, Model, PBoundary, QField, RadialProfile};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::{adaptive_simpson, adaptive_simpson_vec};

const REL_TOL: f64 = 1e-10;
const NODE_SPACING: f64 = 0.25;
const MAX_CACHED_RAYS: usize = 4096;

/// Integrated data `(A, B)` at equally spaced radii `r_c + k·NODE_SPACING`.
struct NodeCache {
    nodes: RwLock<Vec<(f64, Vec<f64>)>>,
}

impl NodeCache {
    fn new(width: usize) -> Self {
        Self {
            nodes: RwLock::new(vec![(0.0, vec![0.0; width])]),
        }
    }
}

/// Integrals of `2α` and `2 e^{-A} q` along one ray.
struct Ray<'a> {
    r_c: f64,
    alpha: &'a dyn Fn(f64) -> f64,
    /// `None` when `Q ≡ 0`.
    q: Option<&'a dyn Fn(f64) -> Vec<f64>>,
    width: usize,
}

impl Ray<'_> {
    fn segment(&self, a: f64, b: f64, a_at_a: f64) -> (f64, Vec<f64>) {
        let big_a = |y: f64| a_at_a + adaptive_simpson(|z| 2.0 * (self.alpha)(z), a, y, REL_TOL);
        let a_b = big_a(b);
        let db = match self.q {
            None => vec![0.0; self.width],
            Some(q) => adaptive_simpson_vec(
                |y| {
                    let w = 2.0 * (-big_a(y)).exp();
                    q(y).into_iter().map(|v| w * v).collect()
                },
                a,
                b,
                REL_TOL,
            ),
        };
        (a_b, db)
    }

    /// `(A(r), B(r))`, using and extending the node cache for `r ≥ r_c`.
    fn at(&self, r: f64, cache: &NodeCache) -> (f64, Vec<f64>) {
        if r <= self.r_c {
            return self.segment(self.r_c, r, 0.0);
        }
        let k = ((r - self.r_c) / NODE_SPACING).floor() as usize;
        let known = cache.nodes.read().map(|n| n.len()).unwrap_or(0);
        if known <= k {
            let mut nodes = cache.nodes.write().expect("node cache poisoned");
            while nodes.len() <= k {
                let j = nodes.len() - 1;
                let (a0, b0) = nodes[j].clone();
                let lo = self.r_c + j as f64 * NODE_SPACING;
                let (a1, db) = self.segment(lo, lo + NODE_SPACING, a0);
                let b1 = b0.iter().zip(&db).map(|(x, y)| x + y).collect();
                nodes.push((a1, b1));
            }
        }
        let (a0, b0) = cache.nodes.read().expect("node cache poisoned")[k].clone();
        let lo = self.r_c + k as f64 * NODE_SPACING;
        let (a1, db) = self.segment(lo, r, a0);
        (a1, b0.iter().zip(&db).map(|(x, y)| x + y).collect())
    }
}

/// Radial data: `φ = e^A (p + B)`, `φ' = 2αφ + 2q`.
struct RadialConstruction {
    r_c: f64,
    alpha: Alpha,
    q: QField,
    p: f64,
    cache: NodeCache,
}

impl RadialConstruction {
    fn q_zero(&self) -> bool {
        matches!(self.q, QField::Zero)
    }
}

impl RadialProfile for RadialConstruction {
    fn phi(&self, r: f64) -> f64 {
        let alpha = |y: f64| self.alpha.value(y, &[]);
        let q = |y: f64| vec![self.q.scalar(y).unwrap_or(0.0)];
        let ray = Ray {
            r_c: self.r_c,
            alpha: &alpha,
            q: if self.q_zero() { None } else { Some(&q) },
            width: 1,
        };
        let (a, b) = ray.at(r, &self.cache);
        a.exp() * (self.p + b[0])
    }

    fn dphi(&self, r: f64) -> f64 {
        2.0 * self.alpha.value(r, &[]) * self.phi(r) + 2.0 * self.q.scalar(r).unwrap_or(0.0)
    }
}

/// General data depending on direction; integrals memoised per ray.
pub(crate) struct RayConstruction {
    dim: usize,
    r_c: f64,
    alpha: Alpha,
    q: QField,
    p: PBoundary,
    rays: RwLock<HashMap<Vec<u64>, Arc<NodeCache>>>,
}

impl RayConstruction {
    fn cache_for(&self, omega: &[f64]) -> Arc<NodeCache> {
        let key: Vec<u64> = omega.iter().map(|v| v.to_bits()).collect();
        if let Some(c) = self.rays.read().expect("ray cache poisoned").get(&key) {
            return Arc::clone(c);
        }
        let mut rays = self.rays.write().expect("ray cache poisoned");
        if rays.len() >= MAX_CACHED_RAYS {
            rays.clear();
        }
        let n = self.dim;
        Arc::clone(rays.entry(key).or_insert_with(|| Arc::new(NodeCache::new(n * n))))
    }

    /// `Φ(r, ω)`.
    pub(crate) fn phi_matrix(&self, r: f64, omega: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let alpha = |y: f64| self.alpha.value(y, omega);
        let q = |y: f64| self.q.projected(y, omega).as_slice().to_vec();
        let ray = Ray {
            r_c: self.r_c,
            alpha: &alpha,
            q: if matches!(self.q, QField::Zero) { None } else { Some(&q) },
            width: n * n,
        };
        let cache = self.cache_for(omega);
        let (a, b) = ray.at(r, &cache);
        let b = DMatrix::from_column_slice(n, n, &b);
        (self.p.projected(omega) + b) * a.exp()
    }

    /// `∂_r Φ = 2αΦ + 2ΠQΠ`.
    pub(crate) fn dphi_dr(&self, r: f64, omega: &[f64]) -> DMatrix<f64> {
        self.phi_matrix(r, omega) * (2.0 * self.alpha.value(r, omega)) + self.q.projected(r, omega) * 2.0
    }
}

/// Sample radii and directions used to validate construction data.
fn validation_points(dim: usize, r_c: f64) -> Vec<(f64, Vec<f64>)> {
    let mut pts = Vec::new();
    let dirs = super::certify::directions(dim, 16, 0);
    for k in 0..48 {
        let r = r_c * (1.0 + 19.0 * k as f64 / 47.0);
        for d in &dirs {
            pts.push((r, d.clone()));
        }
    }
    pts
}

fn validate(dim: usize, r_c: f64, alpha: &Alpha, q: &QField, p: &PBoundary) -> Result<()> {
    if dim < 2 {
        return Err(Error::param(format!("dimension must be at least 2, got {dim}")));
    }
    if !(r_c > 0.0) {
        return Err(Error::param(format!("r_c must be positive, got {r_c}")));
    }
    for (r, omega) in validation_points(dim, r_c) {
        let a = alpha.value(r, &omega);
        // Equality rα + 1 = 0 is the degenerate (cylinder) case and is allowed.
        if !(r * a + 1.0 >= -1e-12) {
            return Err(Error::param(format!(
                "alpha violates alpha > -1/r at r = {r} (r*alpha + 1 = {})",
                r * a + 1.0
            )));
        }
        let frame = linalg::TangentFrame::at(&omega)?.matrix();
        let qt = frame.transpose() * q.projected(r, &omega) * &frame;
        if linalg::min_eigenvalue(&qt) < -1e-12 {
            return Err(Error::param(format!("Q is not nonnegative definite at r = {r}")));
        }
        if let PBoundary::Custom(_) = p {
            let pt = frame.transpose() * p.projected(&omega) * &frame;
            if !(linalg::min_eigenvalue(&pt) > 0.0) {
                return Err(Error::param("P is not positive definite"));
            }
        }
    }
    if let Some(s) = p.scalar() {
        if !(s > 0.0) {
            return Err(Error::param(format!("P must be positive definite, got scalar {s}")));
        }
    }
    Ok(())
}

fn build(
    alpha: Alpha,
    q: QField,
    p: PBoundary,
    r_c: f64,
    dim: usize,
    exterior: bool,
) -> Result<MetricField> {
    validate(dim, r_c, &alpha, &q, &p)?;
    let radial = alpha.is_radial() && q.scalar(r_c).is_some() && p.scalar().is_some();
    let model = if radial {
        Model::Radial(Arc::new(RadialConstruction {
            r_c,
            alpha: alpha.clone(),
            q: q.clone(),
            p: p.scalar().unwrap_or(1.0),
            cache: NodeCache::new(1),
        }))
    } else {
        Model::Directional(Arc::new(RayConstruction {
            dim,
            r_c,
            alpha: alpha.clone(),
            q: q.clone(),
            p: p.clone(),
            rays: RwLock::new(HashMap::new()),
        }))
    };
    Ok(MetricField {
        dim,
        r_c,
        family: if exterior {
            Family::Prop22Exterior
        } else {
            Family::Prop21General
        },
        params: BTreeMap::new(),
        exterior,
        alpha,
        q_field: q,
        p_boundary: p,
        rho_c: 1.0,
        model,
    })
}

/// Full-space metric, `G = I` inside `r_c`.
pub fn build_escape_metric(alpha: Alpha, q: QField, r_c: f64, dim: usize) -> Result<MetricField> {
    build(alpha, q, PBoundary::Identity, r_c, dim, false)
}

/// Exterior metric on `|x| ≥ r_c` with boundary data `P`.
pub fn build_exterior_escape_metric(
    alpha: Alpha,
    q: QField,
    p: PBoundary,
    r_c: f64,
    dim: usize,
) -> Result<MetricField> {
    build(alpha, q, p, r_c, dim, true)
}
