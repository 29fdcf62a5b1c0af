//! The explicit metric families.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Alpha, Family, GClosure, MetricField, Model, PBoundary, QField, RadialProfile};
use crate::error::{Error, Result};
use crate::linalg::norm;

struct Flat;

impl RadialProfile for Flat {
    fn phi(&self, _r: f64) -> f64 {
        1.0
    }
    fn dphi(&self, _r: f64) -> f64 {
        0.0
    }
}

/// `φ = (r/r_c)^e`.
struct PowerProfile {
    r_c: f64,
    exponent: f64,
}

impl RadialProfile for PowerProfile {
    fn phi(&self, r: f64) -> f64 {
        (r / self.r_c).powf(self.exponent)
    }
    fn dphi(&self, r: f64) -> f64 {
        self.exponent / r * self.phi(r)
    }
}

/// `φ = (r_c/r)² exp(2 m2 I(r) / (n-1))`, `I(r) = ∫_{r_c}^r y^{-s2} dy`.
struct ExpProfile {
    r_c: f64,
    n: f64,
    m2: f64,
    s2: f64,
}

impl ExpProfile {
    fn integral(&self, r: f64) -> f64 {
        if (self.s2 - 1.0).abs() < 1e-14 {
            (r / self.r_c).ln()
        } else {
            let e = 1.0 - self.s2;
            (r.powf(e) - self.r_c.powf(e)) / e
        }
    }
}

impl RadialProfile for ExpProfile {
    fn phi(&self, r: f64) -> f64 {
        (self.r_c / r).powi(2) * (2.0 * self.m2 * self.integral(r) / (self.n - 1.0)).exp()
    }
    fn dphi(&self, r: f64) -> f64 {
        self.phi(r) * (-2.0 / r + 2.0 * self.m2 * r.powf(-self.s2) / (self.n - 1.0))
    }
}

/// `φ = (R0/r)²`.
struct CylinderProfile {
    radius: f64,
}

impl RadialProfile for CylinderProfile {
    fn phi(&self, r: f64) -> f64 {
        (self.radius / r).powi(2)
    }
    fn dphi(&self, r: f64) -> f64 {
        -2.0 * self.radius * self.radius / (r * r * r)
    }
}

fn check_common(dim: usize, r_c: f64) -> Result<()> {
    if dim < 2 {
        return Err(Error::param(format!("dimension must be at least 2, got {dim}")));
    }
    if !(r_c > 0.0) || !r_c.is_finite() {
        return Err(Error::param(format!("r_c must be positive, got {r_c}")));
    }
    Ok(())
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl MetricField {
    fn radial_family(
        dim: usize,
        r_c: f64,
        family: Family,
        params: BTreeMap<String, f64>,
        exterior: bool,
        alpha: Alpha,
        profile: Arc<dyn RadialProfile>,
    ) -> Self {
        MetricField {
            dim,
            r_c,
            family,
            params,
            exterior,
            alpha,
            q_field: QField::Zero,
            p_boundary: PBoundary::Identity,
            rho_c: 1.0,
            model: Model::Radial(profile),
        }
    }

    /// `G = I`, with `r_c = 1` and `α = 0`.
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_common(dim, 1.0)?;
        Ok(Self::radial_family(
            dim,
            1.0,
            Family::Euclidean,
            BTreeMap::new(),
            false,
            Alpha::Zero,
            Arc::new(Flat),
        ))
    }

    /// `G = W + (r/r_c)^{2 m2/(n-1) - 2}(I - W)` outside `r_c`, `G = I` inside
    /// unless `exterior`. `m2` defaults to `(n-1) m1`, which gives the tangential
    /// factor `r^{2(m1-1)}` for `r_c = 1`. Declared `α = (m1-1)/r`.
    pub fn radial_power(dim: usize, m1: f64, m2: Option<f64>, r_c: f64, exterior: bool) -> Result<Self> {
        check_common(dim, r_c)?;
        let nm1 = dim as f64 - 1.0;
        let m2 = m2.unwrap_or(nm1 * m1);
        if !m1.is_finite() || !m2.is_finite() {
            return Err(Error::param("radial_power parameters must be finite"));
        }
        let exponent = 2.0 * m2 / nm1 - 2.0;
        Ok(Self::radial_family(
            dim,
            r_c,
            Family::RadialPower,
            params(&[("m1", m1), ("m2", m2)]),
            exterior,
            Alpha::Power {
                coef: m1 - 1.0,
                exponent: -1.0,
            },
            Arc::new(PowerProfile { r_c, exponent }),
        ))
    }

    /// Exterior family with `Δ_g r = m2 r^{-s2}` and declared
    /// `α = m1 r^{-s1} − 1/r`.
    pub fn radial_exp(dim: usize, m1: f64, m2: f64, s1: f64, s2: f64, r_c: f64) -> Result<Self> {
        check_common(dim, r_c)?;
        if ![m1, m2, s1, s2].iter().all(|v| v.is_finite()) {
            return Err(Error::param("radial_exp parameters must be finite"));
        }
        Ok(Self::radial_family(
            dim,
            r_c,
            Family::RadialExp,
            params(&[("m1", m1), ("m2", m2), ("s1", s1), ("s2", s2)]),
            true,
            Alpha::ShiftedPower {
                coef: m1,
                exponent: -s1,
                shift: -1.0,
            },
            Arc::new(ExpProfile {
                r_c,
                n: dim as f64,
                m2,
                s2,
            }),
        ))
    }

    /// `G = W + (R0/r)²(I - W)` on `|x| ≥ r_c`; every sphere is totally geodesic.
    /// Declared `α = -1/r`.
    pub fn cylinder(dim: usize, radius: f64, r_c: f64) -> Result<Self> {
        check_common(dim, r_c)?;
        if !(radius > 0.0) {
            return Err(Error::param(format!("cylinder radius must be positive, got {radius}")));
        }
        Ok(Self::radial_family(
            dim,
            r_c,
            Family::Cylinder,
            params(&[("R0", radius)]),
            true,
            Alpha::Power {
                coef: -1.0,
                exponent: -1.0,
            },
            Arc::new(CylinderProfile { radius }),
        ))
    }

    /// Tabulated tangential factor, interpolated by a natural cubic spline.
    /// All derivatives are taken by central differences. Outside the table
    /// the end values are held constant.
    pub fn tabulated_profile(
        dim: usize,
        r_c: f64,
        r_table: Vec<f64>,
        phi_table: Vec<f64>,
        exterior: bool,
        alpha: Alpha,
    ) -> Result<Self> {
        check_common(dim, r_c)?;
        let spline = CubicSpline::natural(r_table, phi_table)?;
        let closure: GClosure = Arc::new(move |x: &[f64]| {
            let r = norm(x);
            let n = x.len();
            if (!exterior && r < r_c) || r == 0.0 {
                return DMatrix::identity(n, n);
            }
            let omega: Vec<f64> = x.iter().map(|c| c / r).collect();
            super::radial_g(&omega, spline.eval(r))
        });
        Self::tabulated(dim, r_c, closure, exterior, alpha)
    }

    /// Arbitrary `G(x)` supplied as a closure. The closure must satisfy the
    /// radial normalisation outside `r_c`. `ρ_c` defaults to 1 and can be
    /// re-estimated by certification.
    pub fn tabulated(dim: usize, r_c: f64, g: GClosure, exterior: bool, alpha: Alpha) -> Result<Self> {
        check_common(dim, r_c)?;
        Ok(MetricField {
            dim,
            r_c,
            family: Family::Tabulated,
            params: BTreeMap::new(),
            exterior,
            alpha,
            q_field: QField::Zero,
            p_boundary: PBoundary::Identity,
            rho_c: 1.0,
            model: Model::Closure(g),
        })
    }
}

/// Natural cubic spline through `(x_k, y_k)`, constant extension outside.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::param("spline table needs at least two (r, value) pairs of equal length"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("spline abscissae must be strictly increasing"));
        }
        // Thomas algorithm for the second derivatives, m_0 = m_{n-1} = 0.
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_linear_data() {
        let x: Vec<f64> = (0..6).map(|k| 1.0 + 0.5 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let s = CubicSpline::natural(x, y).unwrap();
        assert!((s.eval(2.3) - 5.9).abs() < 1e-12);
    }

    #[test]
    fn spline_interpolates_nodes_and_is_accurate() {
        let x: Vec<f64> = (0..41).map(|k| 1.0 + 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let s = CubicSpline::natural(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
        assert!((s.eval(3.03) - 3.03f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MetricField::euclidean(1).is_err());
        assert!(MetricField::radial_power(2, 2.0, None, 0.0, false).is_err());
        assert!(MetricField::cylinder(2, -1.0, 1.0).is_err());
        assert!(CubicSpline::natural(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
