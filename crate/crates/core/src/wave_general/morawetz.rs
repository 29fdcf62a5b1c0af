//! Discrete check of the multiplier identity for a radial field `H = h(r)∂r`
//! on `Ω(a) = {r0 < r < a}`:
//!
//! `∫∫_{∂Ω(a)} ∂_ν u H(u) + ½∫∫_{∂Ω(a)} (u_t² − |∇_g u|²)⟨H, ν⟩
//!   = (u_t, H(u))|_0^T + ∫∫ DH(∇_g u, ∇_g u) + ½∫∫ (u_t² − |∇_g u|²) div_g H`,
//!
//! with the boundary split into the obstacle `r = r0` (`ν = −∂r`) and the
//! sphere `r = a`. `DH(X, X) = h' X_r² + h D²r(X_T, X_T)` and
//! `div_g H = h' + h Δ_g r`, with `D²r` and `Δ_g r` from the metric.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_wave_with, PolarGrid, WaveConfig, WaveField};
use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::quadrature::trapezoid;

/// Radial multiplier `H = h(r) ∂r`.
#[derive(Clone)]
pub enum Multiplier {
    /// `h = r`.
    R,
    /// `r ↦ (h(r), h'(r))`.
    Profile(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Multiplier::R => write!(f, "R"),
            Multiplier::Profile(_) => write!(f, "Profile(..)"),
        }
    }
}

impl Multiplier {
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            Multiplier::R => (r, 1.0),
            Multiplier::Profile(f) => f(r),
        }
    }
}

/// Instantaneous spatial integrals of the seven terms (the time-boundary term
/// is `(u_t, H(u))` at this instant).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MorawetzTerms {
    pub flux_obstacle: f64,
    pub flux_outer: f64,
    pub energy_obstacle: f64,
    pub energy_outer: f64,
    pub time_boundary: f64,
    pub deformation: f64,
    pub divergence: f64,
}

/// Per-node geometry on rows `0..=i_a`: `(D²r(ê, ê), Δ_g r)` for the `g`-unit
/// tangent `ê`.
pub(super) struct Geometry {
    i_a: usize,
    kappa: Vec<f64>,
    lap: Vec<f64>,
}

impl Geometry {
    pub(super) fn new(metric: &MetricField, grid: &PolarGrid, a: f64) -> Result<Self> {
        let x = (a - grid.r0) / grid.dr;
        let i_a = x.round() as usize;
        if (x - i_a as f64).abs() > 1e-9 * x.max(1.0) || i_a < 2 || i_a >= grid.n_r {
            return Err(Error::Config(format!(
                "the Morawetz radius a = {a} must be an interior grid radius (dr = {})",
                grid.dr
            )));
        }
        let nt = grid.n_theta;
        let mut kappa = Vec::with_capacity((i_a + 1) * nt);
        let mut lap = Vec::with_capacity((i_a + 1) * nt);
        for i in 0..=i_a {
            // Nudge the obstacle row inside the exterior domain against rounding.
            let r = grid.r(i).max(metric.r_c);
            for j in 0..nt {
                let (sn, cs) = grid.theta(j).sin_cos();
                let x = [r * cs, r * sn];
                let e = [-sn, cs];
                let g = metric.evaluate_g(&x)?;
                let ee = g[(0, 0)] * e[0] * e[0] + 2.0 * g[(0, 1)] * e[0] * e[1] + g[(1, 1)] * e[1] * e[1];
                kappa.push(metric.hessian_r(&x, &e)?.closed_form / ee);
                lap.push(metric.laplacian_r(&x)?.closed_form);
            }
        }
        Ok(Self { i_a, kappa, lap })
    }
}

/// Spatial integrals at one instant.
pub(super) fn integrands(field: &WaveField, grid: &PolarGrid, geo: &Geometry, h: &Multiplier) -> MorawetzTerms {
    let nt = grid.n_theta;
    let (dr, dth) = (grid.dr, grid.dtheta);
    let u = &field.u;
    let ur_at = |i: usize, j: usize| -> f64 {
        let k = grid.idx(i, j);
        if i == 0 {
            (-3.0 * u[k] + 4.0 * u[k + nt] - u[k + 2 * nt]) / (2.0 * dr)
        } else {
            (u[k + nt] - u[k - nt]) / (2.0 * dr)
        }
    };
    let uth_at = |i: usize, j: usize| -> f64 {
        let jp = if j + 1 == nt { 0 } else { j + 1 };
        let jm = if j == 0 { nt - 1 } else { j - 1 };
        (u[grid.idx(i, jp)] - u[grid.idx(i, jm)]) / (2.0 * dth)
    };
    let mut t = MorawetzTerms::default();
    for i in 0..=geo.i_a {
        let r = grid.r(i);
        let (hv, hp) = h.eval(r);
        let wr = if i == 0 || i == geo.i_a { 0.5 } else { 1.0 };
        for j in 0..nt {
            let k = grid.idx(i, j);
            let s = grid.s[k];
            let gamma = s * s;
            let (ut, ur, uth) = (field.u_t[k], ur_at(i, j), uth_at(i, j));
            let tang2 = uth * uth / gamma;
            let grad2 = ur * ur + tang2;
            let kappa = geo.kappa[i * nt + j];
            let div_h = hp + hv * geo.lap[i * nt + j];
            t.time_boundary += wr * ut * hv * ur * s;
            t.deformation += wr * (hp * ur * ur + hv * kappa * tang2) * s;
            t.divergence += wr * 0.5 * (ut * ut - grad2) * div_h * s;
            if i == 0 {
                // ν = −∂r, ∂_ν u = −u_r, ⟨H, ν⟩ = −h.
                t.flux_obstacle += -ur * hv * ur * s;
                t.energy_obstacle += 0.5 * (ut * ut - grad2) * (-hv) * s;
            }
            if i == geo.i_a {
                t.flux_outer += ur * hv * ur * s;
                t.energy_outer += 0.5 * (ut * ut - grad2) * hv * s;
            }
        }
    }
    let cell = dr * dth;
    t.time_boundary *= cell;
    t.deformation *= cell;
    t.divergence *= cell;
    t.flux_obstacle *= dth;
    t.flux_outer *= dth;
    t.energy_obstacle *= dth;
    t.energy_outer *= dth;
    t
}

/// Public single-instant evaluation.
pub fn morawetz_integrands(
    metric: &MetricField,
    field: &WaveField,
    grid: &PolarGrid,
    a: f64,
    h: &Multiplier,
) -> Result<MorawetzTerms> {
    let geo = Geometry::new(metric, grid, a)?;
    Ok(integrands(field, grid, &geo, h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorawetzReport {
    /// Time-integrated terms; `time_boundary` is the difference `T − 0`.
    pub terms: MorawetzTerms,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `|residual|` over the sum of the absolute terms.
    pub relative: f64,
    pub snapshots: usize,
    pub dr: f64,
}

/// Runs `cfg` on `metric`, evaluates the terms every `every` steps (and at
/// `T`), and integrates them in time by the trapezoid rule.
pub fn morawetz_residual(
    metric: &MetricField,
    cfg: &WaveConfig,
    h: &Multiplier,
    every: usize,
) -> Result<MorawetzReport> {
    let every = every.max(1);
    let mut hist: Vec<(f64, MorawetzTerms)> = Vec::new();
    let mut geo: Option<Geometry> = None;
    let mut err: Option<Error> = None;
    let mut k = 0usize;
    let run = run_wave_with(metric, cfg, |f, g, last| {
        if geo.is_none() && err.is_none() {
            match Geometry::new(metric, g, cfg.a) {
                Ok(v) => geo = Some(v),
                Err(e) => err = Some(e),
            }
        }
        if let Some(geo) = &geo {
            if k % every == 0 || last {
                hist.push((f.t, integrands(f, g, geo, h)));
            }
        }
        k += 1;
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let ts: Vec<f64> = hist.iter().map(|p| p.0).collect();
    let integral = |sel: fn(&MorawetzTerms) -> f64| -> f64 {
        let ys: Vec<f64> = hist.iter().map(|p| sel(&p.1)).collect();
        trapezoid(&ts, &ys)
    };
    let first = hist[0].1;
    let last = hist[hist.len() - 1].1;
    let terms = MorawetzTerms {
        flux_obstacle: integral(|t| t.flux_obstacle),
        flux_outer: integral(|t| t.flux_outer),
        energy_obstacle: integral(|t| t.energy_obstacle),
        energy_outer: integral(|t| t.energy_outer),
        time_boundary: last.time_boundary - first.time_boundary,
        deformation: integral(|t| t.deformation),
        divergence: integral(|t| t.divergence),
    };
    let lhs = terms.flux_obstacle + terms.flux_outer + terms.energy_obstacle + terms.energy_outer;
    let rhs = terms.time_boundary + terms.deformation + terms.divergence;
    let scale = [
        terms.flux_obstacle,
        terms.flux_outer,
        terms.energy_obstacle,
        terms.energy_outer,
        terms.time_boundary,
        terms.deformation,
        terms.divergence,
    ]
    .iter()
    .map(|v| v.abs())
    .sum::<f64>();
    let residual = lhs - rhs;
    Ok(MorawetzReport {
        terms,
        lhs,
        rhs,
        residual,
        relative: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
        snapshots: hist.len(),
        dr: run.grid.dr,
    })
}
