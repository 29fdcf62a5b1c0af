//! Sampled certification of the escape inequalities.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Family, MetricField};
use crate::error::Result;
use crate::linalg::{self, TangentFrame};

pub const TOL_CERT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub r_lo: f64,
    pub r_hi: f64,
    pub n_radial: usize,
    /// Directions per radius (per 2π when `n = 2`).
    pub n_angular: usize,
    /// Only used for `n ≥ 4`, where directions are random.
    pub seed: u64,
}

impl SampleSpec {
    /// 64 × 32 samples on `[r_c/4, 10 r_c]` (starting at `r_c` for exterior metrics).
    pub fn for_metric(metric: &MetricField) -> Self {
        Self {
            r_lo: if metric.exterior { metric.r_c } else { 0.25 * metric.r_c },
            r_hi: 10.0 * metric.r_c,
            n_radial: 64,
            n_angular: 32,
            seed: 0,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.n_radial <= 1 {
            return vec![self.r_lo];
        }
        let step = (self.r_hi - self.r_lo) / (self.n_radial - 1) as f64;
        (0..self.n_radial).map(|k| self.r_lo + step * k as f64).collect()
    }
}

/// Unit directions: equally spaced on the circle, a Fibonacci lattice on `S²`,
/// seeded Gaussian samples otherwise.
pub fn directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let t = golden * k as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    if let Some(u) = linalg::unit(&v) {
                        break u;
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertPoint {
    pub r: f64,
    pub theta_index: usize,
    pub x: Vec<f64>,
    /// `λ_min(B, T) − α(x)` for `|x| ≥ r_c`.
    pub margin_escape: Option<f64>,
    /// `λ_min(D²r², G) − 2ρ_c` for `|x| < r_c`.
    pub margin_interior: Option<f64>,
}

impl CertPoint {
    pub fn worst(&self) -> f64 {
        self.margin_escape
            .into_iter()
            .chain(self.margin_interior)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationReport {
    pub family: Family,
    pub dim: usize,
    pub r_c: f64,
    pub sample: SampleSpec,
    pub tol_cert: f64,
    pub rho_c: f64,
    pub min_margin_escape: Option<f64>,
    pub min_margin_interior: Option<f64>,
    pub worst_margin: f64,
    pub worst_point: Option<CertPoint>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub points: Vec<CertPoint>,
}

impl CertificationReport {
    /// Per-point rows `r,theta_index,margin_escape,margin_interior`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,theta_index,margin_escape,margin_interior\n");
        let fmt = |m: Option<f64>| m.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for p in &self.points {
            out.push_str(&format!(
                "{:.12e},{},{},{}\n",
                p.r,
                p.theta_index,
                fmt(p.margin_escape),
                fmt(p.margin_interior)
            ));
        }
        out
    }
}

fn escape_margin(metric: &MetricField, x: &[f64]) -> Result<f64> {
    let g = metric.evaluate_g(x)?;
    let half_dgr = metric.evaluate_dg_dr(x)? * 0.5;
    let f = TangentFrame::at(x)?.matrix();
    let b = f.transpose() * half_dgr * &f;
    let t = f.transpose() * g * &f;
    let lmin = linalg::generalized_eigenvalues(&b, &t)?[0];
    Ok(lmin - metric.alpha_at(x))
}

fn interior_eigenvalue(metric: &MetricField, x: &[f64]) -> Result<f64> {
    let g = metric.evaluate_g(x)?;
    let h2 = metric.hessian_r2_matrix(x)?;
    Ok(linalg::generalized_eigenvalues(&h2, &g)?[0])
}

/// Evaluates both escape inequalities on the sample grid.
pub fn certify_escape(metric: &MetricField, spec: &SampleSpec) -> Result<CertificationReport> {
    let dirs = directions(metric.dim, spec.n_angular, spec.seed);
    let jobs: Vec<(f64, usize)> = spec
        .radii()
        .into_iter()
        .flat_map(|r| (0..dirs.len()).map(move |k| (r, k)))
        .collect();

    // (r, k, x, escape margin, interior eigenvalue)
    type Row = (f64, usize, Vec<f64>, Option<f64>, Option<f64>);
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(r, k)| -> Result<Row> {
            let x: Vec<f64> = dirs[k].iter().map(|d| d * r).collect();
            if r >= metric.r_c {
                Ok((r, k, x.clone(), Some(escape_margin(metric, &x)?), None))
            } else {
                metric.check_point(&x)?;
                Ok((r, k, x.clone(), None, Some(interior_eigenvalue(metric, &x)?)))
            }
        })
        .collect::<Result<_>>()?;

    let mut notes = Vec::new();
    let mut rho_c = metric.rho_c;
    let interior_min = rows.iter().filter_map(|r| r.4).fold(f64::INFINITY, f64::min);
    let mut rho_ok = true;
    if metric.family == Family::Tabulated && interior_min.is_finite() {
        rho_c = 0.5 * interior_min;
        notes.push(format!("rho_c estimated from interior samples: {rho_c:.6e}"));
        if !(rho_c > 0.0) {
            rho_ok = false;
            notes.push("estimated rho_c is not positive".into());
        }
    }
    if metric.family == Family::Prop21General {
        let eps = 1e-7 * metric.r_c;
        let probe: Vec<f64> = dirs[0].iter().map(|d| d * (metric.r_c + eps)).collect();
        if let Ok(dgr) = metric.evaluate_dg_dr(&probe) {
            if dgr.abs().max() > 1e-8 {
                notes.push("construction is only continuous (C0) across r = r_c".into());
            }
        }
    }

    let points: Vec<CertPoint> = rows
        .into_iter()
        .map(|(r, theta_index, x, esc, int)| CertPoint {
            r,
            theta_index,
            x,
            margin_escape: esc,
            margin_interior: int.map(|l| l - 2.0 * rho_c),
        })
        .collect();

    let min_of = |sel: fn(&CertPoint) -> Option<f64>| {
        points.iter().filter_map(sel).fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    };
    let min_margin_escape = min_of(|p| p.margin_escape);
    let min_margin_interior = min_of(|p| p.margin_interior);
    let worst_point = points
        .iter()
        .min_by(|a, b| a.worst().total_cmp(&b.worst()))
        .cloned();
    let worst_margin = worst_point.as_ref().map_or(f64::INFINITY, CertPoint::worst);
    let pass = rho_ok && points.iter().all(|p| p.worst() >= -TOL_CERT);

    Ok(CertificationReport {
        family: metric.family,
        dim: metric.dim,
        r_c: metric.r_c,
        sample: *spec,
        tol_cert: TOL_CERT,
        rho_c,
        min_margin_escape,
        min_margin_interior,
        worst_margin,
        worst_point,
        pass,
        notes,
        points,
    })
}
