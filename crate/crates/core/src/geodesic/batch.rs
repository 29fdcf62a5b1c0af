use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::theorems::{check_theorem_integral_bound, check_theorem_velocity_bound, exterior_dichotomy};
use super::{asymptotic_speed, integrate_geodesic, Dichotomy, GeodesicTrace, IntegralBound, IntegratorOptions, Termination, VelocityBound};
use crate::error::{Error, Result};
use crate::linalg::{norm, unit};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Escaped,
    Trapped,
    HitInnerBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub t_final: f64,
    pub integrator: IntegratorOptions,
    pub direction_count: usize,
    pub seed: u64,
    /// Check the linear velocity bound with this `ρ0`.
    pub rho0: Option<f64>,
    pub check_integral_bound: bool,
    /// Escape radius is this factor times `max{|x0|, r_c}`.
    pub escape_radius_factor: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            t_final: 200.0,
            integrator: IntegratorOptions {
                record_every: 10,
                ..IntegratorOptions::default()
            },
            direction_count: 16,
            seed: 0,
            rho0: None,
            check_integral_bound: true,
            escape_radius_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EscapeReport {
    pub x0: Vec<f64>,
    pub direction: Vec<f64>,
    pub verdict: Verdict,
    pub escape_radius: f64,
    pub final_radius: f64,
    /// `|γ(T)|/T`.
    pub asymptotic_speed: f64,
    pub max_speed_drift: f64,
    pub boundary_time: Option<f64>,
    pub velocity_bound: Option<VelocityBound>,
    pub integral_bound: Option<IntegralBound>,
    pub dichotomy: Option<Dichotomy>,
    pub notes: Vec<String>,
}

impl EscapeReport {
    /// Evaluates the applicable checks on a finished trace.
    pub fn from_trace(
        metric: &MetricField,
        trace: &GeodesicTrace,
        direction: &[f64],
        opts: &BatchOptions,
    ) -> Result<Self> {
        let x0 = trace.position(0).to_vec();
        let escape_radius = opts.escape_radius_factor * norm(&x0).max(metric.r_c);
        let final_radius = *trace.r.last().unwrap_or(&0.0);
        let verdict = if trace.termination == Termination::HitInnerBoundary {
            Verdict::HitInnerBoundary
        } else if final_radius > escape_radius {
            Verdict::Escaped
        } else {
            Verdict::Trapped
        };
        let mut notes = Vec::new();
        let velocity_bound = match opts.rho0 {
            Some(rho0) if !metric.exterior => keep(check_theorem_velocity_bound(trace, metric, rho0), &mut notes),
            _ => None,
        };
        let integral_bound = if opts.check_integral_bound && trace.termination == Termination::Completed {
            keep(check_theorem_integral_bound(trace, metric), &mut notes)
        } else {
            None
        };
        let dichotomy = if metric.exterior {
            keep(exterior_dichotomy(trace, metric, escape_radius), &mut notes)
        } else {
            None
        };
        Ok(Self {
            x0,
            direction: direction.to_vec(),
            verdict,
            escape_radius,
            final_radius,
            asymptotic_speed: asymptotic_speed(trace),
            max_speed_drift: trace.max_speed_drift(),
            boundary_time: trace.boundary_time,
            velocity_bound,
            integral_bound,
            dichotomy,
            notes,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub options: BatchOptions,
    pub n_escaped: usize,
    pub n_trapped: usize,
    pub n_hit_inner_boundary: usize,
    pub min_asymptotic_speed: f64,
    pub min_velocity_margin: Option<f64>,
    pub min_integral_margin: Option<f64>,
    pub max_h_violation: Option<f64>,
    pub max_speed_drift: f64,
    pub reports: Vec<EscapeReport>,
}

/// Euclidean unit directions at `x0`: equally spaced angles for `n = 2`,
/// seeded Gaussian samples otherwise.
pub fn shot_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(u) = unit(&v) {
                break u;
            }
        })
        .collect()
}

/// Inapplicable checks become notes rather than errors.
fn keep<T>(r: Result<T>, notes: &mut Vec<String>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(Error::InapplicableTheorem(msg)) => {
            notes.push(format!("inapplicable: {msg}"));
            None
        }
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    }
}

fn fold_min(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Shoots `direction_count` geodesics from every start point. Directions at the
/// `i`-th start point use seed `seed + i`. Results are in input order.
pub fn batch_shoot(metric: &MetricField, x0_set: &[Vec<f64>], opts: &BatchOptions) -> Result<BatchReport> {
    let jobs: Vec<(Vec<f64>, Vec<f64>)> = x0_set
        .iter()
        .enumerate()
        .flat_map(|(i, x0)| {
            shot_directions(metric.dim, opts.direction_count, opts.seed.wrapping_add(i as u64))
                .into_iter()
                .map(move |d| (x0.clone(), d))
        })
        .collect();
    let reports: Vec<EscapeReport> = jobs
        .par_iter()
        .map(|(x0, d)| {
            let trace = integrate_geodesic(metric, x0, d, opts.t_final, &opts.integrator)?;
            EscapeReport::from_trace(metric, &trace, d, opts)
        })
        .collect::<Result<_>>()?;

    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    Ok(BatchReport {
        options: *opts,
        n_escaped: count(Verdict::Escaped),
        n_trapped: count(Verdict::Trapped),
        n_hit_inner_boundary: count(Verdict::HitInnerBoundary),
        min_asymptotic_speed: reports.iter().map(|r| r.asymptotic_speed).fold(f64::INFINITY, f64::min),
        min_velocity_margin: reports
            .iter()
            .map(|r| r.velocity_bound.map(|v| v.margin))
            .fold(None, fold_min),
        min_integral_margin: reports
            .iter()
            .map(|r| r.integral_bound.map(|v| v.margin))
            .fold(None, fold_min),
        max_h_violation: reports
            .iter()
            .map(|r| r.integral_bound.filter(|b| b.f_positive).map(|v| -v.h_violation))
            .fold(None, fold_min)
            .map(|v| -v),
        max_speed_drift: reports.iter().map(|r| r.max_speed_drift).fold(0.0, f64::max),
        reports,
    })
}
