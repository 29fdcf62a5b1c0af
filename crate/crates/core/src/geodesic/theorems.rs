//! Checks of the escape theorems along computed traces.

use serde::{Deserialize, Serialize};

use super::GeodesicTrace;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::metric::{directions, MetricField};
use crate::quadrature::cumulative_trapezoid;

/// `c0 = sup_{|x| ≤ r_c} r |Dr|_g`, sampled. `|Dr|²_g = ωᵀG⁻¹ω`, and
/// `r |Dr|_g = r_c` on the sphere `|x| = r_c` itself.
pub fn c0(metric: &MetricField) -> f64 {
    let mut best = metric.r_c;
    if metric.exterior {
        return best;
    }
    let dirs = directions(metric.dim, 32, 0);
    for k in 1..=32 {
        let r = metric.r_c * k as f64 / 32.0;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            if let Some(ginv) = metric.g_unchecked(&x).try_inverse() {
                let q = crate::linalg::quad_form(&ginv, d);
                if q.is_finite() && q > 0.0 {
                    best = best.max(r * q.sqrt());
                }
            }
        }
    }
    best
}

/// Minimum of `r α(x) + 1` over sampled `r_c ≤ |x| ≤ r_max`.
fn min_r_alpha_plus_one(metric: &MetricField, r_max: f64) -> f64 {
    let dirs = if metric.alpha.is_radial() {
        vec![{
            let mut e = vec![0.0; metric.dim];
            e[0] = 1.0;
            e
        }]
    } else {
        directions(metric.dim, 16, 0)
    };
    let n = 256;
    let mut worst = f64::INFINITY;
    for k in 0..=n {
        let r = metric.r_c + (r_max - metric.r_c) * k as f64 / n as f64;
        for d in &dirs {
            worst = worst.min(r * metric.alpha.value(r, d) + 1.0);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityBound {
    pub rho0: f64,
    pub c0: f64,
    /// `(max{|x0|, c0} + c0)/ρ0`.
    pub c_emp: f64,
    /// `min_{t > c_emp} |γ(t)| − (ρ0 t − max{|x0|, c0})`; `+∞` if no sample lies past `c_emp`.
    pub margin: f64,
    pub worst_t: f64,
    pub samples_checked: usize,
}

/// Linear lower bound on `|γ(t)|` for metrics with `rα + 1 ≥ ρ0`.
pub fn check_theorem_velocity_bound(trace: &GeodesicTrace, metric: &MetricField, rho0: f64) -> Result<VelocityBound> {
    if !(rho0 > 0.0 && rho0 <= 1.0) {
        return Err(Error::InapplicableTheorem(format!("rho0 must lie in (0, 1], got {rho0}")));
    }
    if metric.exterior {
        return Err(Error::InapplicableTheorem("the velocity bound needs a full-space metric".into()));
    }
    let r_max = trace.r.iter().copied().fold(10.0 * metric.r_c, f64::max);
    let worst = min_r_alpha_plus_one(metric, r_max);
    if worst < rho0 - 1e-12 {
        return Err(Error::InapplicableTheorem(format!(
            "r*alpha + 1 drops to {worst:.6} < rho0 = {rho0}"
        )));
    }
    if metric.rho_c < rho0 {
        return Err(Error::InapplicableTheorem(format!(
            "interior constant rho_c = {} < rho0 = {rho0}",
            metric.rho_c
        )));
    }
    let c0 = c0(metric);
    let big_r = trace.r[0].max(c0);
    let c_emp = (big_r + c0) / rho0;
    let mut margin = f64::INFINITY;
    let mut worst_t = f64::NAN;
    let mut samples_checked = 0;
    for (t, r) in trace.t.iter().zip(&trace.r) {
        if *t > c_emp {
            samples_checked += 1;
            let m = r - (rho0 * t - big_r);
            if m < margin {
                margin = m;
                worst_t = *t;
            }
        }
    }
    Ok(VelocityBound {
        rho0,
        c0,
        c_emp,
        margin,
        worst_t,
        samples_checked,
    })
}

/// Decreasing envelope `f(y) = inf_{r_c ≤ |x| ≤ y} (α(x) + 1/|x|)` on a uniform
/// radial grid; `f(y) = f(r_c)` below `r_c`.
#[derive(Debug, Clone)]
pub struct EnvelopeF {
    r_c: f64,
    step: f64,
    values: Vec<f64>,
}

impl EnvelopeF {
    /// Value at the first grid node `≥ y`, which never exceeds the true infimum
    /// over `[r_c, y]` on the grid.
    pub fn eval(&self, y: f64) -> f64 {
        if y <= self.r_c {
            return self.values[0];
        }
        let k = ((y - self.r_c) / self.step).ceil() as usize;
        self.values[k.min(self.values.len() - 1)]
    }
}

pub fn envelope_f(metric: &MetricField, y_max: f64, step: f64) -> EnvelopeF {
    let dirs = if metric.alpha.is_radial() {
        let mut e = vec![0.0; metric.dim];
        e[0] = 1.0;
        vec![e]
    } else {
        directions(metric.dim, 16, 0)
    };
    let n = ((y_max - metric.r_c).max(0.0) / step).ceil() as usize + 1;
    let mut values = Vec::with_capacity(n + 1);
    let mut running = f64::INFINITY;
    for k in 0..=n {
        let r = metric.r_c + k as f64 * step;
        for d in &dirs {
            running = running.min(metric.alpha.value(r, d) + 1.0 / r);
        }
        values.push(running);
    }
    EnvelopeF {
        r_c: metric.r_c,
        step,
        values,
    }
}

/// Times from the crossing construction: `t1`, `t2` are the first times
/// `|γ| = R + 1/2` and `R + 3/2` (`R = max{|x0|, r_c}`), and `t0` is the last
/// time in `[t1, t2]` with `|γ| = R + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaTimes {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t0: Option<f64>,
}

fn first_crossing(trace: &GeodesicTrace, level: f64, from: usize) -> Option<(usize, f64)> {
    (from.max(1)..trace.len()).find_map(|i| {
        let (a, b) = (trace.r[i - 1], trace.r[i]);
        (a < level && b >= level).then(|| (i, interp(trace.t[i - 1], trace.t[i], a, b, level)))
    })
}

fn interp(t0: f64, t1: f64, a: f64, b: f64, level: f64) -> f64 {
    if b == a {
        t1
    } else {
        t0 + (t1 - t0) * (level - a) / (b - a)
    }
}

pub fn crossing_times(trace: &GeodesicTrace, r_c: f64) -> LemmaTimes {
    let big_r = trace.r[0].max(r_c);
    let c1 = first_crossing(trace, big_r + 0.5, 0);
    let c2 = first_crossing(trace, big_r + 1.5, 0);
    let t0 = match (c1, c2) {
        (Some((i1, _)), Some((i2, _))) => (i1.max(1)..=i2)
            .rev()
            .find_map(|i| {
                let (a, b) = (trace.r[i - 1], trace.r[i]);
                let level = big_r + 1.0;
                ((a - level) * (b - level) <= 0.0 && a != b)
                    .then(|| interp(trace.t[i - 1], trace.t[i], a, b, level))
            }),
        _ => None,
    };
    LemmaTimes {
        t1: c1.map(|c| c.1),
        t2: c2.map(|c| c.1),
        t0,
    }
}

/// Index of the first sample after which `h ≥ 0` for the rest of the trace.
fn persistent_nonnegative_h(trace: &GeodesicTrace) -> usize {
    match trace.h.iter().rposition(|h| *h < 0.0) {
        Some(i) => i + 1,
        None => 0,
    }
}

/// Largest decrease of `h` between consecutive samples from index `from` on.
pub fn h_monotonicity_violation(trace: &GeodesicTrace, from: usize) -> f64 {
    trace.h[from.min(trace.len())..]
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralBound {
    /// First time after which `h ≥ 0` persistently.
    pub t0: f64,
    pub lemma: LemmaTimes,
    /// `min_{t > t0} |γ(t)| − RHS(t)`.
    pub margin: f64,
    /// Largest decrease of `h` after `t0`.
    pub h_violation: f64,
    /// `f > 0` on the sampled range, i.e. the monotonicity statement applies.
    pub f_positive: bool,
}

/// Lower bound `|γ(t)| ≥ |γ(t0)| + ∫_{t0}^t tanh(F(y)) dy`,
/// `F(y) = ∫_{t0}^y f(|x0| + z) dz`, checked on the trace's time grid.
pub fn check_theorem_integral_bound(trace: &GeodesicTrace, metric: &MetricField) -> Result<IntegralBound> {
    let t_end = *trace.t.last().unwrap_or(&0.0);
    let i0 = persistent_nonnegative_h(trace);
    if i0 >= trace.len() || trace.t[i0] > 0.5 * t_end {
        return Err(Error::InapplicableTheorem(format!(
            "no persistent h >= 0 crossing before T/2 = {}",
            0.5 * t_end
        )));
    }
    let t0 = trace.t[i0];
    let x0 = norm(trace.position(0));
    let step = (trace.dt * 10.0).max(1e-3);
    let f = envelope_f(metric, x0 + t_end + step, step);
    let ts = &trace.t[i0..];
    let fz: Vec<f64> = ts.iter().map(|t| f.eval(x0 + t)).collect();
    let big_f = cumulative_trapezoid(ts, &fz);
    let integrand: Vec<f64> = big_f.iter().map(|v| v.tanh()).collect();
    let grow = cumulative_trapezoid(ts, &integrand);
    let r0 = trace.r[i0];
    let margin = trace.r[i0..]
        .iter()
        .zip(&grow)
        .skip(1)
        .map(|(r, g)| r - (r0 + g))
        .fold(f64::INFINITY, f64::min);
    Ok(IntegralBound {
        t0,
        lemma: crossing_times(trace, metric.r_c),
        margin,
        h_violation: h_monotonicity_violation(trace, i0),
        f_positive: fz.iter().all(|v| *v > 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Dichotomy {
    Escapes { final_radius: f64 },
    HitsBoundary { t0: f64 },
    Undecided,
}

/// Exterior classification: escape past `escape_radius`, a boundary hit, or
/// neither within the trace.
pub fn exterior_dichotomy(trace: &GeodesicTrace, metric: &MetricField, escape_radius: f64) -> Result<Dichotomy> {
    if !metric.exterior {
        return Err(Error::param("exterior dichotomy needs an exterior metric"));
    }
    if let Some(t0) = trace.boundary_time {
        if trace.reflection_times.is_empty() {
            return Ok(Dichotomy::HitsBoundary { t0 });
        }
    }
    let last = *trace.r.last().unwrap_or(&0.0);
    if last > escape_radius {
        Ok(Dichotomy::Escapes { final_radius: last })
    } else if let Some(t0) = trace.boundary_time {
        Ok(Dichotomy::HitsBoundary { t0 })
    } else {
        Ok(Dichotomy::Undecided)
    }
}
