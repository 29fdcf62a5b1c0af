//! Unit-speed geodesics by fixed-step RK4 and the escape diagnostics.

mod batch;
mod theorems;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::metric::MetricField;

pub use batch::{batch_shoot, shot_directions, BatchOptions, BatchReport, EscapeReport, Verdict};
pub use theorems::{
    c0, check_theorem_integral_bound, check_theorem_velocity_bound, crossing_times, envelope_f,
    exterior_dichotomy, h_monotonicity_violation, Dichotomy, IntegralBound, LemmaTimes, VelocityBound,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub dt: f64,
    /// Rescale `v` to unit `g`-speed after every step.
    pub renormalize: bool,
    /// Specular reflection at `|x| = r_c` for exterior metrics; otherwise the
    /// trace stops there.
    pub reflect: bool,
    /// Keep every k-th step (events and the final state are always kept).
    pub record_every: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            renormalize: false,
            reflect: false,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    HitInnerBoundary,
}

/// Sampled geodesic with its diagnostic series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicTrace {
    pub dim: usize,
    pub t: Vec<f64>,
    /// Positions, row-major `len × dim`.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    /// `⟨∂r, γ'⟩_g`.
    pub h: Vec<f64>,
    /// `| |v|²_g − 1 |`.
    pub speed_drift: Vec<f64>,
    pub dt: f64,
    pub method: String,
    pub renormalized: bool,
    pub termination: Termination,
    pub reflection_times: Vec<f64>,
    pub boundary_time: Option<f64>,
}

impl GeodesicTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> GeodesicState {
        let i = self.len() - 1;
        GeodesicState {
            t: self.t[i],
            x: self.position(i).to_vec(),
            v: self.velocity(i).to_vec(),
        }
    }

    pub fn max_speed_drift(&self) -> f64 {
        self.speed_drift.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `t,x1..xn,v1..vn,r,h,speed_drift`.
    pub fn to_csv(&self) -> String {
        let n = self.dim;
        let mut out = String::from("t");
        for k in 1..=n {
            out.push_str(&format!(",x{k}"));
        }
        for k in 1..=n {
            out.push_str(&format!(",v{k}"));
        }
        out.push_str(",r,h,speed_drift\n");
        for i in 0..self.len() {
            out.push_str(&format!("{:.9e}", self.t[i]));
            for c in self.position(i).iter().chain(self.velocity(i)) {
                out.push_str(&format!(",{c:.12e}"));
            }
            out.push_str(&format!(
                ",{:.12e},{:.12e},{:.6e}\n",
                self.r[i], self.h[i], self.speed_drift[i]
            ));
        }
        out
    }

    fn push(&mut self, metric: &MetricField, t: f64, x: &[f64], v: &[f64]) {
        self.t.push(t);
        self.x.extend_from_slice(x);
        self.v.extend_from_slice(v);
        self.r.push(norm(x));
        self.h.push(metric.radial_component(x, v));
        self.speed_drift.push((metric.speed_sq(x, v) - 1.0).abs());
    }
}

/// `(dx/dt, dv/dt) = (v, −Γ(x)(v, v))`.
pub fn geodesic_rhs(metric: &MetricField, state: &GeodesicState) -> Result<(Vec<f64>, Vec<f64>)> {
    metric.check_point(&state.x)?;
    Ok((state.v.clone(), metric.geodesic_accel(&state.x, &state.v)))
}

fn rk4_step(metric: &MetricField, x: &[f64], v: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    let k1x = v.to_vec();
    let k1v = metric.geodesic_accel(x, v);
    let x2 = axpy(x, 0.5 * dt, &k1x);
    let v2 = axpy(v, 0.5 * dt, &k1v);
    let k2v = metric.geodesic_accel(&x2, &v2);
    let x3 = axpy(x, 0.5 * dt, &v2);
    let v3 = axpy(v, 0.5 * dt, &k2v);
    let k3v = metric.geodesic_accel(&x3, &v3);
    let x4 = axpy(x, dt, &v3);
    let v4 = axpy(v, dt, &k3v);
    let k4v = metric.geodesic_accel(&x4, &v4);
    let xn = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let vn = (0..v.len())
        .map(|i| v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]))
        .collect();
    (xn, vn)
}

/// Rescales `v` to unit `g`-speed at `x`.
pub fn normalize_velocity(metric: &MetricField, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let s = metric.speed_sq(x, v);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::param("initial direction has zero or undefined g-length"));
    }
    Ok(v.iter().map(|c| c / s.sqrt()).collect())
}

/// Specular reflection `v ↦ v − 2hω` at `|x| = r_c`. Since `Gω = ω` there,
/// `ω` is the `g`-unit normal and `|v|_g` is preserved exactly.
pub fn reflect_at_inner_boundary(metric: &MetricField, state: &GeodesicState) -> Result<GeodesicState> {
    let r = norm(&state.x);
    if (r - metric.r_c).abs() > 1e-6 * metric.r_c.max(1.0) {
        return Err(Error::Domain {
            point: state.x.clone(),
            radius: r,
            r_c: metric.r_c,
        });
    }
    let omega: Vec<f64> = state.x.iter().map(|c| c / r).collect();
    let h = metric.radial_component(&state.x, &state.v);
    Ok(GeodesicState {
        t: state.t,
        x: state.x.clone(),
        v: state.v.iter().zip(&omega).map(|(vi, wi)| vi - 2.0 * h * wi).collect(),
    })
}

/// Bisection on the sub-step `τ` for `|x(τ)| = r_c`, to `1e-8` in time.
fn locate_boundary(metric: &MetricField, x: &[f64], v: &[f64], dt: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = (0.0, dt);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        let (xm, _) = rk4_step(metric, x, v, mid);
        if norm(&xm) >= metric.r_c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (xb, vb) = rk4_step(metric, x, v, hi);
    (hi, xb, vb)
}

/// Integrates the unit-speed geodesic from `x0` in direction `v0_direction`
/// (rescaled to unit `g`-speed) up to time `t_final`.
pub fn integrate_geodesic(
    metric: &MetricField,
    x0: &[f64],
    v0_direction: &[f64],
    t_final: f64,
    opts: &IntegratorOptions,
) -> Result<GeodesicTrace> {
    metric.check_point(x0)?;
    if v0_direction.len() != metric.dim {
        return Err(Error::Dimension {
            expected: metric.dim,
            got: v0_direction.len(),
        });
    }
    if !(opts.dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::param("dt must be positive and T nonnegative"));
    }
    let stride = opts.record_every.max(1);
    let n_steps = (t_final / opts.dt).round().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    let dt = if n_steps > 0 { t_final / n_steps as f64 } else { opts.dt };

    let mut x = x0.to_vec();
    let mut v = normalize_velocity(metric, x0, v0_direction)?;
    let mut trace = GeodesicTrace {
        dim: metric.dim,
        t: Vec::with_capacity(n_steps / stride + 2),
        x: Vec::new(),
        v: Vec::new(),
        r: Vec::new(),
        h: Vec::new(),
        speed_drift: Vec::new(),
        dt,
        method: "rk4".into(),
        renormalized: opts.renormalize,
        termination: Termination::Completed,
        reflection_times: Vec::new(),
        boundary_time: None,
    };
    trace.push(metric, 0.0, &x, &v);

    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * dt;
        let t1 = step as f64 * dt;
        let (mut xn, mut vn) = rk4_step(metric, &x, &v, dt);
        if metric.exterior && norm(&xn) < metric.r_c {
            let (tau, xb, vb) = locate_boundary(metric, &x, &v, dt);
            let tb = t0 + tau;
            trace.boundary_time.get_or_insert(tb);
            if !opts.reflect {
                trace.push(metric, tb, &xb, &vb);
                trace.termination = Termination::HitInnerBoundary;
                return Ok(trace);
            }
            let reflected = reflect_at_inner_boundary(
                metric,
                &GeodesicState {
                    t: tb,
                    x: xb,
                    v: vb,
                },
            )?;
            trace.reflection_times.push(tb);
            trace.push(metric, tb, &reflected.x, &reflected.v);
            let rest = dt - tau;
            (xn, vn) = if rest > 0.0 {
                rk4_step(metric, &reflected.x, &reflected.v, rest)
            } else {
                (reflected.x, reflected.v)
            };
        }
        if opts.renormalize {
            vn = normalize_velocity(metric, &xn, &vn)?;
        }
        x = xn;
        v = vn;
        if !x.iter().chain(&v).all(|c| c.is_finite()) {
            return Err(Error::param(format!("geodesic state became non-finite at t = {t1}")));
        }
        if step % stride == 0 || step == n_steps {
            trace.push(metric, t1, &x, &v);
        }
    }
    Ok(trace)
}

/// `|γ(t)|` along the trace divided by `t` at the final time.
pub fn asymptotic_speed(trace: &GeodesicTrace) -> f64 {
    let i = trace.len() - 1;
    if trace.t[i] > 0.0 {
        trace.r[i] / trace.t[i]
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests;
