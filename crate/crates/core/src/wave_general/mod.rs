//! `u_tt = Δ_g u` on the annulus `r0 < r < R_max` of the plane, in polar
//! coordinates `g = dr² + γ(r, θ) dθ²`.
//!
//! The operator is the divergence form
//! `Δ_g u = γ^{-1/2} [∂_r(√γ u_r) + ∂_θ(γ^{-1/2} u_θ)]` with fluxes at half
//! nodes, so it is symmetric in the `√γ`-weighted product. Dirichlet rows sit
//! at `r0` and `R_max`; `θ` is periodic. Time stepping is velocity Verlet.

mod experiments;
mod morawetz;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::wave_radial::bump_pow;

pub use experiments::{
    assumption_a, check_assumption_b, spacetime_bound_experiment, uniform_decay_experiment, HypothesisCheck,
    SpacetimeReport, UniformDecayReport,
};
pub use morawetz::{morawetz_integrands, morawetz_residual, MorawetzReport, MorawetzTerms, Multiplier};

pub const CFL: f64 = 0.4;

/// Polar grid with the metric sampled at nodes and flux points.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub r0: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub dr: f64,
    pub dtheta: f64,
    /// `√γ` at nodes, row-major `(n_r + 1) × n_theta`.
    s: Vec<f64>,
    /// `√γ` at `(r_{i+½}, θ_j)`, `n_r × n_theta`.
    s_r: Vec<f64>,
    /// `γ^{-1/2}` at `(r_i, θ_{j+½})`.
    q_t: Vec<f64>,
    inv_s: Vec<f64>,
}

fn gamma_at(metric: &MetricField, r: f64, theta: f64) -> Result<f64> {
    let (sn, cs) = theta.sin_cos();
    let x = [r * cs, r * sn];
    let g = metric.g_unchecked(&x);
    let e = [-sn, cs];
    let ge = [g[(0, 0)] * e[0] + g[(0, 1)] * e[1], g[(1, 0)] * e[0] + g[(1, 1)] * e[1]];
    let tt = e[0] * ge[0] + e[1] * ge[1];
    let cross = cs * ge[0] + sn * ge[1];
    if !(tt > 0.0) || !tt.is_finite() {
        return Err(Error::NonPositiveDefinite {
            point: x.to_vec(),
            min_eigenvalue: tt,
        });
    }
    if cross.abs() > 1e-10 * tt.max(1.0) {
        return Err(Error::param(format!(
            "polar form needs G ω = ω; g(∂r, e_θ) = {cross:e} at r = {r}"
        )));
    }
    Ok(r * r * tt)
}

fn sample(n_rows: usize, n_theta: usize, f: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    (0..n_rows * n_theta)
        .into_par_iter()
        .map(|k| f(k / n_theta, k % n_theta))
        .collect()
}

impl PolarGrid {
    pub fn new(metric: &MetricField, r0: f64, r_max: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if metric.dim != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: metric.dim,
            });
        }
        if !(r0 > 0.0) || !(r_max > r0) || n_r < 4 || n_theta < 4 {
            return Err(Error::param(format!(
                "polar grid needs 0 < r0 < R_max, N_r >= 4, N_theta >= 4 (got {r0}, {r_max}, {n_r}, {n_theta})"
            )));
        }
        if metric.exterior && r0 < metric.r_c * (1.0 - 1e-12) {
            return Err(Error::Domain {
                point: vec![r0, 0.0],
                radius: r0,
                r_c: metric.r_c,
            });
        }
        let dr = (r_max - r0) / n_r as f64;
        let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
        let sq = |r: f64, th: f64| gamma_at(metric, r, th).map(f64::sqrt);
        let s = sample(n_r + 1, n_theta, |i, j| sq(r0 + i as f64 * dr, j as f64 * dtheta))?;
        let s_r = sample(n_r, n_theta, |i, j| sq(r0 + (i as f64 + 0.5) * dr, j as f64 * dtheta))?;
        let q_t = sample(n_r + 1, n_theta, |i, j| {
            sq(r0 + i as f64 * dr, (j as f64 + 0.5) * dtheta).map(|v| 1.0 / v)
        })?;
        let inv_s = s.iter().map(|v| 1.0 / v).collect();
        Ok(Self {
            r0,
            r_max,
            n_r,
            n_theta,
            dr,
            dtheta,
            s,
            s_r,
            q_t,
            inv_s,
        })
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.dr
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    pub fn len(&self) -> usize {
        (self.n_r + 1) * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// `√γ` at node `(i, j)`.
    pub fn sqrt_gamma(&self, i: usize, j: usize) -> f64 {
        self.s[self.idx(i, j)]
    }

    /// `0.4 · min(dr, min √γ dθ)`.
    pub fn max_stable_dt(&self) -> f64 {
        let ang = self.q_t.iter().map(|q| self.dtheta / q).fold(f64::INFINITY, f64::min);
        let ang_nodes = self.s[self.n_theta..self.n_r * self.n_theta]
            .iter()
            .map(|s| s * self.dtheta)
            .fold(f64::INFINITY, f64::min);
        CFL * self.dr.min(ang).min(ang_nodes)
    }

    /// Discrete `Δ_g u`; zero on the two Dirichlet rows.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let nt = self.n_theta;
        let (idr2, idt2) = (1.0 / (self.dr * self.dr), 1.0 / (self.dtheta * self.dtheta));
        out.par_chunks_mut(nt).with_min_len(8).enumerate().for_each(|(i, row)| {
            if i == 0 || i == self.n_r {
                row.fill(0.0);
                return;
            }
            let c0 = i * nt;
            let (um, uc, up) = (&u[c0 - nt..c0], &u[c0..c0 + nt], &u[c0 + nt..c0 + 2 * nt]);
            let (sm, sp) = (&self.s_r[c0 - nt..c0], &self.s_r[c0..c0 + nt]);
            let (q, is) = (&self.q_t[c0..c0 + nt], &self.inv_s[c0..c0 + nt]);
            let at = |j: usize, jm: usize, jp: usize| {
                let c = uc[j];
                let fr = sp[j] * (up[j] - c) - sm[j] * (c - um[j]);
                let ft = q[j] * (uc[jp] - c) - q[jm] * (c - uc[jm]);
                (fr * idr2 + ft * idt2) * is[j]
            };
            row[0] = at(0, nt - 1, 1);
            for j in 1..nt - 1 {
                row[j] = at(j, j - 1, j + 1);
            }
            row[nt - 1] = at(nt - 1, nt - 2, 0);
        });
    }

    /// `⟨u, v⟩ = Σ u v √γ dr dθ`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.s)
            .map(|((a, b), s)| a * b * s)
            .sum::<f64>()
            * self.dr
            * self.dtheta
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveField {
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub t: f64,
    #[serde(skip)]
    lu: Option<Vec<f64>>,
}

impl WaveField {
    pub fn new(u: Vec<f64>, u_t: Vec<f64>) -> Self {
        Self { u, u_t, t: 0.0, lu: None }
    }

    pub fn zeros(grid: &PolarGrid) -> Self {
        Self::new(vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    /// Samples `u0(r, θ)`, `u1(r, θ)` with the Dirichlet rows zeroed.
    pub fn from_data(
        grid: &PolarGrid,
        u0: impl Fn(f64, f64) -> f64,
        u1: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut u = vec![0.0; grid.len()];
        let mut ut = vec![0.0; grid.len()];
        for i in 1..grid.n_r {
            for j in 0..grid.n_theta {
                let (r, th) = (grid.r(i), grid.theta(j));
                u[grid.idx(i, j)] = u0(r, th);
                ut[grid.idx(i, j)] = u1(r, th);
            }
        }
        Self::new(u, ut)
    }

    /// Shifts the field by `k` angular cells.
    pub fn rotated(&self, grid: &PolarGrid, k: usize) -> Self {
        let nt = grid.n_theta;
        let rot = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for (row_in, row_out) in v.chunks(nt).zip(out.chunks_mut(nt)) {
                for j in 0..nt {
                    row_out[(j + k) % nt] = row_in[j];
                }
            }
            out
        };
        Self {
            u: rot(&self.u),
            u_t: rot(&self.u_t),
            t: self.t,
            lu: None,
        }
    }
}

/// One velocity Verlet step.
pub fn step_wave(field: &mut WaveField, grid: &PolarGrid, dt: f64) -> Result<()> {
    let limit = grid.max_stable_dt();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut lu = field.lu.take().unwrap_or_else(|| {
        let mut l = vec![0.0; grid.len()];
        grid.apply(&field.u, &mut l);
        l
    });
    field
        .u
        .par_iter_mut()
        .zip(field.u_t.par_iter_mut())
        .zip(lu.par_iter())
        .with_min_len(1024)
        .for_each(|((u, ut), l)| {
            *ut += 0.5 * dt * l;
            *u += dt * *ut;
        });
    grid.apply(&field.u, &mut lu);
    field
        .u_t
        .par_iter_mut()
        .zip(lu.par_iter())
        .with_min_len(1024)
        .for_each(|(ut, l)| *ut += 0.5 * dt * l);
    field.t += dt;
    field.lu = Some(lu);
    Ok(())
}

/// Energies at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub total: f64,
    pub local: f64,
    /// `∫ r^{−s1}(u_t² + |∇_g u|²_g) dx_g` (no factor ½).
    pub weighted_density: f64,
}

/// Energy sums in the conserved semi-discrete form: `u_t²` at nodes, `u_r²`
/// at radial flux points, `γ^{-1} u_θ²` at angular flux points. The local
/// energy keeps the points with `r ≤ a`.
pub fn energies(field: &WaveField, grid: &PolarGrid, a: f64, s1: f64) -> EnergySample {
    let nt = grid.n_theta;
    let (dr, dth) = (grid.dr, grid.dtheta);
    let rows: Vec<[f64; 3]> = (0..grid.n_r + 1)
        .into_par_iter()
        .with_min_len(8)
        .map(|i| {
            let r = grid.r(i);
            let rh = r + 0.5 * dr;
            let (wn, wh) = (r.powf(-s1), rh.powf(-s1));
            let (mut node, mut half) = (0.0, 0.0);
            let c0 = i * nt;
            for j in 0..nt {
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let ut = field.u_t[c0 + j];
                let dt = (field.u[c0 + jp] - field.u[c0 + j]) / dth;
                node += ut * ut * grid.s[c0 + j] + dt * dt * grid.q_t[c0 + j];
                if i < grid.n_r {
                    let d = (field.u[c0 + nt + j] - field.u[c0 + j]) / dr;
                    half += d * d * grid.s_r[c0 + j];
                }
            }
            let local = if r <= a { node } else { 0.0 } + if rh <= a { half } else { 0.0 };
            [node + half, local, wn * node + wh * half]
        })
        .collect();
    let mut acc = [0.0; 3];
    for row in &rows {
        for k in 0..3 {
            acc[k] += row[k];
        }
    }
    let cell = dr * dth;
    EnergySample {
        total: 0.5 * acc[0] * cell,
        local: 0.5 * acc[1] * cell,
        weighted_density: acc[2] * cell,
    }
}

/// `∫ u u_r dx_g` and `−∫ (m2 / 2r) u² dx_g` (equal for compactly supported
/// `u` when `Δ_g r = m2 / r`).
pub fn lemma_uu_r(field_u: &[f64], grid: &PolarGrid, m2: f64) -> (f64, f64) {
    let nt = grid.n_theta;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 1..grid.n_r {
        let r = grid.r(i);
        for j in 0..nt {
            let k = grid.idx(i, j);
            let ur = (field_u[k + nt] - field_u[k - nt]) / (2.0 * grid.dr);
            lhs += field_u[k] * ur * grid.s[k];
            rhs -= 0.5 * m2 / r * field_u[k] * field_u[k] * grid.s[k];
        }
    }
    let cell = grid.dr * grid.dtheta;
    (lhs * cell, rhs * cell)
}

fn default_amp() -> f64 {
    0.5
}

fn default_power() -> i32 {
    3
}

fn default_record_every() -> usize {
    10
}

fn default_cfl() -> f64 {
    CFL
}

/// Grid, data and diagnostics for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub r0: f64,
    #[serde(rename = "R0_support")]
    pub r0_support: f64,
    /// Local energy radius.
    pub a: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    #[serde(rename = "N_theta")]
    pub n_theta: usize,
    /// Weight exponent of the space-time accumulator; defaults to the metric's
    /// `s1` parameter, or 0.
    #[serde(default)]
    pub s1: Option<f64>,
    /// Data `bump(r)(1 + A cos θ)`.
    #[serde(default = "default_amp")]
    pub angular_amplitude: f64,
    #[serde(default)]
    pub bump: Option<[f64; 2]>,
    #[serde(default = "default_power")]
    pub bump_power: i32,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Courant number, at most `CFL`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Check `u = 0` on `r ≥ R0_support + t` after every step.
    #[serde(default)]
    pub check_finite_speed: bool,
    /// Decay/plateau window; defaults depend on the experiment.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Run the experiments even when a hypothesis fails.
    #[serde(default)]
    pub force: bool,
}

impl WaveConfig {
    pub fn new(r0: f64, r0_support: f64, a: f64, t_final: f64, n_r: usize, n_theta: usize) -> Self {
        Self {
            r0,
            r0_support,
            a,
            t_final,
            n_r,
            n_theta,
            s1: None,
            angular_amplitude: default_amp(),
            bump: None,
            bump_power: default_power(),
            record_every: default_record_every(),
            cfl: CFL,
            check_finite_speed: false,
            window: None,
            force: false,
        }
    }

    pub fn bump_support(&self) -> [f64; 2] {
        self.bump.unwrap_or_else(|| {
            let w = self.r0_support - self.r0;
            [self.r0 + 0.25 * w, self.r0 + 0.75 * w]
        })
    }

    /// `r0 + L` with `L` the power of two at or above `R0_support + T + 1`.
    pub fn r_max(&self) -> f64 {
        let need = (self.r0_support + self.t_final + 1.0).ceil().max(1.0) as u64;
        self.r0 + need.next_power_of_two() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let [a1, a2] = self.bump_support();
        if !(self.r0 > 0.0 && self.r0 < a1 && a1 < a2 && a2 <= self.r0_support) {
            return Err(Error::Config(format!(
                "need 0 < r0 < a1 < a2 <= R0_support (r0 = {}, bump = [{a1}, {a2}], R0_support = {})",
                self.r0, self.r0_support
            )));
        }
        if !(self.a > self.r0 && self.a < self.r_max()) {
            return Err(Error::Config(format!("need r0 < a < R_max, got a = {}", self.a)));
        }
        if !(self.t_final > 0.0) || self.record_every == 0 || self.bump_power < 1 {
            return Err(Error::Config("need T > 0, record_every >= 1 and bump_power >= 1".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= CFL) {
            return Err(Error::Config(format!("need 0 < cfl <= {CFL}, got {}", self.cfl)));
        }
        Ok(())
    }

    fn s1_for(&self, metric: &MetricField) -> f64 {
        self.s1.or_else(|| metric.param("s1")).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WaveSeries {
    pub t: Vec<f64>,
    pub e_total: Vec<f64>,
    pub e_local: Vec<f64>,
    /// Running `S(t)`, trapezoid in time between records.
    pub s_weighted: Vec<f64>,
    pub t_elocal_over_e0: Vec<f64>,
}

impl WaveSeries {
    pub fn max_relative_drift(&self) -> f64 {
        let e0 = self.e_total[0];
        self.e_total.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max)
    }

    /// CSV with header `t,E_total,E_local_a,S_weighted,t_times_Elocal_over_E0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E_total,E_local_a,S_weighted,t_times_Elocal_over_E0\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{:.9e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                self.t[i], self.e_total[i], self.e_local[i], self.s_weighted[i], self.t_elocal_over_e0[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedReport {
    /// `max |u|` over `r ≥ R0_support + t` and all steps.
    pub max_abs_outside: f64,
    pub worst_t: f64,
    pub steps_checked: usize,
}

#[derive(Debug, Clone)]
pub struct WaveRun {
    pub grid: PolarGrid,
    pub dt: f64,
    pub steps: usize,
    pub s1: f64,
    pub series: WaveSeries,
    pub field: WaveField,
    pub finite_speed: Option<FiniteSpeedReport>,
}

/// Separable bump data for a config.
pub fn initial_field(grid: &PolarGrid, cfg: &WaveConfig) -> WaveField {
    let [a1, a2] = cfg.bump_support();
    let (p, amp) = (cfg.bump_power, cfg.angular_amplitude);
    WaveField::from_data(grid, |r, th| bump_pow(r, a1, a2, p) * (1.0 + amp * th.cos()), |_, _| 0.0)
}

pub fn run_wave(metric: &MetricField, cfg: &WaveConfig) -> Result<WaveRun> {
    run_wave_with(metric, cfg, |_, _, _| {})
}

/// Runs to `T`. `observe(field, grid, last)` is called at `t = 0` and after
/// every step.
pub fn run_wave_with(
    metric: &MetricField,
    cfg: &WaveConfig,
    mut observe: impl FnMut(&WaveField, &PolarGrid, bool),
) -> Result<WaveRun> {
    cfg.validate()?;
    let grid = PolarGrid::new(metric, cfg.r0, cfg.r_max(), cfg.n_r, cfg.n_theta)?;
    let field = initial_field(&grid, cfg);
    run_field(grid, field, cfg, cfg.s1_for(metric), &mut observe)
}

/// Steps a prepared field to `cfg.T` with the standard records.
pub fn run_field(
    grid: PolarGrid,
    mut field: WaveField,
    cfg: &WaveConfig,
    s1: f64,
    observe: &mut dyn FnMut(&WaveField, &PolarGrid, bool),
) -> Result<WaveRun> {
    let steps = (cfg.t_final / (grid.max_stable_dt() * cfg.cfl / CFL)).ceil() as usize;
    let dt = cfg.t_final / steps as f64;
    let mut series = WaveSeries::default();
    let mut e0 = 0.0;
    let mut last_density = 0.0;
    let mut record = |f: &WaveField, series: &mut WaveSeries| {
        let e = energies(f, &grid, cfg.a, s1);
        if series.t.is_empty() {
            e0 = e.total;
            series.s_weighted.push(0.0);
        } else {
            let dt_rec = f.t - series.t[series.t.len() - 1];
            let prev = series.s_weighted[series.s_weighted.len() - 1];
            series.s_weighted.push(prev + 0.5 * dt_rec * (last_density + e.weighted_density));
        }
        last_density = e.weighted_density;
        series.t.push(f.t);
        series.e_total.push(e.total);
        series.e_local.push(e.local);
        series
            .t_elocal_over_e0
            .push(if e0 > 0.0 { f.t * e.local / e0 } else { 0.0 });
    };
    let mut fs = cfg.check_finite_speed.then_some(FiniteSpeedReport {
        max_abs_outside: 0.0,
        worst_t: 0.0,
        steps_checked: 0,
    });
    let check = |f: &WaveField, rep: &mut FiniteSpeedReport| {
        let edge = cfg.r0_support + f.t;
        let i0 = ((edge - grid.r0) / grid.dr).ceil().max(0.0) as usize;
        if i0 <= grid.n_r {
            let m = f.u[i0 * grid.n_theta..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > rep.max_abs_outside {
                rep.max_abs_outside = m;
                rep.worst_t = f.t;
            }
        }
        rep.steps_checked += 1;
    };
    record(&field, &mut series);
    if let Some(rep) = fs.as_mut() {
        check(&field, rep);
    }
    observe(&field, &grid, steps == 0);
    for k in 1..=steps {
        step_wave(&mut field, &grid, dt)?;
        if k % cfg.record_every == 0 || k == steps {
            record(&field, &mut series);
        }
        if let Some(rep) = fs.as_mut() {
            check(&field, rep);
        }
        observe(&field, &grid, k == steps);
    }
    Ok(WaveRun {
        grid,
        dt,
        steps,
        s1,
        series,
        field,
        finite_speed: fs,
    })
}

/// Snapshot CSV: a `#` header line with `N_r, N_theta, r0, R_max, t`, then
/// `r,theta,u` per node.
pub fn snapshot_csv(field: &WaveField, grid: &PolarGrid) -> String {
    let mut out = format!(
        "# N_r={} N_theta={} r0={} R_max={} t={:.9e}\nr,theta,u\n",
        grid.n_r, grid.n_theta, grid.r0, grid.r_max, field.t
    );
    for i in 0..=grid.n_r {
        for j in 0..grid.n_theta {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.12e}\n",
                grid.r(i),
                grid.theta(j),
                field.u[grid.idx(i, j)]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests;
