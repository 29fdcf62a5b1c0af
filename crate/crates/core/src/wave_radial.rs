//! Radial waves `u_tt = u_rr + (m/r) u_r` on `(r0, R_max)` with `u(r0) = 0`.
//!
//! The operator is discretised in flux form,
//! `(Lu)_i = [w_{i+½}(u_{i+1} − u_i) − w_{i−½}(u_i − u_{i−1})] / (w_i dr²)`,
//! `w = r^m`, which is symmetric in the `w`-weighted inner product. Time
//! stepping is kick-drift-kick velocity Verlet (leapfrog). `R_max` is chosen
//! beyond the reach of the data by time `T`, so the outer boundary is never
//! touched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CFL: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r0: f64,
    pub r_max: f64,
    pub n: usize,
    pub dr: f64,
    pub m: f64,
    w: Vec<f64>,
    /// `w_{i+½}` for `i = 0..n`.
    w_half: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r0: f64, r_max: f64, n: usize, m: f64) -> Result<Self> {
        if !(r0 > 0.0) || !(r_max > r0) || n < 4 {
            return Err(Error::param(format!(
                "radial grid needs 0 < r0 < R_max and N >= 4 (got r0 = {r0}, R_max = {r_max}, N = {n})"
            )));
        }
        let dr = (r_max - r0) / n as f64;
        let w = (0..=n).map(|i| (r0 + i as f64 * dr).powf(m)).collect();
        let w_half = (0..n).map(|i| (r0 + (i as f64 + 0.5) * dr).powf(m)).collect();
        Ok(Self {
            r0,
            r_max,
            n,
            dr,
            m,
            w,
            w_half,
        })
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.dr
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.r(i)).collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    /// Discrete `u_rr + (m/r) u_r`, zero at the two Dirichlet nodes.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.dr * self.dr);
        out[0] = 0.0;
        out[self.n] = 0.0;
        for i in 1..self.n {
            let flux_r = self.w_half[i] * (u[i + 1] - u[i]);
            let flux_l = self.w_half[i - 1] * (u[i] - u[i - 1]);
            out[i] = (flux_r - flux_l) * inv / self.w[i];
        }
    }

    pub fn max_stable_dt(&self) -> f64 {
        CFL * self.dr
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialWaveState {
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub t: f64,
    #[serde(skip)]
    lu: Option<Vec<f64>>,
}

impl RadialWaveState {
    pub fn new(u: Vec<f64>, u_t: Vec<f64>) -> Self {
        Self {
            u,
            u_t,
            t: 0.0,
            lu: None,
        }
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self::new(vec![0.0; grid.n + 1], vec![0.0; grid.n + 1])
    }

    /// `u = u0(r)`, `u_t = u1(r)`, with the Dirichlet values enforced.
    pub fn from_data(grid: &RadialGrid, u0: impl Fn(f64) -> f64, u1: impl Fn(f64) -> f64) -> Self {
        let mut u: Vec<f64> = grid.nodes().into_iter().map(&u0).collect();
        let mut ut: Vec<f64> = grid.nodes().into_iter().map(&u1).collect();
        for v in [&mut u, &mut ut] {
            v[0] = 0.0;
            let n = v.len() - 1;
            v[n] = 0.0;
        }
        Self::new(u, ut)
    }
}

/// One leapfrog step.
pub fn step_radial(state: &mut RadialWaveState, grid: &RadialGrid, dt: f64) -> Result<()> {
    let limit = grid.max_stable_dt();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let n = grid.n;
    let mut lu = state.lu.take().unwrap_or_else(|| {
        let mut l = vec![0.0; n + 1];
        grid.apply(&state.u, &mut l);
        l
    });
    for i in 1..n {
        state.u_t[i] += 0.5 * dt * lu[i];
        state.u[i] += dt * state.u_t[i];
    }
    grid.apply(&state.u, &mut lu);
    for i in 1..n {
        state.u_t[i] += 0.5 * dt * lu[i];
    }
    state.u[0] = 0.0;
    state.u_t[0] = 0.0;
    state.t += dt;
    state.lu = Some(lu);
    Ok(())
}

/// `(E_total, E_local)` with `E = ½ ∫ (u_t² + u_r²) r^m dr`: nodal sums for
/// `u_t²`, half-node differences for `u_r²`. `E_local` keeps nodes and
/// half-nodes with `r ≤ a`.
pub fn radial_energy(state: &RadialWaveState, grid: &RadialGrid, a: f64) -> (f64, f64) {
    let dr = grid.dr;
    let mut total = 0.0;
    let mut local = 0.0;
    for i in 0..=grid.n {
        let e = 0.5 * state.u_t[i] * state.u_t[i] * grid.w[i] * dr;
        total += e;
        if grid.r(i) <= a {
            local += e;
        }
    }
    for i in 0..grid.n {
        let d = (state.u[i + 1] - state.u[i]) / dr;
        let e = 0.5 * d * d * grid.w_half[i] * dr;
        total += e;
        if grid.r0 + (i as f64 + 0.5) * dr <= a {
            local += e;
        }
    }
    (total, local)
}

/// `((r − a1)(a2 − r))³` normalised to peak 1, zero outside `[a1, a2]`.
pub fn bump(r: f64, a1: f64, a2: f64) -> f64 {
    bump_pow(r, a1, a2, 3)
}

/// `((r − a1)(a2 − r))^p` normalised to peak 1; `C^{p−1}` at the edges.
pub fn bump_pow(r: f64, a1: f64, a2: f64, p: i32) -> f64 {
    if r <= a1 || r >= a2 {
        return 0.0;
    }
    let half = 0.5 * (a2 - a1);
    ((r - a1) * (a2 - r) / (half * half)).powi(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    pub m: f64,
    pub r0: f64,
    /// Local energy radius.
    pub a: f64,
    /// Data are supported in `r < R0_support`.
    #[serde(rename = "R0_support")]
    pub r0_support: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Bump support `[a1, a2]`; defaults to the middle of `(r0, R0_support)`.
    #[serde(default)]
    pub bump: Option<[f64; 2]>,
    /// Exponent `p` of the bump `((r − a1)(a2 − r))^p`.
    #[serde(default = "default_bump_power")]
    pub bump_power: i32,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_bump_power() -> i32 {
    3
}

fn default_record_every() -> usize {
    10
}

impl RadialConfig {
    pub fn bump_support(&self) -> [f64; 2] {
        self.bump.unwrap_or_else(|| {
            let w = self.r0_support - self.r0;
            [self.r0 + 0.25 * w, self.r0 + 0.75 * w]
        })
    }

    /// `R_max = r0 + L` with `L` the power of two at or above `R0_support + T + 1`,
    /// so nodes keep their positions relative to the data under refinement.
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
        if !(self.a > self.r0) || !(self.t_final > 0.0) || self.record_every == 0 || self.bump_power < 1 {
            return Err(Error::Config("need a > r0, T > 0, record_every >= 1 and bump_power >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergySeries {
    pub t: Vec<f64>,
    pub e_total: Vec<f64>,
    pub e_local: Vec<f64>,
}

impl EnergySeries {
    pub fn max_relative_drift(&self) -> f64 {
        let e0 = self.e_total[0];
        self.e_total.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max)
    }

    /// CSV with header `t,E_total,E_local`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E_total,E_local\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{:.9e},{:.15e},{:.15e}\n",
                self.t[i], self.e_total[i], self.e_local[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RadialRun {
    pub grid: RadialGrid,
    pub dt: f64,
    pub series: EnergySeries,
    pub state: RadialWaveState,
}

/// Runs the bump data to time `T`, recording energies every `record_every` steps.
pub fn run_radial(cfg: &RadialConfig) -> Result<RadialRun> {
    run_radial_with(cfg, |_, _| {})
}

/// As [`run_radial`], calling `observe(state, grid)` after every recorded step.
pub fn run_radial_with(
    cfg: &RadialConfig,
    mut observe: impl FnMut(&RadialWaveState, &RadialGrid),
) -> Result<RadialRun> {
    cfg.validate()?;
    let grid = RadialGrid::new(cfg.r0, cfg.r_max(), cfg.n, cfg.m)?;
    let [a1, a2] = cfg.bump_support();
    let p = cfg.bump_power;
    let mut state = RadialWaveState::from_data(&grid, |r| bump_pow(r, a1, a2, p), |_| 0.0);
    let n_steps = (cfg.t_final / grid.max_stable_dt()).ceil() as usize;
    let dt = cfg.t_final / n_steps as f64;
    let mut series = EnergySeries::default();
    let record = |s: &RadialWaveState, series: &mut EnergySeries| {
        let (e, el) = radial_energy(s, &grid, cfg.a);
        series.t.push(s.t);
        series.e_total.push(e);
        series.e_local.push(el);
    };
    record(&state, &mut series);
    observe(&state, &grid);
    for k in 1..=n_steps {
        step_radial(&mut state, &grid, dt)?;
        if k % cfg.record_every == 0 || k == n_steps {
            record(&state, &mut series);
            observe(&state, &grid);
        }
    }
    Ok(RadialRun {
        grid,
        dt,
        series,
        state,
    })
}

/// d'Alembert solution for `m = 2`: `v = r u` solves `v_tt = v_rr` with
/// `v(r0) = 0`, so `v(r, t) = ½[V(r − t) + V(r + t)]` with `V` the odd
/// extension of `r u0(r)` about `r0` (zero initial velocity).
pub fn dalembert_m2(r: f64, t: f64, r0: f64, u0: impl Fn(f64) -> f64) -> f64 {
    let v = |s: f64| {
        if s >= r0 {
            s * u0(s)
        } else {
            let m = 2.0 * r0 - s;
            -m * u0(m)
        }
    };
    0.5 * (v(r - t) + v(r + t)) / r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DecayClass {
    FiniteTimeZero { t_zero: f64 },
    Exponential { rate: f64 },
    Polynomial { exponent: f64 },
    Inconclusive,
}

impl DecayClass {
    pub fn name(&self) -> &'static str {
        match self {
            DecayClass::FiniteTimeZero { .. } => "finite_time_zero",
            DecayClass::Exponential { .. } => "exponential",
            DecayClass::Polynomial { .. } => "polynomial",
            DecayClass::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub class: DecayClass,
    pub window: [f64; 2],
    /// Slope of `ln E` against `t` and its `R²`.
    pub exp_slope: f64,
    pub r2_exp: f64,
    /// Slope of `ln E` against `ln t` and its `R²`.
    pub poly_slope: f64,
    pub r2_poly: f64,
    pub samples: usize,
}

pub const ZERO_THRESHOLD: f64 = 1e-12;
pub const R2_MARGIN: f64 = 0.1;
/// On short windows both fits can exceed `R² = 0.95`; the winner must then
/// leave at least this many times less unexplained variance.
pub const RESIDUAL_RATIO: f64 = 10.0;

fn wins(r2: f64, other: f64) -> bool {
    r2 >= other + R2_MARGIN || (r2 >= 0.95 && RESIDUAL_RATIO * (1.0 - r2) <= 1.0 - other)
}

/// Least squares `y ≈ c + s x`; returns `(s, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// Classifies the local energy decay on `t ∈ [t_lo, t_hi]`. `e0` is the
/// total energy at `t = 0`.
pub fn decay_classify(t: &[f64], e: &[f64], e0: f64, t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= t_lo && t[i] <= t_hi).collect();
    if idx.len() < 8 || !(t_lo > 0.0) {
        return Err(Error::param("decay fit window needs at least 8 samples with t > 0"));
    }
    let zero = idx.iter().find(|&&i| e[i] < ZERO_THRESHOLD * e0).copied();
    let lt: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let lx: Vec<f64> = lt.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = idx.iter().map(|&i| e[i].max(f64::MIN_POSITIVE).ln()).collect();
    let (exp_slope, r2_exp) = linear_fit(&lt, &ly);
    let (poly_slope, r2_poly) = linear_fit(&lx, &ly);
    let class = if let Some(i) = zero {
        DecayClass::FiniteTimeZero { t_zero: t[i] }
    } else if wins(r2_poly, r2_exp) {
        DecayClass::Polynomial { exponent: poly_slope }
    } else if wins(r2_exp, r2_poly) {
        DecayClass::Exponential { rate: -exp_slope }
    } else {
        DecayClass::Inconclusive
    };
    Ok(DecayFit {
        class,
        window: [t_lo, t_hi],
        exp_slope,
        r2_exp,
        poly_slope,
        r2_poly,
        samples: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_has_zero_energy() {
        let g = RadialGrid::new(1.0, 5.0, 64, 2.0).unwrap();
        let mut s = RadialWaveState::zeros(&g);
        assert_eq!(radial_energy(&s, &g, 3.0), (0.0, 0.0));
        step_radial(&mut s, &g, g.max_stable_dt()).unwrap();
        assert!(s.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cfl_enforced() {
        let g = RadialGrid::new(1.0, 5.0, 64, 1.0).unwrap();
        let mut s = RadialWaveState::zeros(&g);
        assert!(matches!(step_radial(&mut s, &g, g.dr), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn operator_is_symmetric_in_weighted_product() {
        let g = RadialGrid::new(1.0, 4.0, 50, 3.0).unwrap();
        let mut u: Vec<f64> = (0..=50).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let mut v: Vec<f64> = (0..=50).map(|i| ((i * 104729) % 89) as f64 / 89.0 - 0.5).collect();
        for f in [&mut u, &mut v] {
            f[0] = 0.0;
            f[50] = 0.0;
        }
        let (mut lu, mut lv) = (vec![0.0; 51], vec![0.0; 51]);
        g.apply(&u, &mut lu);
        g.apply(&v, &mut lv);
        let ip = |a: &[f64], b: &[f64]| (0..=50).map(|i| a[i] * b[i] * g.weight(i)).sum::<f64>();
        let (x, y) = (ip(&lu, &v), ip(&u, &lv));
        assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn m_zero_translates_pulse() {
        let cfg = RadialConfig {
            m: 0.0,
            r0: 1.0,
            a: 10.0,
            r0_support: 6.0,
            t_final: 2.0,
            n: 4000,
            bump: Some([4.0, 6.0]),
            bump_power: 3,
            record_every: 1000,
        };
        let run = run_radial(&cfg).unwrap();
        // u(r, t) = ½ u0(r − t) + ½ u0(r + t) away from the wall.
        for i in (0..=run.grid.n).step_by(37) {
            let r = run.grid.r(i);
            let exact = 0.5 * (bump(r - 2.0, 4.0, 6.0) + bump(r + 2.0, 4.0, 6.0));
            assert!((run.state.u[i] - exact).abs() < 2e-3);
        }
    }

    #[test]
    fn linear_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (s, r2) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn classifier_on_synthetic_series() {
        let t: Vec<f64> = (0..200).map(|k| 1.0 + k as f64 * 0.5).collect();
        let poly: Vec<f64> = t.iter().map(|v| v.powf(-3.0)).collect();
        let expo: Vec<f64> = t.iter().map(|v| (-0.2 * v).exp()).collect();
        let zero: Vec<f64> = t.iter().map(|v| if *v > 50.0 { 0.0 } else { 1.0 }).collect();
        let fit = decay_classify(&t, &poly, 1.0, 10.0, 100.0).unwrap();
        assert!(matches!(fit.class, DecayClass::Polynomial { exponent } if (exponent + 3.0).abs() < 1e-10));
        let fit = decay_classify(&t, &expo, 1.0, 10.0, 100.0).unwrap();
        assert!(matches!(fit.class, DecayClass::Exponential { rate } if (rate - 0.2).abs() < 1e-10));
        let fit = decay_classify(&t, &zero, 1.0, 10.0, 100.0).unwrap();
        assert!(matches!(fit.class, DecayClass::FiniteTimeZero { t_zero } if t_zero > 50.0));
    }

    #[test]
    fn dalembert_oracle_satisfies_boundary_condition() {
        for t in [0.0, 0.7, 2.5] {
            assert!(dalembert_m2(1.0, t, 1.0, |r| bump(r, 1.5, 2.5)).abs() < 1e-15);
        }
    }
}
