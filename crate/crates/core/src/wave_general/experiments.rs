//! Uniform local-energy decay and the weighted space-time bound, checked as
//! non-divergence of windowed statistics.

use serde::{Deserialize, Serialize};

use super::{run_wave, WaveConfig, WaveSeries};
use crate::error::{Error, Result};
use crate::metric::{Family, MetricField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(name: &str, holds: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            holds,
            detail,
        }
    }
}

/// `(m1, m2)` of a family with `α = (m1 − 1)/r` and `Δ_g r = m2/r` outside
/// `r0`, gated on `m1 > 1/2`.
pub fn assumption_a(metric: &MetricField) -> Result<(f64, f64)> {
    let (m1, m2) = match metric.family {
        Family::Euclidean => (1.0, metric.dim as f64 - 1.0),
        Family::RadialPower => (
            metric.param("m1").unwrap_or(1.0),
            metric.param("m2").unwrap_or(metric.dim as f64 - 1.0),
        ),
        other => {
            return Err(Error::HypothesisViolation(format!(
                "family {} is not of the form alpha = (m1 - 1)/r, det G = r^(2 m2 - 2(n-1))",
                other.name()
            )))
        }
    };
    if !(m1 > 0.5) {
        return Err(Error::HypothesisViolation(format!("uniform decay needs m1 > 1/2, got m1 = {m1}")));
    }
    Ok((m1, m2))
}

/// The four inequalities on `(m1, m2, s1, s2)` at `r0`. Non-`radial_exp`
/// metrics fail the first check.
pub fn check_assumption_b(metric: &MetricField, r0: f64) -> Vec<HypothesisCheck> {
    if metric.family != Family::RadialExp {
        return vec![HypothesisCheck::new(
            "family",
            false,
            format!("{} is not an alpha = m1 r^-s1 - 1/r family", metric.family.name()),
        )];
    }
    let p = |k: &str| metric.param(k).unwrap_or(f64::NAN);
    let (m1, m2, s1, s2) = (p("m1"), p("m2"), p("s1"), p("s2"));
    let n1 = metric.dim as f64 - 1.0;
    let lhs = (s2 + 1.0) * r0.powf(s2 - 1.0);
    let floor = n1 * m1 * r0.powf(s2 - s1);
    vec![
        HypothesisCheck::new("s1 > 1", s1 > 1.0, format!("s1 = {s1}")),
        HypothesisCheck::new("0 < s2 <= 1", s2 > 0.0 && s2 <= 1.0, format!("s2 = {s2}")),
        HypothesisCheck::new(
            "(s2 + 1) r0^(s2 - 1) < m2",
            lhs < m2,
            format!("{lhs} vs m2 = {m2}"),
        ),
        HypothesisCheck::new(
            "m2 >= (n - 1) m1 r0^(s2 - s1)",
            m2 >= floor,
            format!("m2 = {m2} vs {floor}"),
        ),
    ]
}

fn max_over(series: &WaveSeries, lo: f64, hi: f64) -> f64 {
    series
        .t
        .iter()
        .zip(&series.t_elocal_over_e0)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformDecayReport {
    pub m1: f64,
    pub m2: f64,
    pub window: [f64; 2],
    /// Running max of `t E(t, a)/E(0)` at the window midpoint.
    pub mid_max: f64,
    /// Running max at the end of the window (the last-quarter max).
    pub final_max: f64,
    pub ratio: f64,
    pub pass: bool,
    pub energy_drift: f64,
    pub series: WaveSeries,
}

impl UniformDecayReport {
    pub fn to_text(&self) -> String {
        format!(
            "experiment: uniform_decay\nhypothesis m1 > 1/2: holds (m1 = {}, m2 = {})\nwindow: [{}, {}]\nmid_window_running_max: {:.6e}\nlast_quarter_max: {:.6e}\nratio: {:.6}\nthreshold: 1.2\nenergy_drift: {:.3e}\nverdict: {}\n",
            self.m1,
            self.m2,
            self.window[0],
            self.window[1],
            self.mid_max,
            self.final_max,
            self.ratio,
            self.energy_drift,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Bounded `t E(t, a)/E(0)`: the running max over the window must not grow by
/// more than 20% between the window midpoint and its end. Default window
/// `[20, T]`.
pub fn uniform_decay_experiment(metric: &MetricField, cfg: &WaveConfig) -> Result<UniformDecayReport> {
    let (m1, m2) = assumption_a(metric)?;
    let [lo, hi] = cfg.window.unwrap_or([20.0f64.min(0.5 * cfg.t_final), cfg.t_final]);
    if !(lo < hi && hi <= cfg.t_final) {
        return Err(Error::Config(format!("bad decay window [{lo}, {hi}]")));
    }
    let run = run_wave(metric, cfg)?;
    let mid = 0.5 * (lo + hi);
    let mid_max = max_over(&run.series, lo, mid);
    let final_max = mid_max.max(max_over(&run.series, hi - 0.25 * (hi - lo), hi));
    let ratio = final_max / mid_max;
    Ok(UniformDecayReport {
        m1,
        m2,
        window: [lo, hi],
        mid_max,
        final_max,
        ratio,
        pass: ratio <= 1.2,
        energy_drift: run.series.max_relative_drift(),
        series: run.series,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacetimeReport {
    pub hypotheses: Vec<HypothesisCheck>,
    /// Ran despite a failed hypothesis; the verdict is informational.
    pub forced: bool,
    pub s1: f64,
    /// `S(T)/E(0)`.
    pub s_final: f64,
    /// `S(3T/4)/E(0)`.
    pub s_three_quarters: f64,
    /// `(S(T) − S(3T/4)) / S(T)`.
    pub last_quarter_fraction: f64,
    pub pass: bool,
    pub series: WaveSeries,
}

impl SpacetimeReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("experiment: spacetime_bound\n");
        for h in &self.hypotheses {
            out.push_str(&format!(
                "hypothesis {}: {} ({})\n",
                h.name,
                if h.holds { "holds" } else { "FAILS" },
                h.detail
            ));
        }
        out.push_str(&format!(
            "forced: {}\ns1: {}\nS(T)/E(0): {:.6e}\nS(3T/4)/E(0): {:.6e}\nlast_quarter_fraction: {:.6e}\nthreshold: 0.05\nverdict: {}{}\n",
            self.forced,
            self.s1,
            self.s_final,
            self.s_three_quarters,
            self.last_quarter_fraction,
            if self.pass { "PASS" } else { "FAIL" },
            if self.forced { " (informational)" } else { "" }
        ));
        out
    }
}

/// Plateau of `S(t)/E(0)`: the last quarter of `[0, T]` adds at most 5% of the
/// total. Failed hypotheses are an error unless `cfg.force`.
pub fn spacetime_bound_experiment(metric: &MetricField, cfg: &WaveConfig) -> Result<SpacetimeReport> {
    let hypotheses = check_assumption_b(metric, cfg.r0);
    let failed: Vec<&str> = hypotheses.iter().filter(|h| !h.holds).map(|h| h.name.as_str()).collect();
    if !failed.is_empty() && !cfg.force {
        return Err(Error::HypothesisViolation(format!(
            "space-time bound hypotheses fail: {}",
            failed.join("; ")
        )));
    }
    let forced = !failed.is_empty();
    let run = run_wave(metric, cfg)?;
    let e0 = run.series.e_total[0];
    let t_q = 0.75 * cfg.t_final;
    let s = &run.series;
    let i_q = s.t.iter().position(|t| *t >= t_q - 1e-12).unwrap_or(0);
    let s_final = s.s_weighted[s.t.len() - 1] / e0;
    let s_three_quarters = s.s_weighted[i_q] / e0;
    let last_quarter_fraction = (s_final - s_three_quarters) / s_final;
    Ok(SpacetimeReport {
        hypotheses,
        forced,
        s1: run.s1,
        s_final,
        s_three_quarters,
        last_quarter_fraction,
        pass: last_quarter_fraction <= 0.05,
        series: run.series,
    })
}
