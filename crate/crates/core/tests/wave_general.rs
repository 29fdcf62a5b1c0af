use std::f64::consts::PI;

use escapekit::metric::MetricField;
use escapekit::wave_general::*;
use escapekit::wave_radial::{run_radial, RadialConfig};
use proptest::prelude::*;

/// Max difference on `[r0, R0 + T]` between a θ-independent polar run and the
/// radial solver with `m = r Δ_g r` on the same radial nodes.
fn radial_mismatch(metric: &MetricField, m: f64, n_r: usize) -> f64 {
    let cfg = WaveConfig {
        angular_amplitude: 0.0,
        ..WaveConfig::new(1.0, 3.0, 4.0, 4.0, n_r, 8)
    };
    let polar = run_wave(metric, &cfg).unwrap();
    let radial = run_radial(&RadialConfig {
        m,
        r0: 1.0,
        a: 4.0,
        r0_support: 3.0,
        t_final: 4.0,
        n: n_r,
        bump: None,
        bump_power: 3,
        record_every: 10,
    })
    .unwrap();
    assert_eq!(radial.grid.r_max, polar.grid.r_max);
    let g = &polar.grid;
    let mut worst: f64 = 0.0;
    for i in 0..=g.n_r {
        for j in 0..g.n_theta {
            worst = worst.max((polar.field.u[g.idx(i, j)] - radial.state.u[i]).abs());
        }
    }
    worst
}

#[test]
fn radial_data_matches_radial_solver() {
    let e = MetricField::euclidean(2).unwrap();
    let p = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    for (metric, m) in [(&e, 1.0), (&p, 2.0)] {
        let (c, f) = (radial_mismatch(metric, m, 256), radial_mismatch(metric, m, 512));
        assert!(c < 2e-2 && c / f > 3.0, "m = {m}: {c:e} -> {f:e}");
    }
}

/// Each identity term for θ-independent data from the `θ = 0` row, with the
/// geometry in closed form: `√γ = r^q`, `Δ_g r = m2 / r`, `H = r ∂r`.
fn oracle_terms(u: &[f64], ut: &[f64], r0: f64, dr: f64, i_a: usize, q: f64, m2: f64) -> [f64; 7] {
    let r = |i: usize| r0 + i as f64 * dr;
    let ur = |i: usize| {
        if i == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dr)
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * dr)
        }
    };
    let line = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..=i_a)
            .map(|i| if i == 0 || i == i_a { 0.5 * f(i) } else { f(i) })
            .sum::<f64>()
            * dr
    };
    let w = |i: usize| r(i).powf(q);
    let lag = |i: usize| 0.5 * (ut[i] * ut[i] - ur(i) * ur(i));
    let ring = 2.0 * PI;
    [
        -ring * w(0) * r(0) * ur(0) * ur(0),
        ring * w(i_a) * r(i_a) * ur(i_a) * ur(i_a),
        -ring * w(0) * r(0) * lag(0),
        ring * w(i_a) * r(i_a) * lag(i_a),
        ring * line(&|i| ut[i] * r(i) * ur(i) * w(i)),
        ring * line(&|i| ur(i) * ur(i) * w(i)),
        ring * line(&|i| lag(i) * (1.0 + m2) * w(i)),
    ]
}

#[test]
fn morawetz_terms_match_one_dimensional_oracle() {
    let e = MetricField::euclidean(2).unwrap();
    let p = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    for (metric, q, m2) in [(&e, 1.0, 1.0), (&p, 2.0, 2.0)] {
        let cfg = WaveConfig {
            angular_amplitude: 0.0,
            ..WaveConfig::new(1.0, 3.0, 4.0, 3.0, 256, 16)
        };
        let mut checked = 0;
        let mut k = 0;
        run_wave_with(metric, &cfg, |f, g, _| {
            k += 1;
            if k % 97 != 1 {
                return;
            }
            let terms = morawetz_integrands(metric, f, g, cfg.a, &Multiplier::R).unwrap();
            let row = |v: &[f64]| (0..=g.n_r).map(|i| v[g.idx(i, 0)]).collect::<Vec<_>>();
            let i_a = ((cfg.a - g.r0) / g.dr).round() as usize;
            let want = oracle_terms(&row(&f.u), &row(&f.u_t), g.r0, g.dr, i_a, q, m2);
            let got = [
                terms.flux_obstacle,
                terms.flux_outer,
                terms.energy_obstacle,
                terms.energy_outer,
                terms.time_boundary,
                terms.deformation,
                terms.divergence,
            ];
            let scale = want.iter().map(|v| v.abs()).fold(1e-12, f64::max);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-6 * scale, "t = {}: {got:?} vs {want:?}", f.t);
            }
            checked += 1;
        })
        .unwrap();
        assert!(checked >= 3);
    }
}

#[test]
fn morawetz_residual_converges_with_weight_profile() {
    // h = r / (1 + r): bounded multiplier of the kind used for the weighted
    // estimate.
    let h = Multiplier::Profile(std::sync::Arc::new(|r: f64| (r / (1.0 + r), 1.0 / ((1.0 + r) * (1.0 + r)))));
    let e = MetricField::euclidean(2).unwrap();
    let res = |n: usize| {
        let cfg = WaveConfig {
            bump_power: 8,
            ..WaveConfig::new(1.0, 3.0, 4.0, 3.0, n, n / 4)
        };
        morawetz_residual(&e, &cfg, &h, 10).unwrap().residual.abs()
    };
    let (c, f) = (res(256), res(512));
    assert!(c / f >= 1.8, "{c:e} -> {f:e}");
}

#[test]
fn energy_series_and_accumulator() {
    let b = MetricField::radial_exp(2, 2.0, 3.0, 2.0, 1.0, 1.0).unwrap();
    let run = run_wave(&b, &WaveConfig::new(1.0, 3.0, 4.0, 8.0, 256, 32)).unwrap();
    assert_eq!(run.s1, 2.0);
    let s = &run.series;
    assert!(s.s_weighted.windows(2).all(|w| w[1] >= w[0]));
    assert!(s.e_local.iter().zip(&s.e_total).all(|(l, t)| *l <= *t * (1.0 + 1e-12)));
    assert!(s.max_relative_drift() < 5e-2);
    let csv = s.to_csv();
    assert_eq!(csv.lines().count(), s.t.len() + 1);
}

fn random_field(len: usize, seed: u64) -> Vec<f64> {
    let mut x = seed | 1;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_self_adjoint(m1 in 0.6f64..3.0, seed in any::<u64>(), n_r in 8usize..40, n_t in 4usize..24) {
        let m = MetricField::radial_power(2, m1, None, 1.0, true).unwrap();
        let g = PolarGrid::new(&m, 1.0, 4.0, n_r, n_t).unwrap();
        let mut u = random_field(g.len(), seed);
        let mut v = random_field(g.len(), seed.wrapping_add(7));
        for j in 0..n_t {
            for f in [&mut u, &mut v] {
                f[g.idx(0, j)] = 0.0;
                f[g.idx(n_r, j)] = 0.0;
            }
        }
        let (mut lu, mut lv) = (vec![0.0; g.len()], vec![0.0; g.len()]);
        g.apply(&u, &mut lu);
        g.apply(&v, &mut lv);
        let (x, y) = (g.inner(&lu, &v), g.inner(&u, &lv));
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));
    }

    #[test]
    fn rotation_commutes_with_evolution(k in 0usize..16, amp in 0.0f64..0.9) {
        let m = MetricField::radial_power(2, 1.5, None, 1.0, true).unwrap();
        let cfg = WaveConfig { angular_amplitude: amp, ..WaveConfig::new(1.0, 3.0, 4.0, 1.0, 32, 16) };
        let grid = PolarGrid::new(&m, cfg.r0, cfg.r_max(), cfg.n_r, cfg.n_theta).unwrap();
        let base = initial_field(&grid, &cfg);
        let a = run_field(grid.clone(), base.clone(), &cfg, 0.0, &mut |_, _, _| {}).unwrap();
        let b = run_field(grid.clone(), base.rotated(&grid, k), &cfg, 0.0, &mut |_, _, _| {}).unwrap();
        let rot = a.field.rotated(&grid, k);
        let diff = rot.u.iter().zip(&b.field.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10);
    }

    #[test]
    fn weighted_accumulator_nondecreasing(s1 in 0.0f64..3.0, amp in 0.0f64..0.9) {
        let e = MetricField::euclidean(2).unwrap();
        let cfg = WaveConfig { s1: Some(s1), angular_amplitude: amp, record_every: 3, ..WaveConfig::new(1.0, 3.0, 4.0, 2.0, 48, 12) };
        let run = run_wave(&e, &cfg).unwrap();
        prop_assert!(run.series.s_weighted.windows(2).all(|w| w[1] >= w[0]));
    }
}
