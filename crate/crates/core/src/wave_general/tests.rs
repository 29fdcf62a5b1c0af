use super::*;
use crate::metric::MetricField;

fn grid(metric: &MetricField, n_r: usize, n_t: usize) -> PolarGrid {
    PolarGrid::new(metric, 1.0, 5.0, n_r, n_t).unwrap()
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed;
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

#[test]
fn constant_and_zero_fields() {
    let e = MetricField::euclidean(2).unwrap();
    let g = grid(&e, 32, 16);
    let mut out = vec![1.0; g.len()];
    g.apply(&vec![0.0; g.len()], &mut out);
    assert!(out.iter().all(|v| *v == 0.0));
    g.apply(&vec![3.0; g.len()], &mut out);
    assert!(out.iter().all(|v| v.abs() < 1e-9));

    let mut f = WaveField::zeros(&g);
    let e0 = energies(&f, &g, 3.0, 2.0);
    assert_eq!((e0.total, e0.local, e0.weighted_density), (0.0, 0.0, 0.0));
    for _ in 0..10 {
        step_wave(&mut f, &g, g.max_stable_dt()).unwrap();
    }
    assert!(f.u.iter().all(|v| *v == 0.0));
}

#[test]
fn operator_is_self_adjoint() {
    for m in [MetricField::euclidean(2).unwrap(), MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap()] {
        let g = grid(&m, 40, 24);
        let mut u = pseudo_random(g.len(), 1);
        let mut v = pseudo_random(g.len(), 2);
        for j in 0..g.n_theta {
            for f in [&mut u, &mut v] {
                f[g.idx(0, j)] = 0.0;
                f[g.idx(g.n_r, j)] = 0.0;
            }
        }
        let (mut lu, mut lv) = (vec![0.0; g.len()], vec![0.0; g.len()]);
        g.apply(&u, &mut lu);
        g.apply(&v, &mut lv);
        let (x, y) = (g.inner(&lu, &v), g.inner(&u, &lv));
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} {y}");
    }
}

/// Max error of the discrete operator against `exact` on interior rows.
fn operator_error(metric: &MetricField, n: usize, u: impl Fn(f64, f64) -> f64, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = PolarGrid::new(metric, 1.0, 3.0, n, 2 * n).unwrap();
    let mut f = vec![0.0; g.len()];
    for i in 0..=g.n_r {
        for j in 0..g.n_theta {
            f[g.idx(i, j)] = u(g.r(i), g.theta(j));
        }
    }
    let mut out = vec![0.0; g.len()];
    g.apply(&f, &mut out);
    let mut err: f64 = 0.0;
    for i in 1..g.n_r {
        for j in 0..g.n_theta {
            err = err.max((out[g.idx(i, j)] - exact(g.r(i), g.theta(j))).abs());
        }
    }
    err
}

#[test]
fn euclidean_laplacian_is_second_order() {
    let e = MetricField::euclidean(2).unwrap();
    // u = (r² − 1) r cos θ: Δu = u_rr + u_r/r + u_θθ/r² = 8 r cos θ.
    let u = |r: f64, t: f64| (r * r - 1.0) * r * t.cos();
    let lap = |r: f64, t: f64| 8.0 * r * t.cos();
    let e1 = operator_error(&e, 32, u, lap);
    let e2 = operator_error(&e, 64, u, lap);
    assert!(e1 < 0.05 && (e1 / e2) > 3.5, "{e1} {e2}");
    // radial: u = r² − 1 has Δu = 4.
    assert!(operator_error(&e, 64, |r, _| r * r - 1.0, |_, _| 4.0) < 1e-10);
}

#[test]
fn radial_power_matches_laplacian_r() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    // Δ_g r from the metric module; u(r) = sin(r) gives u_rr + Δ_g r u_r.
    let lap_r = |r: f64| m.laplacian_r(&[r, 0.0]).unwrap().closed_form;
    let exact = |r: f64, _: f64| -r.sin() + lap_r(r) * r.cos();
    let e1 = operator_error(&m, 32, |r, _| r.sin(), exact);
    let e2 = operator_error(&m, 64, |r, _| r.sin(), exact);
    assert!(e1 < 1e-2 && e1 / e2 > 3.5, "{e1} {e2}");
}

#[test]
fn cfl_violation_reported() {
    let e = MetricField::euclidean(2).unwrap();
    let g = grid(&e, 32, 16);
    let mut f = WaveField::zeros(&g);
    assert!(matches!(step_wave(&mut f, &g, 2.0 * g.max_stable_dt()), Err(Error::CflViolation { .. })));
}

#[test]
fn rejects_non_planar_and_interior_grids() {
    assert!(PolarGrid::new(&MetricField::euclidean(3).unwrap(), 1.0, 2.0, 8, 8).is_err());
    let ext = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    assert!(PolarGrid::new(&ext, 0.5, 2.0, 8, 8).is_err());
}

#[test]
fn rotation_equivariance() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let cfg = WaveConfig {
        angular_amplitude: 0.8,
        ..WaveConfig::new(1.0, 3.0, 4.0, 2.0, 64, 32)
    };
    let grid = PolarGrid::new(&m, cfg.r0, cfg.r_max(), cfg.n_r, cfg.n_theta).unwrap();
    let base = initial_field(&grid, &cfg);
    let k = 5;
    let a = run_field(grid.clone(), base.clone(), &cfg, 0.0, &mut |_, _, _| {}).unwrap();
    let b = run_field(grid.clone(), base.rotated(&grid, k), &cfg, 0.0, &mut |_, _, _| {}).unwrap();
    let rot = a.field.rotated(&grid, k);
    let diff = rot.u.iter().zip(&b.field.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-10, "{diff}");
}

#[test]
fn lemma_uu_r_on_power_metric() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let m2 = m.param("m2").unwrap();
    let err = |n: usize| {
        let g = PolarGrid::new(&m, 1.0, 4.0, n, 16).unwrap();
        let f = WaveField::from_data(&g, |r, t| crate::wave_radial::bump(r, 1.5, 3.0) * (1.0 + 0.3 * t.sin()), |_, _| 0.0);
        let (l, r) = lemma_uu_r(&f.u, &g, m2);
        (l - r).abs() / r.abs()
    };
    let (e1, e2) = (err(128), err(256));
    assert!(e1 < 5e-3 && e1 / e2 > 3.5, "{e1} {e2}");
}

#[test]
fn hypothesis_gates() {
    let low = MetricField::radial_power(2, 0.4, None, 1.0, true).unwrap();
    assert!(matches!(assumption_a(&low), Err(Error::HypothesisViolation(_))));
    assert_eq!(assumption_a(&MetricField::euclidean(2).unwrap()).unwrap(), (1.0, 1.0));

    let b = MetricField::radial_exp(2, 2.0, 3.0, 2.0, 1.0, 1.0).unwrap();
    assert!(check_assumption_b(&b, 1.0).iter().all(|h| h.holds));
    let bad = MetricField::radial_exp(2, 1.0, 1.5, 2.0, 1.0, 1.0).unwrap();
    let checks = check_assumption_b(&bad, 1.0);
    assert!(!checks[2].holds && checks[0].holds);
    let cfg = WaveConfig::new(1.0, 3.0, 4.0, 1.0, 16, 8);
    assert!(matches!(spacetime_bound_experiment(&bad, &cfg), Err(Error::HypothesisViolation(_))));
}

#[test]
fn accumulator_is_monotone_and_csv_header() {
    let e = MetricField::euclidean(2).unwrap();
    let cfg = WaveConfig { s1: Some(2.0), ..WaveConfig::new(1.0, 3.0, 4.0, 3.0, 64, 16) };
    let run = run_wave(&e, &cfg).unwrap();
    assert!(run.series.s_weighted.windows(2).all(|w| w[1] >= w[0]));
    assert!(run.series.to_csv().starts_with("t,E_total,E_local_a,S_weighted,t_times_Elocal_over_E0\n"));
    let snap = snapshot_csv(&run.field, &run.grid);
    assert!(snap.starts_with("# N_r=64 N_theta=16 r0=1 R_max="));
}

#[test]
fn zero_field_morawetz_terms_vanish() {
    let e = MetricField::euclidean(2).unwrap();
    let g = PolarGrid::new(&e, 1.0, 9.0, 64, 16).unwrap();
    let t = morawetz_integrands(&e, &WaveField::zeros(&g), &g, 4.0, &Multiplier::R).unwrap();
    assert_eq!(t, MorawetzTerms::default());
    assert!(morawetz_integrands(&e, &WaveField::zeros(&g), &g, 4.01, &Multiplier::R).is_err());
}
