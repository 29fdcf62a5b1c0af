use super::*;
use crate::metric::MetricField;

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

#[test]
fn euclidean_straight_line() {
    let m = MetricField::euclidean(2).unwrap();
    let tr = integrate_geodesic(&m, &[1.0, 0.0], &[0.0, 1.0], 5.0, &opts()).unwrap();
    for i in (0..tr.len()).step_by(97) {
        let t = tr.t[i];
        assert!((tr.r[i] - (1.0 + t * t).sqrt()).abs() < 1e-12);
        assert!((tr.h[i] - t / (1.0 + t * t).sqrt()).abs() < 1e-12);
    }
    assert_eq!(tr.len(), 5001);
}

#[test]
fn rhs_examples() {
    let e = MetricField::euclidean(3).unwrap();
    let s = GeodesicState { t: 0.0, x: vec![1.0, 2.0, 3.0], v: vec![0.3, 0.1, -0.2] };
    assert!(geodesic_rhs(&e, &s).unwrap().1.iter().all(|a| *a == 0.0));

    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let s = GeodesicState { t: 0.0, x: vec![2.0, 0.0], v: vec![0.0, 1.0] };
    let (_, a) = geodesic_rhs(&c, &s).unwrap();
    // Tangential motion on the sphere r = R0: the acceleration is the pure
    // centripetal term of a circle, so r'' = a·ω + |v_tan|²/r = 0.
    assert!((a[0] + 0.5).abs() < 1e-14 && a[1].abs() < 1e-14);

    let p = MetricField::radial_power(2, 2.0, None, 1.0, false).unwrap();
    let s = GeodesicState { t: 0.0, x: vec![1.2, 1.6], v: vec![0.6, 0.8] };
    assert!(geodesic_rhs(&p, &s).unwrap().1.iter().all(|a| a.abs() < 1e-14));
}

#[test]
fn cylinder_traps_tangential_geodesic() {
    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let tr = integrate_geodesic(&c, &[2.0, 0.0], &[0.0, 1.0], 100.0, &opts()).unwrap();
    let dev = tr.r.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-4, "{dev}");
}

#[test]
fn radial_power_asymptotic_speed() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, false).unwrap();
    let o = IntegratorOptions { record_every: 50, ..opts() };
    let tr = integrate_geodesic(&m, &[2.0, 0.0], &[0.0, 1.0], 200.0, &o).unwrap();
    // |γ(T)| ≤ |x0| + T, so the ratio may exceed 1 by at most |x0|/T.
    let s = asymptotic_speed(&tr);
    assert!((0.9..=1.0 + 2.0 / 200.0).contains(&s), "{s}");
    assert!(tr.max_speed_drift() < 1e-6);
}

#[test]
fn reflection_flips_h_and_preserves_speed() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let x = vec![1.0, 0.0];
    // h = −0.6 and tangential g-component 0.8 (|e_y|_g = 1 at r = 1).
    let st = GeodesicState { t: 0.0, x: x.clone(), v: vec![-0.6, 0.8] };
    let out = reflect_at_inner_boundary(&m, &st).unwrap();
    assert!((m.radial_component(&x, &out.v) - 0.6).abs() < 1e-15);
    assert_eq!(out.v[1], 0.8);
    assert!((m.speed_sq(&x, &out.v) - m.speed_sq(&x, &st.v)).abs() < 1e-15);

    let st = GeodesicState { t: 0.0, x: x.clone(), v: vec![-1.0, 0.0] };
    let out = reflect_at_inner_boundary(&m, &st).unwrap();
    assert_eq!(out.v, vec![1.0, 0.0]);

    let off = GeodesicState { t: 0.0, x: vec![1.5, 0.0], v: vec![-1.0, 0.0] };
    assert!(reflect_at_inner_boundary(&m, &off).is_err());
}

#[test]
fn exterior_radial_inward_hits_boundary_at_r_c() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let tr = integrate_geodesic(&m, &[2.0, 0.0], &[-1.0, 0.0], 5.0, &opts()).unwrap();
    assert_eq!(tr.termination, Termination::HitInnerBoundary);
    let t0 = tr.boundary_time.unwrap();
    assert!((t0 - 1.0).abs() < 1e-8, "{t0}");
    assert!(matches!(exterior_dichotomy(&tr, &m, 20.0).unwrap(), Dichotomy::HitsBoundary { .. }));
}

#[test]
fn exterior_tangential_start_at_r_c_escapes() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let tr = integrate_geodesic(&m, &[1.0, 0.0], &[0.0, 1.0], 50.0, &IntegratorOptions { record_every: 10, ..opts() }).unwrap();
    assert_eq!(tr.termination, Termination::Completed);
    assert!(matches!(exterior_dichotomy(&tr, &m, 10.0).unwrap(), Dichotomy::Escapes { .. }));
}

#[test]
fn reflected_trace_escapes() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, true).unwrap();
    let o = IntegratorOptions { reflect: true, record_every: 10, ..opts() };
    let tr = integrate_geodesic(&m, &[2.0, 0.0], &[-1.0, 0.01], 60.0, &o).unwrap();
    assert_eq!(tr.termination, Termination::Completed);
    assert_eq!(tr.reflection_times.len(), 1);
    assert!(*tr.r.last().unwrap() > 20.0);
    assert!(tr.max_speed_drift() < 1e-6);
}

#[test]
fn cylinder_tangential_is_undecided() {
    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let tr = integrate_geodesic(&c, &[2.0, 0.0], &[0.0, 1.0], 20.0, &IntegratorOptions { record_every: 10, ..opts() }).unwrap();
    assert_eq!(exterior_dichotomy(&tr, &c, 20.0).unwrap(), Dichotomy::Undecided);
}

#[test]
fn time_reversal() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, false).unwrap();
    let x0 = [0.4, 1.9];
    let fwd = integrate_geodesic(&m, &x0, &[0.6, -0.8], 10.0, &opts()).unwrap();
    let end = fwd.final_state();
    let back_dir: Vec<f64> = end.v.iter().map(|c| -c).collect();
    let back = integrate_geodesic(&m, &end.x, &back_dir, 10.0, &opts()).unwrap();
    let fin = back.final_state();
    for (a, b) in fin.x.iter().zip(&x0) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn velocity_bound_examples() {
    let e = MetricField::euclidean(2).unwrap();
    let tr = integrate_geodesic(&e, &[3.0, 0.0], &[-1.0, 0.1], 40.0, &opts()).unwrap();
    let vb = check_theorem_velocity_bound(&tr, &e, 1.0).unwrap();
    assert_eq!(vb.c0, 1.0);
    assert!(vb.samples_checked > 0 && vb.margin >= 0.0);

    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let tr = integrate_geodesic(&c, &[2.0, 0.0], &[0.0, 1.0], 1.0, &opts()).unwrap();
    assert!(matches!(check_theorem_velocity_bound(&tr, &c, 0.5), Err(crate::Error::InapplicableTheorem(_))));
}

#[test]
fn integral_bound_on_straight_lines() {
    let e = MetricField::euclidean(2).unwrap();
    let tr = integrate_geodesic(&e, &[2.0, 0.0], &[-0.8, 0.6], 30.0, &opts()).unwrap();
    let ib = check_theorem_integral_bound(&tr, &e).unwrap();
    // h changes sign at the closest approach t = 1.6
    assert!((ib.t0 - 1.6).abs() < 2e-3);
    assert!(ib.margin >= -1e-9, "{}", ib.margin);
    assert!(ib.h_violation <= 1e-12);
    let lt = ib.lemma;
    assert!(lt.t1.unwrap() < lt.t0.unwrap() && lt.t0.unwrap() < lt.t2.unwrap());
}

#[test]
fn integral_bound_degenerates_on_cylinder() {
    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let tr = integrate_geodesic(&c, &[2.0, 0.0], &[0.3, 1.0], 20.0, &opts()).unwrap();
    let ib = check_theorem_integral_bound(&tr, &c).unwrap();
    assert!(!ib.f_positive);
    assert!(ib.margin >= -1e-9);
}

#[test]
fn envelope_is_decreasing() {
    let m = MetricField::radial_power(2, 2.0, None, 1.0, false).unwrap();
    let f = envelope_f(&m, 50.0, 0.01);
    assert_eq!(f.eval(0.5), 2.0);
    assert!((f.eval(4.0) - 0.5).abs() < 1e-12);
    assert!(f.eval(10.0) <= f.eval(9.99));
}

#[test]
fn batch_directions_and_verdicts() {
    let c = MetricField::cylinder(2, 2.0, 1.0).unwrap();
    let o = BatchOptions { t_final: 200.0, ..BatchOptions::default() };
    let rep = batch_shoot(&c, &[vec![2.0, 0.0]], &o).unwrap();
    assert_eq!(rep.reports.len(), 16);
    assert_eq!(rep.n_trapped, 2);
    for r in &rep.reports {
        if r.verdict == Verdict::Trapped {
            assert!(r.direction[0].abs() < 1e-12);
        }
    }
    assert_eq!(shot_directions(3, 5, 9), shot_directions(3, 5, 9));
}
