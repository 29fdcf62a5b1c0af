//! Adaptive Simpson quadrature on intervals.

const MAX_DEPTH: u32 = 48;

/// `∫_a^b f` to relative tolerance `rel_tol` (with a tiny absolute floor).
///
/// Works for `b < a` as well (the result changes sign).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    // A coarse pass fixes the absolute scale of the target accuracy.
    let scale = coarse_scale(&f, a, b).max(whole.abs());
    let tol = (rel_tol * scale).max(1e-300);
    recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn coarse_scale<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let n = 16;
    let h = (b - a) / n as f64;
    let mean = (0..=n).map(|k| f(a + k as f64 * h).abs()).sum::<f64>() / (n + 1) as f64;
    mean * (b - a).abs()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Vector-valued variant; the error test uses the max norm over components.
pub fn adaptive_simpson_vec<F: Fn(f64) -> Vec<f64>>(f: F, a: f64, b: f64, rel_tol: f64) -> Vec<f64> {
    let fa = f(a);
    if a == b {
        return vec![0.0; fa.len()];
    }
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson_vec(a, b, &fa, &fm, &fb);
    let scale = fa
        .iter()
        .chain(&fm)
        .chain(&fb)
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        * (b - a).abs();
    let tol = (rel_tol * scale.max(max_abs(&whole))).max(1e-300);
    recurse_vec(&f, a, b, &fa, &fm, &fb, whole, tol, MAX_DEPTH)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn simpson_vec(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| w * (x + 4.0 * y + z))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse_vec<F: Fn(f64) -> Vec<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
) -> Vec<f64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson_vec(a, m, fa, &flm, fm);
    let right = simpson_vec(m, b, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(&whole)
        .fold(0.0f64, |acc, ((l, r), w)| acc.max((l + r - w).abs()));
    if depth == 0 || err <= 15.0 * tol {
        return left
            .iter()
            .zip(&right)
            .zip(&whole)
            .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
            .collect();
    }
    let mut out = recurse_vec(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1);
    let rest = recurse_vec(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1);
    out.iter_mut().zip(rest).for_each(|(o, r)| *o += r);
    out
}

/// Trapezoid rule on an arbitrary (sorted) grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Running trapezoid integral, same length as the input with a leading zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    if !t.is_empty() {
        out.push(0.0);
    }
    for (tw, yw) in t.windows(2).zip(y.windows(2)) {
        acc += 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_integral() {
        let v = adaptive_simpson(|y| 1.0 / y, 1.0, 7.5, 1e-12);
        assert!((v - 7.5f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let fwd = adaptive_simpson(f64::exp, 0.0, 2.0, 1e-10);
        let back = adaptive_simpson(f64::exp, 2.0, 0.0, 1e-10);
        assert!((fwd + back).abs() < 1e-12);
        assert!((fwd - (2.0f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn vector_components_independent() {
        let v = adaptive_simpson_vec(|y| vec![y * y, y.sin()], 0.0, 3.0, 1e-11);
        assert!((v[0] - 9.0).abs() < 1e-9);
        assert!((v[1] - (1.0 - 3.0f64.cos())).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_exact_on_lines() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        let total = trapezoid(&t, &y);
        assert!((total - (9.0 + 3.0)).abs() < 1e-12);
        assert_eq!(cumulative_trapezoid(&t, &y).last().copied().unwrap(), total);
    }
}
