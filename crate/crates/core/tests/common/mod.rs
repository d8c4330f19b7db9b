//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library.

#![allow(dead_code)]

use std::f64::consts::PI;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Split into unit panels so the adaptive rule never skips the bulk.
    let panels = ((b - a).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            adaptive(f, lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb), tol / panels as f64, 50)
        })
        .sum()
}

/// Root of a monotone function on `[lo, hi]` by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const UPPER: f64 = 40.0;

/// `(P(X > t), E[X | X > t], Var(X | X > t))` of a standard normal by
/// quadrature.
pub fn truncated_moments(t: f64) -> (f64, f64, f64) {
    let lo = t.max(-UPPER);
    let tol = 1e-15;
    let m0 = integrate(&normal_pdf, lo, UPPER, tol);
    let m1 = integrate(&|x| x * normal_pdf(x), lo, UPPER, tol);
    let m2 = integrate(&|x| x * x * normal_pdf(x), lo, UPPER, tol);
    let mean = m1 / m0;
    (m0, mean, m2 / m0 - mean * mean)
}

/// Truncation point with upper tail mass `alpha`, by bisection on the
/// quadrature tail mass.
pub fn threshold(alpha: f64) -> f64 {
    bisect(|t| integrate(&normal_pdf, t, UPPER, 1e-15) - alpha, -12.0, 12.0)
}

/// Mean shift of a standardized `Y` with correlation `rho` to the liability
/// among those above the threshold, in participant SD units.
pub fn mean_shift_oracle(rho: f64, t: f64) -> f64 {
    let (_, mean, var) = truncated_moments(t);
    rho * mean / (1.0 - rho * rho * (1.0 - var)).sqrt()
}

/// Correlation implied by a mean shift, by bisection on the oracle.
pub fn rho_from_delta_oracle(delta: f64, alpha: f64) -> f64 {
    let t = threshold(alpha);
    let (_, mean, var) = truncated_moments(t);
    let f = |r: f64| r * mean / (1.0 - r * r * (1.0 - var)).sqrt() - delta;
    bisect(f, -1.0 + 1e-12, 1.0 - 1e-12)
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
