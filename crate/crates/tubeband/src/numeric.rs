//! Small numerical kernels shared across modules: adaptive Simpson
//! quadrature, bracketed root finding, and Gauss-Legendre nodes.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
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
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Quadrature over a list of disjoint intervals, each split at the supplied
/// breakpoints so the integrand is smooth on every subinterval.
pub(crate) fn adaptive_simpson_split<F: Fn(f64) -> f64>(
    f: &F,
    intervals: &[(f64, f64)],
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut total = 0.0;
    for &(a, b) in intervals {
        let mut cuts: Vec<f64> = vec![a];
        for &k in breakpoints {
            if k > a && k < b {
                cuts.push(k);
            }
        }
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for w in cuts.windows(2) {
            total += adaptive_simpson(f, w[0], w[1], tol);
        }
    }
    total
}

/// Bisection on `[lo, hi]` for a continuous `f` with a sign change, refined
/// until `|f| < f_tol` (and the interval is shrunk to rounding).
pub(crate) fn bisect_root<F: Fn(f64) -> f64>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    f_tol: f64,
) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver(format!(
            "no sign change in bracket [{lo}, {hi}]: f = ({flo:.3e}, {fhi:.3e})"
        )));
    }
    let mut best = lo;
    let mut best_val = flo.abs();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < best_val {
            best = mid;
            best_val = fm.abs();
        }
        if fm == 0.0 || best_val < f_tol {
            return Ok(best);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
    }
    if best_val < f_tol {
        Ok(best)
    } else {
        Err(Error::Solver(format!(
            "bisection stalled: best residual {best_val:.3e} > tolerance {f_tol:.3e}"
        )))
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| 1.0 / (1.0 + x * x), -1.0, 1.0, 1e-12);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn split_quadrature_handles_kinks() {
        // |x| on [-1, 1] with a breakpoint at the kink
        let v = adaptive_simpson_split(&|x: f64| x.abs(), &[(-1.0, 1.0)], &[0.0], 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bisection_finds_root_and_reports_missing_bracket() {
        let r = bisect_root(&|x: f64| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!(bisect_root(&|x: f64| x * x + 1.0, 0.0, 2.0, 1e-12).is_err());
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = gauss_legendre(8);
        // degree 15 polynomial x^14 integrates exactly
        let num: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((num - 2.0 / 15.0).abs() < 1e-13);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
