//! Regression basis families and their exact derivatives.
//!
//! Three families are supported: monomials `(1, x, …, x^{p-1})`, the
//! trigonometric system `(1, √2 cos x, √2 sin x, …, √2 cos mx, √2 sin mx)`,
//! and uniform B-splines built from the truncated-power form
//!
//! ```text
//! B_d(x) = Σ_{r=0}^{d+1} (-1)^{d+1-r} C(d+1, r) (r - x)_+^d / d!
//! ```
//!
//! scaled and shifted so that component `i` of the size-`m`, degree-`d`
//! family on `[a, b]` is `B_d((x-a)/(b-a)·(m-d) - (i-d-1))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported B-spline degree; binomial coefficients stay exact in
/// integer arithmetic up to here.
pub const MAX_BSPLINE_DEGREE: usize = 20;

/// Derivative order accepted by [`BasisSpec::eval_deriv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

/// A regression basis family of dimension `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisSpec {
    /// `(1, x, …, x^{p-1})`.
    Polynomial { p: usize },
    /// `(1, √2 cos x, √2 sin x, …, √2 cos mx, √2 sin mx)`; `p = 2m + 1`.
    Trigonometric { harmonics: usize },
    /// `m` uniform B-splines of degree `degree` with equally spaced knots
    /// on `[a, b]`; `p = m`.
    Bspline { degree: usize, m: usize, a: f64, b: f64 },
}

impl BasisSpec {
    pub fn polynomial(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Contract("polynomial basis needs p >= 1".into()));
        }
        Ok(BasisSpec::Polynomial { p })
    }

    pub fn trigonometric(harmonics: usize) -> Result<Self> {
        if harmonics == 0 {
            return Err(Error::Contract(
                "trigonometric basis needs at least one harmonic".into(),
            ));
        }
        Ok(BasisSpec::Trigonometric { harmonics })
    }

    pub fn bspline(degree: usize, m: usize, a: f64, b: f64) -> Result<Self> {
        if degree > MAX_BSPLINE_DEGREE {
            return Err(Error::Contract(format!(
                "B-spline degree {degree} exceeds the exact-arithmetic limit {MAX_BSPLINE_DEGREE}"
            )));
        }
        if m < degree + 1 {
            return Err(Error::Contract(format!(
                "B-spline basis needs m >= degree + 1 (got m = {m}, degree = {degree})"
            )));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Contract(format!(
                "B-spline domain must satisfy a < b (got [{a}, {b}])"
            )));
        }
        Ok(BasisSpec::Bspline { degree, m, a, b })
    }

    /// Basis dimension `p`.
    pub fn dim(&self) -> usize {
        match *self {
            BasisSpec::Polynomial { p } => p,
            BasisSpec::Trigonometric { harmonics } => 2 * harmonics + 1,
            BasisSpec::Bspline { m, .. } => m,
        }
    }

    /// Points where the basis is only piecewise smooth (interior knots).
    /// Quadrature over the curve is split at these.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            BasisSpec::Bspline { degree, m, a, b } => {
                let segments = m - degree;
                (1..segments)
                    .map(|i| a + (b - a) * i as f64 / segments as f64)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Evaluate `f(x)`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("basis evaluated at non-finite x = {x}")));
        }
        match *self {
            BasisSpec::Polynomial { p } => {
                let mut out = Vec::with_capacity(p);
                let mut pow = 1.0;
                for _ in 0..p {
                    out.push(pow);
                    pow *= x;
                }
                Ok(out)
            }
            BasisSpec::Trigonometric { harmonics } => {
                let mut out = Vec::with_capacity(2 * harmonics + 1);
                out.push(1.0);
                for j in 1..=harmonics {
                    let jx = j as f64 * x;
                    out.push(std::f64::consts::SQRT_2 * jx.cos());
                    out.push(std::f64::consts::SQRT_2 * jx.sin());
                }
                Ok(out)
            }
            BasisSpec::Bspline { degree, m, a, b } => {
                self.check_bspline_domain(x, a, b)?;
                let t = (x - a) / (b - a) * (m - degree) as f64;
                Ok((1..=m)
                    .map(|i| bspline_scalar(degree, t - (i as f64 - degree as f64 - 1.0)))
                    .collect())
            }
        }
    }

    /// Evaluate the exact first or second derivative of every component.
    ///
    /// B-spline derivatives at knot points are right-continuous.
    pub fn eval_deriv(&self, x: f64, order: DerivOrder) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("basis evaluated at non-finite x = {x}")));
        }
        match *self {
            BasisSpec::Polynomial { p } => {
                let mut out = vec![0.0; p];
                match order {
                    DerivOrder::First => {
                        for (j, slot) in out.iter_mut().enumerate().skip(1) {
                            *slot = j as f64 * x.powi(j as i32 - 1);
                        }
                    }
                    DerivOrder::Second => {
                        for (j, slot) in out.iter_mut().enumerate().skip(2) {
                            *slot = (j * (j - 1)) as f64 * x.powi(j as i32 - 2);
                        }
                    }
                }
                Ok(out)
            }
            BasisSpec::Trigonometric { harmonics } => {
                let mut out = Vec::with_capacity(2 * harmonics + 1);
                out.push(0.0);
                for j in 1..=harmonics {
                    let jf = j as f64;
                    let jx = jf * x;
                    let (c, s) = (jx.cos(), jx.sin());
                    match order {
                        DerivOrder::First => {
                            out.push(-std::f64::consts::SQRT_2 * jf * s);
                            out.push(std::f64::consts::SQRT_2 * jf * c);
                        }
                        DerivOrder::Second => {
                            out.push(-std::f64::consts::SQRT_2 * jf * jf * c);
                            out.push(-std::f64::consts::SQRT_2 * jf * jf * s);
                        }
                    }
                }
                Ok(out)
            }
            BasisSpec::Bspline { degree, m, a, b } => {
                if order == DerivOrder::Second && degree < 2 {
                    return Err(Error::Unsupported(format!(
                        "second derivative of a degree-{degree} B-spline basis"
                    )));
                }
                self.check_bspline_domain(x, a, b)?;
                let scale = (m - degree) as f64 / (b - a);
                let t = (x - a) * scale;
                let chain = match order {
                    DerivOrder::First => scale,
                    DerivOrder::Second => scale * scale,
                };
                Ok((1..=m)
                    .map(|i| {
                        let u = t - (i as f64 - degree as f64 - 1.0);
                        chain * bspline_scalar_deriv(degree, u, order)
                    })
                    .collect())
            }
        }
    }

    fn check_bspline_domain(&self, x: f64, a: f64, b: f64) -> Result<()> {
        if x < a || x > b {
            Err(Error::Domain(format!(
                "x = {x} outside B-spline domain [{a}, {b}]"
            )))
        } else {
            Ok(())
        }
    }
}

/// The scalar uniform B-spline `B_d` of the truncated-power form, supported
/// on `(0, d+1)`. Total function of `x`.
pub fn bspline_scalar(d: usize, x: f64) -> f64 {
    assert!(d <= MAX_BSPLINE_DEGREE, "degree {d} exceeds exact-arithmetic limit");
    // outside the support the alternating sum cancels only up to rounding,
    // so return the exact zero directly (for d = 0 the step convention below
    // settles the boundary points)
    if d >= 1 && (x <= 0.0 || x >= (d + 1) as f64) {
        return 0.0;
    }
    let mut sum = 0.0;
    for r in 0..=(d + 1) {
        let u = r as f64 - x;
        let tp = if d == 0 {
            // step convention: (r - x)_+^0 = 1 when r - x >= 0
            if u >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else if u > 0.0 {
            u.powi(d as i32)
        } else {
            0.0
        };
        sum += sign(d + 1 - r) * binomial(d + 1, r) as f64 * tp;
    }
    // the sum is provably nonnegative; near the support edges cancellation
    // can leave values a few ulp below zero
    (sum / factorial(d) as f64).max(0.0)
}

/// Derivative of [`bspline_scalar`] in the scaled variable, right-continuous
/// at knots. Requires `d >= 1` for the first and `d >= 2` for the second
/// derivative (checked by the caller).
fn bspline_scalar_deriv(d: usize, x: f64, order: DerivOrder) -> f64 {
    if x < 0.0 || x >= (d + 1) as f64 {
        return 0.0;
    }
    let (e, denom, flip) = match order {
        DerivOrder::First => (d - 1, factorial(d - 1) as f64, -1.0),
        DerivOrder::Second => (d - 2, factorial(d - 2) as f64, 1.0),
    };
    let mut sum = 0.0;
    for r in 0..=(d + 1) {
        let u = r as f64 - x;
        // strict step at exponent 0 keeps the derivative right-continuous in x
        let tp = if e == 0 {
            if u > 0.0 {
                1.0
            } else {
                0.0
            }
        } else if u > 0.0 {
            u.powi(e as i32)
        } else {
            0.0
        };
        sum += sign(d + 1 - r) * binomial(d + 1, r) as f64 * tp;
    }
    flip * sum / denom
}

fn sign(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

fn factorial(n: usize) -> u64 {
    (2..=n as u64).product::<u64>().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn bspline_scalar_hand_values() {
        assert_close(bspline_scalar(1, 1.0), 1.0, 1e-15);
        assert_close(bspline_scalar(2, 1.5), 0.75, 1e-15);
        assert_close(bspline_scalar(3, -0.5), 0.0, 0.0);
        assert_close(bspline_scalar(3, 4.5), 0.0, 0.0);
    }

    #[test]
    fn bspline_scalar_nonnegative_and_unit_mass() {
        // composite midpoint per knot interval; endpoint conventions never
        // enter and the error is O(h^2) per polynomial piece
        for d in 0..=4usize {
            let mut integral = 0.0;
            for piece in 0..=d {
                let lo = piece as f64;
                let n = 20_000usize;
                let h = 1.0 / n as f64;
                for i in 0..n {
                    let x = lo + (i as f64 + 0.5) * h;
                    let v = bspline_scalar(d, x);
                    assert!(v >= 0.0, "B_{d}({x}) = {v} < 0");
                    integral += v * h;
                }
            }
            assert_close(integral, 1.0, 1e-9);
        }
        // exact zero outside the support
        for d in 1..=4usize {
            assert_eq!(bspline_scalar(d, -0.7), 0.0);
            assert_eq!(bspline_scalar(d, -1e-3), 0.0);
            assert_eq!(bspline_scalar(d, d as f64 + 1.0 + 0.7), 0.0);
        }
    }

    #[test]
    fn eval_polynomial_and_trigonometric() {
        let poly = BasisSpec::polynomial(3).unwrap();
        assert_eq!(poly.eval(2.0).unwrap(), vec![1.0, 2.0, 4.0]);

        let trig = BasisSpec::trigonometric(1).unwrap();
        let f = trig.eval(0.0).unwrap();
        assert_close(f[0], 1.0, 0.0);
        assert_close(f[1], std::f64::consts::SQRT_2, 1e-15);
        assert_close(f[2], 0.0, 0.0);
    }

    #[test]
    fn bspline_local_support() {
        let spec = BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let nonzero = spec.eval(x).unwrap().iter().filter(|v| **v != 0.0).count();
            assert!(nonzero <= 3, "{nonzero} nonzero entries at x = {x}");
        }
    }

    #[test]
    fn bspline_out_of_domain_is_error() {
        let spec = BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap();
        assert!(matches!(spec.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(
            spec.eval_deriv(-0.1, DerivOrder::First),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deriv_hand_values() {
        let poly = BasisSpec::polynomial(3).unwrap();
        assert_eq!(
            poly.eval_deriv(2.0, DerivOrder::First).unwrap(),
            vec![0.0, 1.0, 4.0]
        );

        let trig = BasisSpec::trigonometric(1).unwrap();
        let d2 = trig.eval_deriv(0.0, DerivOrder::Second).unwrap();
        assert_close(d2[0], 0.0, 0.0);
        assert_close(d2[1], -std::f64::consts::SQRT_2, 1e-15);
        assert_close(d2[2], 0.0, 1e-15);
    }

    #[test]
    fn second_deriv_of_linear_bspline_unsupported() {
        let spec = BasisSpec::bspline(1, 4, 0.0, 1.0).unwrap();
        assert!(matches!(
            spec.eval_deriv(0.5, DerivOrder::Second),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn degree_limit_rejected() {
        assert!(BasisSpec::bspline(21, 30, 0.0, 1.0).is_err());
        assert!(BasisSpec::bspline(2, 2, 0.0, 1.0).is_err());
    }

    fn central_diff(spec: &BasisSpec, x: f64, h: f64) -> Vec<f64> {
        let up = spec.eval(x + h).unwrap();
        let dn = spec.eval(x - h).unwrap();
        up.iter().zip(&dn).map(|(u, d)| (u - d) / (2.0 * h)).collect()
    }

    #[test]
    fn first_derivative_matches_finite_difference_on_grid() {
        let specs = [
            BasisSpec::polynomial(4).unwrap(),
            BasisSpec::trigonometric(2).unwrap(),
            BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap(),
            BasisSpec::bspline(3, 7, -1.0, 2.0).unwrap(),
        ];
        let h = 1e-6;
        for spec in &specs {
            let (a, b) = match *spec {
                BasisSpec::Bspline { a, b, .. } => (a + 2.0 * h, b - 2.0 * h),
                _ => (-1.0, 1.0),
            };
            for i in 0..=100 {
                let x = a + (b - a) * i as f64 / 100.0;
                let exact = spec.eval_deriv(x, DerivOrder::First).unwrap();
                let fd = central_diff(spec, x, h);
                for (e, f) in exact.iter().zip(&fd) {
                    assert_close(*e, *f, 1e-6);
                }
            }
        }
    }

    #[test]
    fn bspline_first_derivative_example_point() {
        let spec = BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap();
        let exact = spec.eval_deriv(0.3, DerivOrder::First).unwrap();
        let fd = central_diff(&spec, 0.3, 1e-6);
        for (e, f) in exact.iter().zip(&fd) {
            assert_close(*e, *f, 1e-6);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(d in 2usize..=4, extra in 1usize..=6, frac in 0.0f64..=1.0) {
            let m = d + extra;
            let spec = BasisSpec::bspline(d, m, 0.0, 1.0).unwrap();
            let x = frac;
            let sum: f64 = spec.eval(x).unwrap().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "sum = {sum} at x = {x}");
        }

        #[test]
        fn second_derivative_matches_fd_of_first(d in 2usize..=4, extra in 1usize..=4, frac in 0.05f64..=0.95) {
            let m = d + extra;
            let spec = BasisSpec::bspline(d, m, 0.0, 1.0).unwrap();
            let h = 1e-6;
            let x = frac.clamp(2.0 * h, 1.0 - 2.0 * h);
            // the stencil must not straddle a knot, where the second
            // derivative of a d=2 spline jumps
            let clear = spec
                .breakpoints()
                .iter()
                .all(|k| (x - k).abs() > 10.0 * h);
            prop_assume!(clear);
            let exact = spec.eval_deriv(x, DerivOrder::Second).unwrap();
            let up = spec.eval_deriv(x + h, DerivOrder::First).unwrap();
            let dn = spec.eval_deriv(x - h, DerivOrder::First).unwrap();
            for (e, (u, l)) in exact.iter().zip(up.iter().zip(&dn)) {
                let fd = (u - l) / (2.0 * h);
                prop_assert!((e - fd).abs() < 1e-3, "{e} vs {fd} at x = {x}");
            }
        }
    }
}
