//! Tail probabilities of the maximum of the chi-square process via the tube
//! formula, the studentized variant, the critical-value solver, and the
//! spherical tube-volume identity.
//!
//! For `k` groups and a curve of length `|Gamma|` with Euler characteristic
//! `chi`, the tail approximation at level `b` is
//!
//! ```text
//! lead * |Gamma| * { G_k(b^2) - G_{k-2}(b^2) } + chi * G_{k-1}(b^2)
//! ```
//!
//! with `G_m` the upper chi-square tail and
//! `lead = Gamma(k/2) / (sqrt(pi) Gamma((k-1)/2))`.

use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::CurveGeometry;
use crate::numeric::{bisect_root, gauss_legendre};

/// Residual tolerance of the critical-value solver.
const SOLVER_TOL: f64 = 1e-12;
/// Search bracket of the critical-value solver.
const SOLVER_BRACKET: (f64, f64) = (1.0, 50.0);

/// Inputs of the tube tail formula.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TubeFormulaParams {
    k: usize,
    gamma_length: f64,
    euler_char: u32,
    nu: Option<u64>,
    lead_coeff: f64,
}

impl TubeFormulaParams {
    pub fn new(k: usize, gamma_length: f64, euler_char: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Contract(format!("need k >= 2 groups, got {k}")));
        }
        if !(gamma_length > 0.0 && gamma_length.is_finite()) {
            return Err(Error::Contract(format!(
                "curve length must be positive, got {gamma_length}"
            )));
        }
        Ok(TubeFormulaParams {
            k,
            gamma_length,
            euler_char,
            nu: None,
            lead_coeff: lead_coeff(k),
        })
    }

    /// Parameters of the studentized formula with `nu` degrees of freedom
    /// for the variance estimator.
    pub fn with_nu(mut self, nu: u64) -> Result<Self> {
        if nu == 0 {
            return Err(Error::Contract("nu must be positive".into()));
        }
        self.nu = Some(nu);
        Ok(self)
    }

    /// Convenience constructor from a computed curve geometry.
    pub fn from_geometry(k: usize, geometry: &CurveGeometry) -> Result<Self> {
        TubeFormulaParams::new(k, geometry.gamma_length, geometry.euler_char)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma_length(&self) -> f64 {
        self.gamma_length
    }

    pub fn euler_char(&self) -> u32 {
        self.euler_char
    }

    pub fn nu(&self) -> Option<u64> {
        self.nu
    }

    /// `Gamma(k/2) / (sqrt(pi) Gamma((k-1)/2))`.
    pub fn lead_coeff(&self) -> f64 {
        self.lead_coeff
    }
}

/// The leading coefficient from the half-integer gamma closed forms. For odd
/// `k` it is the exact rational `(k-2)!! / (2^{(k-1)/2} ((k-3)/2)!)` (1/2 at
/// `k = 3`), for even `k` a rational multiple of `1/pi` (`1/pi` at `k = 2`).
fn lead_coeff(k: usize) -> f64 {
    if k % 2 == 1 {
        let mut num = 1.0;
        let mut j = k as i64 - 2;
        while j >= 2 {
            num *= j as f64;
            j -= 2;
        }
        let mut den = 1.0;
        for _ in 0..(k - 1) / 2 {
            den *= 2.0;
        }
        for i in 2..=(k - 3) / 2 {
            den *= i as f64;
        }
        num / den
    } else {
        let mut num = 1.0;
        for i in 2..k / 2 {
            num *= i as f64;
        }
        for _ in 0..(k - 2) / 2 {
            num *= 2.0;
        }
        let mut den = 1.0;
        let mut j = k as i64 - 3;
        while j >= 2 {
            den *= j as f64;
            j -= 2;
        }
        num / (den * std::f64::consts::PI)
    }
}

/// Upper tail of the chi-square distribution with `m` degrees of freedom.
/// `m = 0` is the point mass at zero: 0 for `t > 0`, 1 at `t = 0`.
///
/// Integer degrees of freedom admit the stable upward recurrence
/// `G_{j+2}(t) = G_j(t) + (t/2)^{j/2} e^{-t/2} / Gamma(j/2 + 1)` seeded with
/// `G_1 = erfc(sqrt(t/2))` and `G_2 = e^{-t/2}`; every summand is positive.
pub fn chi2_upper_tail(m: usize, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("chi-square tail at negative t = {t}")));
    }
    if m == 0 {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let half = 0.5 * t;
    let decay = (-half).exp();
    let (mut tail, mut term, mut j) = if m.is_multiple_of(2) {
        (decay, half * decay, 2usize)
    } else {
        (
            erfc(half.sqrt()),
            (2.0 * t / std::f64::consts::PI).sqrt() * decay,
            1usize,
        )
    };
    while j < m {
        tail += term;
        term *= t / (j + 2) as f64;
        j += 2;
    }
    Ok(tail)
}

/// Tube tail approximation for known variance. May exceed 1 for small `b`;
/// the raw value is returned.
pub fn tube_tail_probability(params: &TubeFormulaParams, b: f64) -> Result<f64> {
    if params.nu.is_some() {
        return Err(Error::Contract(
            "parameters carry nu; use studentized_tube_tail".into(),
        ));
    }
    tail_known_variance(params, b)
}

fn tail_known_variance(params: &TubeFormulaParams, b: f64) -> Result<f64> {
    if b < 0.0 || b.is_nan() {
        return Err(Error::Domain(format!("tail evaluated at negative b = {b}")));
    }
    tail_at_squared_level(params, b * b)
}

/// The tail formula as a function of the squared level `t = b^2`. The bias
/// bound evaluates it at `(b - delta)^2`, which stays valid when
/// `delta > b` because the formula depends on `b` only through `b^2`.
pub(crate) fn tail_at_squared_level(params: &TubeFormulaParams, t: f64) -> Result<f64> {
    let k = params.k;
    Ok(params.lead_coeff
        * params.gamma_length
        * (chi2_upper_tail(k, t)? - chi2_upper_tail(k - 2, t)?)
        + params.euler_char as f64 * chi2_upper_tail(k - 1, t)?)
}

/// Studentized tube tail: the expectation of the known-variance tail at
/// `b * tau` over `tau^2 ~ chi^2_nu / nu`, in closed form. Each chi-square
/// tail term becomes the upper tail of an F distribution, which reduces to a
/// regularized beta tail at `nu / (nu + b^2)`.
pub fn studentized_tube_tail(params: &TubeFormulaParams, b: f64) -> Result<f64> {
    let nu = params
        .nu
        .ok_or_else(|| Error::Contract("studentized tail needs nu".into()))? as f64;
    if b < 0.0 || b.is_nan() {
        return Err(Error::Domain(format!("tail evaluated at negative b = {b}")));
    }
    let x = nu / (nu + b * b);
    let term = |m: usize| -> f64 {
        if m == 0 {
            if b > 0.0 {
                0.0
            } else {
                1.0
            }
        } else if b == 0.0 {
            1.0
        } else {
            beta_reg(nu / 2.0, m as f64 / 2.0, x)
        }
    };
    let k = params.k;
    Ok(params.lead_coeff * params.gamma_length * (term(k) - term(k - 2))
        + params.euler_char as f64 * term(k - 1))
}

/// Numerical-quadrature evaluation of the studentized tail over the density
/// of `tau^2`; cross-check mode for [`studentized_tube_tail`].
pub fn studentized_tube_tail_quadrature(
    params: &TubeFormulaParams,
    b: f64,
    nodes: usize,
) -> Result<f64> {
    let nu = params
        .nu
        .ok_or_else(|| Error::Contract("studentized tail needs nu".into()))? as f64;
    if b < 0.0 || b.is_nan() {
        return Err(Error::Domain(format!("tail evaluated at negative b = {b}")));
    }
    let plain = TubeFormulaParams {
        nu: None,
        ..*params
    };
    let chi = ChiSquared::new(nu).map_err(|e| Error::Domain(e.to_string()))?;
    // tau^2 has mean 1 and standard deviation sqrt(2/nu); 16 sigma covers the
    // mass far beyond the 1e-8 comparison tolerance. Integrating in tau
    // rather than tau^2 keeps the integrand analytic at the left endpoint.
    let sd = (2.0 / nu).sqrt();
    let lo = (1.0 - 16.0 * sd).max(0.0).sqrt();
    let hi = (1.0 + 16.0 * sd).sqrt();
    let mut total = 0.0;
    for (node, weight) in gauss_legendre(nodes) {
        let tau = 0.5 * (hi - lo) * node + 0.5 * (hi + lo);
        let density = 2.0 * tau * nu * chi.pdf(nu * tau * tau);
        total += weight * tail_known_variance(&plain, b * tau)? * density;
    }
    Ok(0.5 * (hi - lo) * total)
}

/// Solve `tail(b) = alpha` for `b` in the decreasing tail regime,
/// `alpha` in (0, 0.5]. Dispatches on the presence of `nu`.
pub fn critical_value(params: &TubeFormulaParams, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 0.5], got {alpha}"
        )));
    }
    let tail = |b: f64| -> f64 {
        let v = if params.nu.is_some() {
            studentized_tube_tail(params, b)
        } else {
            tail_known_variance(params, b)
        };
        v.expect("tail is total for b >= 0") - alpha
    };
    bisect_root(&tail, SOLVER_BRACKET.0, SOLVER_BRACKET.1, SOLVER_TOL)
}

/// Spherical volume fraction `Vol(M_theta) / Omega_n` of the tube of radius
/// `theta` around the index manifold, with ambient dimension `n = p(k-1)`.
/// Exact for `theta` up to the critical radius.
pub fn tube_volume_fraction(params: &TubeFormulaParams, p: usize, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "tube radius must lie in (0, pi/2], got {theta}"
        )));
    }
    let k = params.k;
    let n = p * (k - 1);
    if n <= k {
        return Err(Error::Domain(format!(
            "ambient dimension p(k-1) = {n} must exceed k = {k}"
        )));
    }
    let sin2 = theta.sin().powi(2);
    // upper beta tail at cos^2(theta) evaluated via the mirrored lower tail
    let upper = |a: f64, bb: f64| beta_reg(bb, a, sin2);
    let kf = k as f64;
    let nf = n as f64;
    let mut vol = params.lead_coeff
        * params.gamma_length
        * upper(kf / 2.0, (nf - kf) / 2.0);
    if k > 2 {
        vol -= params.lead_coeff
            * params.gamma_length
            * upper((kf - 2.0) / 2.0, (nf - kf + 2.0) / 2.0);
    }
    vol += params.euler_char as f64 * upper((kf - 1.0) / 2.0, (nf - kf + 1.0) / 2.0);
    Ok(vol)
}
