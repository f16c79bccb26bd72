//! Geometry of the spherical curve: arc length, Euler characteristic,
//! the curvature functional, and the local/global critical radii of the
//! index manifold.

use rayon::prelude::*;
use serde::Serialize;

use crate::design::SphericalCurve;
use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson_split;

/// Squared-speed threshold below which curvature is undefined.
const STATIONARY_G: f64 = 1e-20;
/// Denominators at or below this are treated as +inf contributions and
/// skipped in the critical-radius search.
const DENOM_FLOOR: f64 = 1e-12;

/// Arc length measured two ways. `quadrature` is the primary estimate;
/// `polyline` reproduces the straight-segment sum used for reporting.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArcLength {
    pub quadrature: f64,
    pub polyline: f64,
    pub discrepancy: f64,
    /// Set when the two estimates disagree by more than 1e-3.
    pub warning: bool,
}

/// Grid sizes for [`CurveGeometry::compute`].
#[derive(Debug, Clone, Copy)]
pub struct GeometryGrids {
    pub x_grid: usize,
    pub alpha_grid: usize,
    pub arc_segments: usize,
}

impl Default for GeometryGrids {
    fn default() -> Self {
        GeometryGrids {
            x_grid: 2001,
            alpha_grid: 401,
            arc_segments: 100_000,
        }
    }
}

/// Everything the tube formula needs from a curve, computed in one pass.
#[derive(Debug, Clone, Serialize)]
pub struct CurveGeometry {
    pub arc: ArcLength,
    pub gamma_length: f64,
    pub euler_char: u32,
    pub kappa_max: f64,
    pub theta_loc: f64,
    pub theta_c: f64,
    /// Fraction of (pair, alpha) evaluations skipped for nonpositive
    /// denominators in the global search; above 0.5 the search is suspect.
    pub skipped_fraction: f64,
}

impl CurveGeometry {
    pub fn compute(curve: &SphericalCurve, grids: &GeometryGrids) -> Result<Self> {
        let arc = arc_length(curve, grids.arc_segments)?;
        let euler_char = euler_characteristic(curve);
        let mut kappa_max = f64::NEG_INFINITY;
        for x in curve.domain().grid(grids.x_grid) {
            kappa_max = kappa_max.max(kappa(curve, x)?);
        }
        let theta_loc = local_critical_radius(curve, grids.x_grid)?;
        let global = global_critical_radius_detailed(curve, grids.x_grid, grids.alpha_grid)?;
        Ok(CurveGeometry {
            arc,
            gamma_length: arc.quadrature,
            euler_char,
            kappa_max,
            theta_loc,
            theta_c: global.theta,
            skipped_fraction: global.skipped_fraction,
        })
    }
}

/// Arc length `|Gamma|` of the curve: polyline sum over a uniform grid with
/// `n_segments` segments, and adaptive quadrature of `|psi_x|` split at the
/// basis breakpoints.
pub fn arc_length(curve: &SphericalCurve, n_segments: usize) -> Result<ArcLength> {
    if n_segments < 2 {
        return Err(Error::Contract("arc length needs at least 2 segments".into()));
    }
    let span = curve.domain().span();
    let mut polyline = 0.0;
    for &(a, b) in curve.domain().intervals() {
        if a == b {
            continue;
        }
        let n = if span > 0.0 {
            (((b - a) / span) * n_segments as f64).round().max(1.0) as usize
        } else {
            n_segments
        };
        let mut prev = curve.psi(a)?;
        for t in 1..=n {
            let x = a + (b - a) * t as f64 / n as f64;
            let next = curve.psi(x)?;
            polyline += (&next - &prev).norm();
            prev = next;
        }
    }

    // |psi_x| may fail at stationary points; surface the error through the
    // quadrature by caching it
    let failure = std::sync::Mutex::new(None::<Error>);
    let speed = |x: f64| match curve.psi_x(x) {
        Ok(v) => v.norm(),
        Err(e) => {
            *failure.lock().unwrap() = Some(e);
            0.0
        }
    };
    let quadrature = adaptive_simpson_split(
        &speed,
        curve.domain().intervals(),
        curve.breakpoints(),
        1e-12,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }

    let discrepancy = (quadrature - polyline).abs();
    Ok(ArcLength {
        quadrature,
        polyline,
        discrepancy,
        warning: discrepancy > 1e-3,
    })
}

/// Euler-Poincare characteristic of the curve: 0 for a closed curve, else
/// the number of connected components of the domain.
pub fn euler_characteristic(curve: &SphericalCurve) -> u32 {
    if curve.domain().is_closed() {
        0
    } else {
        curve.domain().intervals().len() as u32
    }
}

/// The curvature functional `kappa(x) = eta/g^2 - gamma^2/g^3 - 1` built from
/// `g = psi_x . psi_x`, `gamma = psi_xx . psi_x`, `eta = psi_xx . psi_xx`.
/// Nonnegative up to rounding; values in `[-1e-9, 0)` are clamped to 0.
pub fn kappa(curve: &SphericalCurve, x: f64) -> Result<f64> {
    let dpsi = curve.psi_x(x)?;
    let g = dpsi.dot(&dpsi);
    if g <= STATIONARY_G {
        return Err(Error::StationaryPoint { x });
    }
    let ddpsi = curve.psi_xx(x)?;
    let gamma = ddpsi.dot(&dpsi);
    let eta = ddpsi.dot(&ddpsi);
    let k = eta / (g * g) - gamma * gamma / (g * g * g) - 1.0;
    if (-1e-9..0.0).contains(&k) {
        Ok(0.0)
    } else {
        Ok(k)
    }
}

/// Local critical radius: `tan^2(theta) = min over x of { 1 - kappa/4 where
/// kappa <= 2 ; 1/kappa where kappa >= 2 }`.
pub fn local_critical_radius(curve: &SphericalCurve, grid_n: usize) -> Result<f64> {
    if grid_n < 2 {
        return Err(Error::Contract("local radius needs grid_n >= 2".into()));
    }
    let mut best = f64::INFINITY;
    for x in curve.domain().grid(grid_n) {
        let k = kappa(curve, x)?;
        if k <= 2.0 {
            best = best.min(1.0 - k / 4.0);
        }
        if k >= 2.0 {
            best = best.min(1.0 / k);
        }
    }
    Ok(best.sqrt().atan())
}

/// Result of the global critical-radius search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GlobalRadius {
    pub theta: f64,
    pub skipped_fraction: f64,
}

/// Global critical radius of the index manifold: the minimum of the discrete
/// interior search, the boundary search, and the local radius.
pub fn global_critical_radius(
    curve: &SphericalCurve,
    grid_n: usize,
    alpha_grid_n: usize,
) -> Result<f64> {
    Ok(global_critical_radius_detailed(curve, grid_n, alpha_grid_n)?.theta)
}

struct RadiusGridPoint {
    x: f64,
    psi: Vec<f64>,
    tangent: Vec<f64>,
    /// +1 at a left endpoint (velocity points inward), -1 at a right one,
    /// 0 in the interior.
    orientation: i8,
}

/// Pair invariants of the critical-radius ratio, computed without
/// cancellation. `1 - s` comes from the squared chord, and the residual of
/// the other point against span{psi, tangent} gives `1 - s^2 - t^2` as a sum
/// of squares; both stay accurate (and orthogonally invariant) even where
/// the direct expressions lose all significant digits near the diagonal.
struct PairKernel {
    one_minus_s: f64,
    t: f64,
    /// squared norm of the component of psi_j outside span{psi_i, tangent_i}
    residual2: f64,
}

impl PairKernel {
    fn new(role: &RadiusGridPoint, other: &RadiusGridPoint) -> Self {
        let mut chord2 = 0.0;
        let mut t = 0.0;
        for ((&a, &b), &tau) in role.psi.iter().zip(&other.psi).zip(&role.tangent) {
            let d = a - b;
            chord2 += d * d;
            t += tau * b;
        }
        let one_minus_s = 0.5 * chord2;
        let s = 1.0 - one_minus_s;
        let mut residual2 = 0.0;
        for ((&a, &b), &tau) in role.psi.iter().zip(&other.psi).zip(&role.tangent) {
            let w = b - s * a - t * tau;
            residual2 += w * w;
        }
        PairKernel {
            one_minus_s,
            t,
            residual2,
        }
    }
}

pub fn global_critical_radius_detailed(
    curve: &SphericalCurve,
    grid_n: usize,
    alpha_grid_n: usize,
) -> Result<GlobalRadius> {
    if grid_n < 2 || alpha_grid_n < 2 {
        return Err(Error::Contract(
            "global radius needs grid_n >= 2 and alpha_grid_n >= 2".into(),
        ));
    }
    let closed = curve.domain().is_closed();
    let span = curve.domain().span();
    let window = 2.0 * span / grid_n as f64;

    let mut points: Vec<RadiusGridPoint> = Vec::new();
    for &(a, b) in curve.domain().intervals() {
        let share = if span > 0.0 {
            (((b - a) / span) * grid_n as f64).round() as usize
        } else {
            grid_n
        };
        let m = share.max(2);
        for i in 0..m {
            let x = if a == b {
                a
            } else {
                a + (b - a) * i as f64 / (m - 1) as f64
            };
            let psi = curve.psi(x)?;
            let v = curve.psi_x(x)?;
            let speed = v.norm();
            if speed * speed <= STATIONARY_G {
                return Err(Error::StationaryPoint { x });
            }
            let orientation = if closed {
                0
            } else if i == 0 {
                1
            } else if i == m - 1 {
                -1
            } else {
                0
            };
            points.push(RadiusGridPoint {
                x,
                psi: psi.iter().copied().collect(),
                tangent: (v / speed).iter().copied().collect(),
                orientation,
            });
            if a == b {
                break;
            }
        }
    }

    // alpha together with exact 1 -/+ alpha, so that products near the
    // endpoints keep full precision
    let denom = (alpha_grid_n - 1) as f64;
    let alphas: Vec<(f64, f64, f64)> = (0..alpha_grid_n)
        .map(|i| {
            let one_plus = 2.0 * i as f64 / denom;
            let one_minus = 2.0 * (alpha_grid_n - 1 - i) as f64 / denom;
            (one_plus - 1.0, one_minus, one_plus)
        })
        .collect();
    let n = points.len();

    // (min tan^2, alpha evaluations, skipped evaluations)
    let (pair_min, evals, skipped) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            let mut evals = 0u64;
            let mut skipped = 0u64;
            let pi = &points[i];
            for (j, pj) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let mut dist = (pi.x - pj.x).abs();
                if closed {
                    dist = dist.min(span - dist);
                }
                if dist <= window {
                    continue;
                }
                let kernel = PairKernel::new(pi, pj);
                let t2 = kernel.t * kernel.t;
                for &(alpha, one_minus_alpha, one_plus_alpha) in &alphas {
                    evals += 1;
                    // 1 - s^2 - (projected alpha t)^2, assembled from
                    // nonnegative pieces
                    let projected = pi.orientation == 0
                        || (pi.orientation as f64) * alpha * kernel.t > 0.0;
                    let den = if projected {
                        kernel.residual2 + t2 * one_minus_alpha * one_plus_alpha
                    } else {
                        kernel.residual2 + t2
                    };
                    if den <= DENOM_FLOOR {
                        skipped += 1;
                        continue;
                    }
                    // 1 - alpha s = (1 - alpha) + alpha (1 - s)
                    let num_root = one_minus_alpha + alpha * kernel.one_minus_s;
                    let ratio = num_root * num_root / den;
                    if ratio < best {
                        best = ratio;
                    }
                }
            }
            (best, evals, skipped)
        })
        .reduce(
            || (f64::INFINITY, 0u64, 0u64),
            |a, b| (a.0.min(b.0), a.1 + b.1, a.2 + b.2),
        );

    let local = local_critical_radius(curve, grid_n)?;
    let local_tan2 = local.tan().powi(2);
    let theta = pair_min.min(local_tan2).sqrt().atan();
    let skipped_fraction = if evals > 0 {
        skipped as f64 / evals as f64
    } else {
        0.0
    };
    Ok(GlobalRadius {
        theta,
        skipped_fraction,
    })
}

/// Maximum of `kappa` over a grid; convenience for reports.
pub fn kappa_sweep(curve: &SphericalCurve, grid_n: usize) -> Result<Vec<(f64, f64)>> {
    curve
        .domain()
        .grid(grid_n)
        .into_iter()
        .map(|x| kappa(curve, x).map(|k| (x, k)))
        .collect()
}
