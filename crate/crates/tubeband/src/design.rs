//! Information matrix, its square-root factor, and the normalized spherical
//! curve `psi(x) = A f(x) / |A f(x)|` traced on the unit sphere.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, DerivOrder};
use crate::error::{Error, Result};

/// Norm threshold below which the curve is considered degenerate.
const DEGENERATE_NORM: f64 = 1e-12;
/// Tolerance of the endpoint-identification check for closed curves.
const CLOSURE_TOL: f64 = 1e-8;
/// Grid size of the numerical injectivity check.
const INJECTIVITY_GRID: usize = 2001;
/// Pair-distance threshold of the injectivity check.
const INJECTIVITY_TOL: f64 = 1e-10;

/// The index domain: a finite union of disjoint closed intervals, with a flag
/// marking whether the curve endpoints are identified (closed curve).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    intervals: Vec<(f64, f64)>,
    closed: bool,
}

impl Domain {
    pub fn new(intervals: Vec<(f64, f64)>, closed: bool) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Contract("domain needs at least one interval".into()));
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::Contract(format!(
                    "invalid domain interval [{a}, {b}]"
                )));
            }
        }
        let mut sorted = intervals.clone();
        sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for w in sorted.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::Contract(format!(
                    "domain intervals overlap: [{}, {}] and [{}, {}]",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if closed && sorted.len() > 1 {
            return Err(Error::Contract(
                "a closed curve must live on a single interval".into(),
            ));
        }
        Ok(Domain {
            intervals: sorted,
            closed,
        })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Domain::new(vec![(a, b)], false)
    }

    pub fn closed_interval(a: f64, b: f64) -> Result<Self> {
        Domain::new(vec![(a, b)], true)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Total length of the domain.
    pub fn span(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Roughly `n` points distributed over the intervals proportionally to
    /// their lengths; every nondegenerate interval keeps both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let span = self.span();
        let mut out = Vec::with_capacity(n + self.intervals.len());
        for &(a, b) in &self.intervals {
            if a == b {
                out.push(a);
                continue;
            }
            let share = if span > 0.0 {
                ((b - a) / span * n as f64).round() as usize
            } else {
                n
            };
            let m = share.max(2);
            for i in 0..m {
                out.push(a + (b - a) * i as f64 / (m - 1) as f64);
            }
        }
        out
    }
}

/// Design-driven quantities: the coefficient covariance `sigma` (the inverse
/// information matrix) and an upper-triangular factor `A` with `A^T A = sigma`.
#[derive(Debug, Clone)]
pub struct DesignInfo {
    points: Vec<f64>,
    variance: Vec<f64>,
    sigma: DMatrix<f64>,
    sigma_sqrt: DMatrix<f64>,
}

impl DesignInfo {
    /// Build from design points and the (known) variance function values.
    pub fn new(spec: &BasisSpec, points: &[f64], variance: &[f64]) -> Result<Self> {
        if points.len() != variance.len() {
            return Err(Error::Contract(format!(
                "{} design points but {} variance values",
                points.len(),
                variance.len()
            )));
        }
        for w in points.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Contract(
                    "design points must be strictly increasing".into(),
                ));
            }
        }
        if let Some(v) = variance.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
            return Err(Error::Contract(format!("variance must be positive, got {v}")));
        }
        let sigma = information_matrix(spec, points, variance)?;
        let sigma_sqrt = sqrt_factor(&sigma)?;
        Ok(DesignInfo {
            points: points.to_vec(),
            variance: variance.to_vec(),
            sigma,
            sigma_sqrt,
        })
    }

    /// Wrap an externally supplied covariance matrix (no design points).
    pub fn from_sigma(sigma: DMatrix<f64>) -> Result<Self> {
        let sigma = symmetrized(&sigma)?;
        let sigma_sqrt = sqrt_factor(&sigma)?;
        Ok(DesignInfo {
            points: Vec::new(),
            variance: Vec::new(),
            sigma,
            sigma_sqrt,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_sqrt
    }

    /// The band-width kernel `f(x)^T sigma f(x)`.
    pub fn quadratic_form(&self, spec: &BasisSpec, x: f64) -> Result<f64> {
        let f = DVector::from(spec.eval(x)?);
        Ok((&self.sigma * &f).dot(&f))
    }

    /// The spherical curve of this design over `domain`.
    pub fn curve(&self, spec: &BasisSpec, domain: Domain) -> Result<SphericalCurve> {
        SphericalCurve::from_factor(spec.clone(), self.sigma_sqrt.clone(), domain)
    }
}

/// `(sum_j f(x_j) f(x_j)^T / sigma(x_j)^2)^{-1}`, the coefficient covariance
/// of a single group with one replication.
pub fn information_matrix(
    spec: &BasisSpec,
    points: &[f64],
    variance: &[f64],
) -> Result<DMatrix<f64>> {
    let p = spec.dim();
    let n = points.len();
    if n != variance.len() {
        return Err(Error::Contract(format!(
            "{n} design points but {} variance values",
            variance.len()
        )));
    }
    // weighted design matrix rows f(x_j)/sigma(x_j)
    let mut rows = Vec::with_capacity(n);
    for (&x, &v) in points.iter().zip(variance) {
        if v <= 0.0 {
            return Err(Error::Contract(format!("variance must be positive, got {v}")));
        }
        let f = spec.eval(x)?;
        let w = 1.0 / v.sqrt();
        rows.push(f.into_iter().map(|c| c * w).collect::<Vec<_>>());
    }
    let x_w = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let info = x_w.transpose() * &x_w;
    match nalgebra::Cholesky::new(info.clone()) {
        Some(chol) => Ok(symmetrized(&chol.inverse())?),
        None => {
            let tol = rank_tolerance(&x_w);
            Err(Error::SingularDesign {
                rank: x_w.rank(tol),
                needed: p,
            })
        }
    }
}

fn rank_tolerance(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    scale * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON
}

fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Contract(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Factorization(format!(
                    "matrix not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(0.5 * (m + m.transpose()))
}

/// Upper-triangular `A` with `A^T A = sigma` (transpose of the Cholesky
/// factor), for symmetric positive-definite `sigma`.
pub fn sqrt_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrized(sigma)?;
    match nalgebra::Cholesky::new(sym) {
        Some(chol) => Ok(chol.l().transpose()),
        None => Err(Error::Factorization(
            "matrix is not positive definite".into(),
        )),
    }
}

/// The normalized curve `psi(x) = A f(x) / |A f(x)|` on the unit sphere,
/// with exact first and second derivatives via the quotient rule.
#[derive(Debug, Clone)]
pub struct SphericalCurve {
    spec: BasisSpec,
    factor: DMatrix<f64>,
    domain: Domain,
    breakpoints: Vec<f64>,
}

impl SphericalCurve {
    /// Checked construction: rejects degenerate curves, inconsistent closure
    /// flags, and (numerically) self-intersecting or antipodal curves.
    pub fn from_factor(spec: BasisSpec, factor: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let curve = Self::from_factor_unchecked(spec, factor, domain)?;
        curve.check_closure()?;
        curve.check_injectivity()?;
        Ok(curve)
    }

    /// Construction without the injectivity/antipodal check. Intended for
    /// curves that are known to satisfy the tube assumptions analytically,
    /// or for oracle computations that tolerate their failure.
    pub fn from_factor_unchecked(
        spec: BasisSpec,
        factor: DMatrix<f64>,
        domain: Domain,
    ) -> Result<Self> {
        if factor.ncols() != spec.dim() {
            return Err(Error::Contract(format!(
                "factor has {} columns, basis dimension is {}",
                factor.ncols(),
                spec.dim()
            )));
        }
        let breakpoints = spec.breakpoints();
        let curve = SphericalCurve {
            spec,
            factor,
            domain,
            breakpoints,
        };
        // degenerate-curve scan
        for x in curve.domain.grid(INJECTIVITY_GRID) {
            let u = curve.unnormalized(x)?;
            if u.norm() < DEGENERATE_NORM {
                return Err(Error::DegenerateCurve { x });
            }
        }
        Ok(curve)
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Points where the curve is only piecewise smooth.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn unnormalized(&self, x: f64) -> Result<DVector<f64>> {
        let f = DVector::from(self.spec.eval(x)?);
        Ok(&self.factor * f)
    }

    /// `psi(x)`, a unit vector.
    pub fn psi(&self, x: f64) -> Result<DVector<f64>> {
        let u = self.unnormalized(x)?;
        let n = u.norm();
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateCurve { x });
        }
        Ok(u / n)
    }

    /// First derivative `psi_x(x)`.
    pub fn psi_x(&self, x: f64) -> Result<DVector<f64>> {
        let u = self.unnormalized(x)?;
        let du = &self.factor * DVector::from(self.spec.eval_deriv(x, DerivOrder::First)?);
        let n = u.norm();
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateCurve { x });
        }
        let nd = u.dot(&du) / n;
        Ok(du / n - &u * (nd / (n * n)))
    }

    /// Second derivative `psi_xx(x)`.
    pub fn psi_xx(&self, x: f64) -> Result<DVector<f64>> {
        let u = self.unnormalized(x)?;
        let du = &self.factor * DVector::from(self.spec.eval_deriv(x, DerivOrder::First)?);
        let ddu = &self.factor * DVector::from(self.spec.eval_deriv(x, DerivOrder::Second)?);
        let n = u.norm();
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateCurve { x });
        }
        let nd = u.dot(&du) / n;
        let ndd = (du.dot(&du) + u.dot(&ddu)) / n - nd * nd / n;
        let n2 = n * n;
        Ok(ddu / n - &du * (2.0 * nd / n2) - &u * (ndd / n2) + &u * (2.0 * nd * nd / (n2 * n)))
    }

    fn check_closure(&self) -> Result<()> {
        if !self.domain.is_closed() {
            return Ok(());
        }
        let &(a, b) = &self.domain.intervals()[0];
        let pa = self.psi(a)?;
        let pb = self.psi(b)?;
        let direct = (&pa - &pb).norm();
        let antipodal = (&pa + &pb).norm();
        if direct.min(antipodal) >= CLOSURE_TOL {
            return Err(Error::Contract(format!(
                "domain flagged closed but psi({a}) and psi({b}) do not meet \
                 (gap {:.3e}, antipodal gap {:.3e})",
                direct, antipodal
            )));
        }
        Ok(())
    }

    /// Numerical check of the one-to-one / no-antipodal-pair assumption the
    /// tube theorems need.
    fn check_injectivity(&self) -> Result<()> {
        let grid = self.domain.grid(INJECTIVITY_GRID);
        let n = grid.len();
        if n < 3 {
            return Ok(());
        }
        let points: Vec<DVector<f64>> = grid
            .iter()
            .map(|&x| self.psi(x))
            .collect::<Result<_>>()?;
        let closed = self.domain.is_closed();
        for i in 0..n {
            for j in (i + 2)..n {
                // wrap-around neighbors of a closed curve are identified
                if closed && (n - 1 - j) + i < 2 {
                    continue;
                }
                let d = (&points[i] - &points[j]).norm();
                let anti = (&points[i] + &points[j]).norm();
                if d.min(anti) < INJECTIVITY_TOL {
                    return Err(Error::Contract(format!(
                        "curve violates the injectivity assumption near x = {} and x = {} \
                         (distance {:.3e}, antipodal distance {:.3e})",
                        grid[i], grid[j], d, anti
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// The worked quadratic example: f(x) = (1, x, x^2) on [-1, 1] with the
    /// covariance whose rows are (1, 0, 2/3), (0, 2/3, 0), (2/3, 0, 1).
    pub(crate) fn quadratic_example() -> SphericalCurve {
        let spec = BasisSpec::polynomial(3).unwrap();
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 1.0],
        );
        let factor = sqrt_factor(&sigma).unwrap();
        SphericalCurve::from_factor(spec, factor, Domain::interval(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn information_matrix_constant_basis() {
        let spec = BasisSpec::polynomial(1).unwrap();
        let m = information_matrix(&spec, &[0.0, 1.0, 2.0, 3.0], &[1.0; 4]).unwrap();
        assert_close(m[(0, 0)], 0.25, 1e-14);
    }

    #[test]
    fn information_matrix_two_point_line() {
        let spec = BasisSpec::polynomial(2).unwrap();
        let m = information_matrix(&spec, &[-1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_close(m[(0, 0)], 0.5, 1e-14);
        assert_close(m[(1, 1)], 0.5, 1e-14);
        assert_close(m[(0, 1)], 0.0, 1e-14);
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let spec = BasisSpec::polynomial(3).unwrap();
        let err = information_matrix(&spec, &[0.0, 1.0], &[1.0, 1.0]).unwrap_err();
        match err {
            Error::SingularDesign { rank, needed } => {
                assert_eq!(rank, 2);
                assert_eq!(needed, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sqrt_factor_identity_and_worked_example() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(sqrt_factor(&eye).unwrap(), eye);

        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 1.0],
        );
        let a = sqrt_factor(&sigma).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0,
                0.0,
                2.0 / 3.0,
                0.0,
                (2.0f64 / 3.0).sqrt(),
                0.0,
                0.0,
                0.0,
                5.0f64.sqrt() / 3.0,
            ],
        );
        assert!((a - expected).amax() < 1e-12);
    }

    #[test]
    fn sqrt_factor_reconstructs_random_spd() {
        // fixed "random" SPD matrix built as B^T B + I
        let b = DMatrix::from_fn(5, 5, |i, j| ((3 * i + 7 * j + 1) as f64 * 0.37).sin());
        let sigma = b.transpose() * &b + DMatrix::identity(5, 5);
        let a = sqrt_factor(&sigma).unwrap();
        // upper triangular
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(a[(i, j)], 0.0);
            }
        }
        assert!((a.transpose() * &a - &sigma).amax() < 1e-10);
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sqrt_factor(&m), Err(Error::Factorization(_))));
    }

    #[test]
    fn quadratic_example_matches_closed_form_psi() {
        let curve = quadratic_example();
        for i in 0..=20 {
            let x = -1.0 + i as f64 / 10.0;
            let got = curve.psi(x).unwrap();
            let scale = 3.0 * (1.0 + x * x);
            let expect = [
                (3.0 + 2.0 * x * x) / scale,
                6.0f64.sqrt() * x / scale,
                5.0f64.sqrt() * x * x / scale,
            ];
            for (g, e) in got.iter().zip(expect) {
                assert_close(*g, e, 1e-14);
            }
        }
        let origin = curve.psi(0.0).unwrap();
        assert_close(origin[0], 1.0, 1e-15);
        assert_close(origin[1], 0.0, 1e-15);
        assert_close(origin[2], 0.0, 1e-15);
    }

    #[test]
    fn psi_is_unit_and_orthogonal_to_velocity() {
        let curve = quadratic_example();
        for i in 0..=100 {
            let x = -1.0 + i as f64 / 50.0;
            let psi = curve.psi(x).unwrap();
            let dpsi = curve.psi_x(x).unwrap();
            assert_close(psi.norm(), 1.0, 1e-12);
            assert_close(psi.dot(&dpsi), 0.0, 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let curve = quadratic_example();
        let h = 1e-6;
        for i in 0..=50 {
            let x = -0.99 + 1.98 * i as f64 / 50.0;
            let d1 = curve.psi_x(x).unwrap();
            let fd1 = (curve.psi(x + h).unwrap() - curve.psi(x - h).unwrap()) / (2.0 * h);
            assert!((d1 - fd1).amax() < 1e-6);
            let d2 = curve.psi_xx(x).unwrap();
            let fd2 = (curve.psi_x(x + h).unwrap() - curve.psi_x(x - h).unwrap()) / (2.0 * h);
            assert!((d2 - fd2).amax() < 1e-6);
        }
    }

    #[test]
    fn scale_of_sigma_cancels_in_psi() {
        let spec = BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap();
        let pts: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let base = DesignInfo::new(&spec, &pts, &[1.0; 11]).unwrap();
        let scaled = DesignInfo::new(&spec, &pts, &[7.3; 11]).unwrap();
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let c1 = base.curve(&spec, dom.clone()).unwrap();
        let c2 = scaled.curve(&spec, dom).unwrap();
        for i in 0..=40 {
            let x = i as f64 / 40.0;
            assert!((c1.psi(x).unwrap() - c2.psi(x).unwrap()).amax() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_refactoring_preserves_inner_products() {
        let curve = quadratic_example();
        // a fixed rotation in the (0,1)-plane and a reflection of axis 2
        let theta: f64 = 0.7;
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[
                theta.cos(),
                -theta.sin(),
                0.0,
                theta.sin(),
                theta.cos(),
                0.0,
                0.0,
                0.0,
                -1.0,
            ],
        );
        let rotated = SphericalCurve::from_factor(
            curve.spec().clone(),
            &q * curve.factor(),
            curve.domain().clone(),
        )
        .unwrap();
        for i in 0..20 {
            let x = -1.0 + 2.0 * i as f64 / 19.0;
            let y = -1.0 + 2.0 * ((i * 7) % 20) as f64 / 19.0;
            let a = curve.psi(x).unwrap().dot(&curve.psi(y).unwrap());
            let b = rotated.psi(x).unwrap().dot(&rotated.psi(y).unwrap());
            assert_close(a, b, 1e-12);
            let va = curve.psi_x(x).unwrap().norm();
            let vb = rotated.psi_x(x).unwrap().norm();
            assert_close(va, vb, 1e-12);
        }
    }

    #[test]
    fn closed_flag_requires_matching_endpoints() {
        let spec = BasisSpec::polynomial(3).unwrap();
        let sigma = DMatrix::<f64>::identity(3, 3);
        let factor = sqrt_factor(&sigma).unwrap();
        let err = SphericalCurve::from_factor(
            spec,
            factor,
            Domain::closed_interval(-1.0, 1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));

        // trigonometric curve on [0, 2*pi] closes up
        let spec = BasisSpec::trigonometric(1).unwrap();
        let factor = DMatrix::<f64>::identity(3, 3);
        let curve = SphericalCurve::from_factor(
            spec,
            factor,
            Domain::closed_interval(0.0, 2.0 * std::f64::consts::PI).unwrap(),
        );
        assert!(curve.is_ok());
    }

    #[test]
    fn degenerate_factor_is_rejected() {
        let spec = BasisSpec::polynomial(2).unwrap();
        let factor = DMatrix::<f64>::zeros(2, 2);
        let err = SphericalCurve::from_factor_unchecked(
            spec,
            factor,
            Domain::interval(0.0, 1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateCurve { .. }));
    }
}
