//! Group fits, contrast bands, the chi-square scan statistic, pooled
//! variance, and AIC/BIC model selection.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::BasisSpec;
use crate::design::DesignInfo;
use crate::error::{Error, Result};

/// Observations of one group: per-point means with replication count and
/// optional standard errors (the reduced form of raw replicates).
#[derive(Debug, Clone)]
pub struct GroupSample {
    pub group_id: String,
    pub replications: u32,
    pub means: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
}

impl GroupSample {
    pub fn new(group_id: impl Into<String>, replications: u32, means: Vec<f64>) -> Self {
        GroupSample {
            group_id: group_id.into(),
            replications,
            means,
            std_errors: None,
        }
    }

    pub fn with_std_errors(mut self, std_errors: Vec<f64>) -> Self {
        self.std_errors = Some(std_errors);
        self
    }
}

/// Per-group coefficient estimates with the shared covariance.
#[derive(Debug, Clone)]
pub struct GroupFit {
    spec: BasisSpec,
    info: DesignInfo,
    group_ids: Vec<String>,
    coefficients: Vec<DVector<f64>>,
    replications: Vec<f64>,
    residual_l: Vec<f64>,
}

impl GroupFit {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn info(&self) -> &DesignInfo {
        &self.info
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.coefficients
    }

    pub fn replications(&self) -> &[f64] {
        &self.replications
    }

    /// Weighted residual sums `r_i sum_j (y_ij - yhat_ij)^2 / sigma(x_j)^2`.
    pub fn residual_l(&self) -> &[f64] {
        &self.residual_l
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    /// Fitted value of group `i` at `x`.
    pub fn fitted(&self, i: usize, x: f64) -> Result<f64> {
        let f = DVector::from(self.spec.eval(x)?);
        Ok(self.coefficients[i].dot(&f))
    }
}

/// Weighted least squares for one group: `beta = Sigma ( sum_j f(x_j)
/// y_j / sigma(x_j)^2 )`.
pub fn fit_group(spec: &BasisSpec, info: &DesignInfo, sample: &GroupSample) -> Result<DVector<f64>> {
    let points = info.points();
    if sample.means.len() != points.len() {
        return Err(Error::Contract(format!(
            "group {} has {} observations for {} design points",
            sample.group_id,
            sample.means.len(),
            points.len()
        )));
    }
    let p = spec.dim();
    let mut rhs = DVector::zeros(p);
    for ((&x, &v), &y) in points.iter().zip(info.variance()).zip(&sample.means) {
        let f = DVector::from(spec.eval(x)?);
        rhs += f * (y / v);
    }
    Ok(info.sigma() * rhs)
}

/// Fit every group against the common design.
pub fn fit_groups(
    spec: &BasisSpec,
    info: &DesignInfo,
    samples: &[GroupSample],
) -> Result<GroupFit> {
    if samples.is_empty() {
        return Err(Error::Contract("no groups to fit".into()));
    }
    let mut coefficients = Vec::with_capacity(samples.len());
    let mut residual_l = Vec::with_capacity(samples.len());
    for sample in samples {
        if sample.replications == 0 {
            return Err(Error::Contract(format!(
                "group {} has zero replications",
                sample.group_id
            )));
        }
        let beta = fit_group(spec, info, sample)?;
        let mut rss = 0.0;
        for ((&x, &v), &y) in info
            .points()
            .iter()
            .zip(info.variance())
            .zip(&sample.means)
        {
            let f = DVector::from(spec.eval(x)?);
            let resid = y - beta.dot(&f);
            rss += resid * resid / v;
        }
        residual_l.push(sample.replications as f64 * rss);
        coefficients.push(beta);
    }
    Ok(GroupFit {
        spec: spec.clone(),
        info: info.clone(),
        group_ids: samples.iter().map(|s| s.group_id.clone()).collect(),
        coefficients,
        replications: samples.iter().map(|s| s.replications as f64).collect(),
        residual_l,
    })
}

/// Pooled variance estimate
/// `sigma(x_j)^2 = sum_i r_i^2 se(y_ij)^2 / sum_i (r_i - 1)`.
pub fn pooled_variance(samples: &[GroupSample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Contract("no groups supplied".into()));
    }
    let denom: f64 = samples.iter().map(|s| s.replications as f64 - 1.0).sum();
    if denom <= 0.0 {
        return Err(Error::Domain(
            "pooled variance undefined: every group has a single replication".into(),
        ));
    }
    let n = samples[0].means.len();
    let mut out = vec![0.0; n];
    for sample in samples {
        let se = sample.std_errors.as_ref().ok_or_else(|| {
            Error::Contract(format!(
                "group {} carries no standard errors",
                sample.group_id
            ))
        })?;
        if se.len() != n {
            return Err(Error::Contract(format!(
                "group {} has {} standard errors for {} points",
                sample.group_id,
                se.len(),
                n
            )));
        }
        let r = sample.replications as f64;
        for (slot, &s) in out.iter_mut().zip(se) {
            *slot += r * r * s * s;
        }
    }
    for slot in &mut out {
        *slot /= denom;
    }
    Ok(out)
}

/// One candidate of the model search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelectionEntry {
    pub degree: usize,
    pub m: usize,
    pub l: f64,
    pub aic: f64,
    pub bic: f64,
}

/// AIC and BIC rankings over a candidate family.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSelection {
    pub entries: Vec<SelectionEntry>,
}

impl ModelSelection {
    pub fn by_aic(&self) -> Vec<SelectionEntry> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| a.aic.partial_cmp(&b.aic).unwrap());
        v
    }

    pub fn by_bic(&self) -> Vec<SelectionEntry> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| a.bic.partial_cmp(&b.bic).unwrap());
        v
    }

    pub fn best_aic(&self) -> SelectionEntry {
        self.by_aic()[0]
    }

    pub fn best_bic(&self) -> SelectionEntry {
        self.by_bic()[0]
    }
}

/// Fit every `(degree, m)` B-spline candidate on the domain spanned by the
/// design points and score it:
/// `L = sum_i r_i sum_j (y_ij - yhat_ij)^2 / sigma(x_j)^2`,
/// `AIC = L + 2km`, `BIC = L + (sum_i ln(r_i n)) m`.
pub fn model_selection(
    candidates: &[(usize, usize)],
    points: &[f64],
    samples: &[GroupSample],
    variance: &[f64],
) -> Result<ModelSelection> {
    if points.len() < 2 {
        return Err(Error::Contract("model selection needs at least 2 points".into()));
    }
    let n = points.len();
    let k = samples.len();
    let (a, b) = (points[0], points[n - 1]);
    let mut entries = Vec::with_capacity(candidates.len());
    for &(degree, m) in candidates {
        if m > n {
            return Err(Error::Contract(format!(
                "candidate (d = {degree}, m = {m}) exceeds the number of design points {n}"
            )));
        }
        let spec = BasisSpec::bspline(degree, m, a, b)?;
        let info = DesignInfo::new(&spec, points, variance)?;
        let fit = fit_groups(&spec, &info, samples)?;
        let l: f64 = fit.residual_l().iter().sum();
        let aic = l + (2 * k * m) as f64;
        let ln_sum: f64 = samples
            .iter()
            .map(|s| (s.replications as f64 * n as f64).ln())
            .sum();
        let bic = l + ln_sum * m as f64;
        entries.push(SelectionEntry {
            degree,
            m,
            l,
            aic,
            bic,
        });
    }
    Ok(ModelSelection { entries })
}

/// The explicit `k x (k-1)` matrix `H` with `rho^T H = 0`, `H^T H = I`, and
/// `H H^T = I - rho rho^T / (rho^T rho)`, where `rho = (sqrt(r_1), …,
/// sqrt(r_k))` and `R_i = r_1 + … + r_i`.
pub fn h_matrix(r: &[f64]) -> Result<DMatrix<f64>> {
    let k = r.len();
    if k < 2 {
        return Err(Error::Contract(format!("need k >= 2 groups, got {k}")));
    }
    if let Some(bad) = r.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "replication weights must be positive, got {bad}"
        )));
    }
    let mut cum = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &v in r {
        acc += v;
        cum.push(acc);
    }
    let mut h = DMatrix::zeros(k, k - 1);
    for col in 0..(k - 1) {
        let scale = 1.0 / (cum[col] * cum[col + 1]).sqrt();
        for row in 0..=col {
            h[(row, col)] = (r[row] * r[col + 1]).sqrt() * scale;
        }
        h[(col + 1, col)] = -cum[col] * scale;
    }
    Ok(h)
}

/// A simultaneous band for one contrast, evaluated on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ContrastBand {
    pub contrast: Vec<f64>,
    pub xs: Vec<f64>,
    pub center: Vec<f64>,
    pub halfwidth: Vec<f64>,
}

impl ContrastBand {
    pub fn lower(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.halfwidth)
            .map(|(c, h)| c - h)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.halfwidth)
            .map(|(c, h)| c + h)
            .collect()
    }
}

/// Band for the contrast `c`:
/// center `sum_i c_i beta_i^T f(x)` and halfwidth
/// `b sqrt((sum_i c_i^2 / r_i) f(x)^T Sigma f(x))`.
pub fn contrast_band(
    fit: &GroupFit,
    contrast: &[f64],
    b: f64,
    grid: &[f64],
) -> Result<ContrastBand> {
    let k = fit.k();
    if contrast.len() != k {
        return Err(Error::Contract(format!(
            "contrast has {} entries for {k} groups",
            contrast.len()
        )));
    }
    let sum: f64 = contrast.iter().sum();
    if sum.abs() > 1e-10 {
        return Err(Error::Contract(format!(
            "contrast entries must sum to zero (got {sum:.3e})"
        )));
    }
    if contrast.iter().all(|c| *c == 0.0) {
        return Err(Error::Contract("contrast must be nonzero".into()));
    }
    if b < 0.0 {
        return Err(Error::Contract(format!("critical value must be >= 0, got {b}")));
    }
    let weight: f64 = contrast
        .iter()
        .zip(fit.replications())
        .map(|(c, r)| c * c / r)
        .sum();
    let mut center = Vec::with_capacity(grid.len());
    let mut halfwidth = Vec::with_capacity(grid.len());
    for &x in grid {
        let f = DVector::from(fit.spec().eval(x)?);
        let c: f64 = contrast
            .iter()
            .zip(fit.coefficients())
            .map(|(ci, beta)| ci * beta.dot(&f))
            .sum();
        let quad = (fit.info().sigma() * &f).dot(&f);
        center.push(c);
        halfwidth.push(b * (weight * quad).sqrt());
    }
    Ok(ContrastBand {
        contrast: contrast.to_vec(),
        xs: grid.to_vec(),
        center,
        halfwidth,
    })
}

/// The scan statistic
/// `chi2(x) = sum_i r_i (beta_i^T f(x) - wbar(x))^2 / (f(x)^T Sigma f(x))`
/// with `wbar` the replication-weighted mean of the fitted values.
pub fn chi2_scan(fit: &GroupFit, grid: &[f64]) -> Result<Vec<f64>> {
    if fit.k() < 2 {
        return Err(Error::Contract("scan needs at least 2 groups".into()));
    }
    let r_total: f64 = fit.replications().iter().sum();
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        let f = DVector::from(fit.spec().eval(x)?);
        let fitted: Vec<f64> = fit.coefficients().iter().map(|b| b.dot(&f)).collect();
        let mean: f64 = fitted
            .iter()
            .zip(fit.replications())
            .map(|(v, r)| v * r)
            .sum::<f64>()
            / r_total;
        let num: f64 = fitted
            .iter()
            .zip(fit.replications())
            .map(|(v, r)| r * (v - mean) * (v - mean))
            .sum();
        let quad = (fit.info().sigma() * &f).dot(&f);
        out.push(num / quad);
    }
    Ok(out)
}
