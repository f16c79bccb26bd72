//! Seeded Monte Carlo oracles: maxima of the chi-square process, coverage
//! under misspecification, the deterministic bias functional, its coverage
//! bound, and the average band width.
//!
//! Reproducibility contract: every stochastic routine draws from ChaCha8
//! streams keyed by a 64-bit seed, one stream per fixed-size replication
//! chunk. Results are bit-identical for a given (seed, replication count)
//! no matter how many worker threads execute the chunks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisSpec;
use crate::design::{DesignInfo, Domain, SphericalCurve};
use crate::error::{Error, Result};
use crate::geometry::arc_length;
use crate::numeric::adaptive_simpson_split;
use crate::tube::{critical_value, tail_at_squared_level, TubeFormulaParams};

/// Replications per RNG stream; part of the determinism contract.
const CHUNK: usize = 1024;
/// Segments of the arc-length rule backing the critical-value geometry.
const ARC_SEGMENTS: usize = 100_000;

/// The three-group true regression curves of the misspecification study.
/// Group 0 is always the zero curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TrueModel {
    /// Quadratic-spline curves: group 1 follows K(0,0,1/2,1,1), group 2
    /// follows K(0,0,4/3,0,0) in the size-5 quadratic spline basis on [0,1].
    Model1 { amplitude: f64 },
    /// Sinusoids K sin(pi x / 2) and K sin(pi x).
    Model2 { amplitude: f64 },
    /// Exponential-bump and cosh-growth curves scaled to range [0, K].
    Model3 { amplitude: f64 },
    /// All groups at zero: the assumed model holds exactly.
    InBasis,
}

impl TrueModel {
    /// Number of groups (the study design is three curves).
    pub fn k(&self) -> usize {
        3
    }

    /// True curve of `group` (0-based) at `x` in [0, 1].
    pub fn value(&self, group: usize, x: f64) -> Result<f64> {
        if group >= self.k() {
            return Err(Error::Contract(format!("group {group} out of range")));
        }
        Ok(match *self {
            TrueModel::InBasis => 0.0,
            TrueModel::Model1 { amplitude } => {
                if group == 0 {
                    0.0
                } else {
                    let spec = BasisSpec::bspline(2, 5, 0.0, 1.0)?;
                    let f = spec.eval(x)?;
                    match group {
                        1 => amplitude * (0.5 * f[2] + f[3] + f[4]),
                        _ => amplitude * (4.0 / 3.0) * f[2],
                    }
                }
            }
            TrueModel::Model2 { amplitude } => match group {
                0 => 0.0,
                1 => amplitude * (x * std::f64::consts::FRAC_PI_2).sin(),
                _ => amplitude * (x * std::f64::consts::PI).sin(),
            },
            TrueModel::Model3 { amplitude } => match group {
                0 => 0.0,
                1 => {
                    amplitude * ((-x / 2.0).exp() - (-x).exp())
                        / ((-0.5f64).exp() - (-1.0f64).exp())
                }
                _ => amplitude * ((x - 0.5).cosh() - 1.0) / (0.5f64.cosh() - 1.0),
            },
        })
    }
}

/// Unit design points `(j-1)/(n-1)`, j = 1..n, spanning [0, 1]. This is the
/// grid that reproduces the reference coverage study.
pub fn unit_grid_spanning(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j - 1) as f64 / (n - 1) as f64).collect()
}

/// Unit design points `(j-1)/n`, j = 1..n: the half-open variant that stops
/// short of x = 1.
pub fn unit_grid_half_open(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j - 1) as f64 / n as f64).collect()
}

/// Everything one coverage/bias run needs.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    pub true_model: TrueModel,
    pub assumed_basis: BasisSpec,
    pub design_points: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub alpha: f64,
}

impl SimulationConfig {
    /// The reference study design: quadratic spline of size `assumed_m` on
    /// [0, 1], eleven spanning design points, unit noise, alpha = 0.05.
    pub fn study(true_model: TrueModel, assumed_m: usize) -> Result<Self> {
        Ok(SimulationConfig {
            true_model,
            assumed_basis: BasisSpec::bspline(2, assumed_m, 0.0, 1.0)?,
            design_points: unit_grid_spanning(11),
            replications: 100_000,
            seed: 1_234_567,
            grid_n: 2001,
            alpha: 0.05,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Contract("need at least one replication".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::Contract("evaluation grid needs at least 2 points".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 0.5], got {}",
                self.alpha
            )));
        }
        if self.assumed_basis.dim() > self.design_points.len() {
            return Err(Error::Contract(format!(
                "assumed basis dimension {} exceeds the {} design points",
                self.assumed_basis.dim(),
                self.design_points.len()
            )));
        }
        Ok(())
    }

    /// Domain the maxima and integrals run over: the basis domain for
    /// splines, else the design range.
    fn eval_range(&self) -> (f64, f64) {
        match self.assumed_basis {
            BasisSpec::Bspline { a, b, .. } => (a, b),
            _ => (
                self.design_points[0],
                self.design_points[self.design_points.len() - 1],
            ),
        }
    }
}

/// Sorted maxima of the simulated chi-square process, with binomial
/// tail-probability queries.
#[derive(Debug, Clone)]
pub struct MaxProcessSample {
    maxima: Vec<f64>,
    sorted: Vec<f64>,
}

impl MaxProcessSample {
    fn new(maxima: Vec<f64>) -> Self {
        let mut sorted = maxima.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        MaxProcessSample { maxima, sorted }
    }

    /// Maxima in replication order (deterministic for a given seed).
    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn replications(&self) -> usize {
        self.maxima.len()
    }

    /// Estimate of `Pr(max Y >= level)` with its binomial standard error.
    pub fn tail_probability(&self, level: f64) -> (f64, f64) {
        let reps = self.sorted.len() as f64;
        let below = self.sorted.partition_point(|v| *v < level);
        let p = (self.sorted.len() - below) as f64 / reps;
        (p, (p * (1.0 - p) / reps).sqrt())
    }
}

/// Simulate `reps` maxima of `Y(x) = sum_i (xi_i . psi(x))^2` over a grid of
/// `grid_n` points, with `k - 1` standard normal vectors per replication.
pub fn simulate_max_process(
    curve: &SphericalCurve,
    k: usize,
    reps: usize,
    grid_n: usize,
    seed: u64,
) -> Result<MaxProcessSample> {
    if k < 2 {
        return Err(Error::Contract(format!("need k >= 2 groups, got {k}")));
    }
    if reps == 0 {
        return Err(Error::Contract("need at least one replication".into()));
    }
    let grid = curve.domain().grid(grid_n);
    let p = curve.spec().dim();
    let mut psi_flat: Vec<f64> = Vec::with_capacity(grid.len() * p);
    for &x in &grid {
        psi_flat.extend(curve.psi(x)?.iter().copied());
    }
    let chunks = reps.div_ceil(CHUNK);
    let draws = k - 1;
    let maxima: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(reps - chunk * CHUNK);
            let mut xi = vec![0.0f64; draws * p];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                for slot in xi.iter_mut() {
                    *slot = rng.sample(StandardNormal);
                }
                let mut best = f64::NEG_INFINITY;
                for row in psi_flat.chunks_exact(p) {
                    let mut y = 0.0;
                    for i in 0..draws {
                        let d: f64 = xi[i * p..(i + 1) * p]
                            .iter()
                            .zip(row)
                            .map(|(a, b)| a * b)
                            .sum();
                        y += d * d;
                    }
                    if y > best {
                        best = y;
                    }
                }
                out.push(best);
            }
            out
        })
        .collect();
    Ok(MaxProcessSample::new(maxima))
}

/// Geometry-dependent pieces shared by the coverage oracles.
struct StudySetup {
    /// projection onto coefficients: beta = solve * y
    solve: DMatrix<f64>,
    /// basis rows on the evaluation grid
    grid: Vec<f64>,
    basis_rows: DMatrix<f64>,
    denom: Vec<f64>,
    params: TubeFormulaParams,
    /// tube critical value at the configured alpha
    critical: f64,
}

fn study_setup(config: &SimulationConfig) -> Result<StudySetup> {
    config.validate()?;
    let basis = &config.assumed_basis;
    let n = config.design_points.len();
    let info = DesignInfo::new(basis, &config.design_points, &vec![1.0; n])?;
    let (a, b) = config.eval_range();
    let curve = info.curve(basis, Domain::interval(a, b)?)?;
    let gamma = arc_length(&curve, ARC_SEGMENTS)?.quadrature;
    let params = TubeFormulaParams::new(config.true_model.k(), gamma, 1)?;
    let critical = critical_value(&params, config.alpha)?;

    let p = basis.dim();
    let mut design_rows = DMatrix::zeros(n, p);
    for (j, &x) in config.design_points.iter().enumerate() {
        for (c, v) in basis.eval(x)?.into_iter().enumerate() {
            design_rows[(j, c)] = v;
        }
    }
    // Sigma X^T maps observations to fitted coefficients
    let solve = info.sigma() * design_rows.transpose();

    let grid: Vec<f64> = (0..config.grid_n)
        .map(|i| a + (b - a) * i as f64 / (config.grid_n - 1) as f64)
        .collect();
    let mut basis_rows = DMatrix::zeros(grid.len(), p);
    let mut denom = Vec::with_capacity(grid.len());
    for (row, &x) in grid.iter().enumerate() {
        let f = DVector::from(basis.eval(x)?);
        for c in 0..p {
            basis_rows[(row, c)] = f[c];
        }
        denom.push((info.sigma() * &f).dot(&f));
    }
    Ok(StudySetup {
        solve,
        grid,
        basis_rows,
        denom,
        params,
        critical,
    })
}

/// Result of a coverage simulation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverageResult {
    pub coverage: f64,
    pub stderr: f64,
    pub replications: usize,
    pub seed: u64,
    /// Tube critical value the bands used.
    pub critical_value: f64,
}

/// Estimate the simultaneous coverage of the tube-calibrated bands when data
/// come from `config.true_model` but the assumed basis is fitted.
pub fn coverage_simulation(config: &SimulationConfig) -> Result<CoverageResult> {
    let setup = study_setup(config)?;
    let k = config.true_model.k();
    let n = config.design_points.len();
    let b2 = setup.critical * setup.critical;

    // true curves at the design points and on the evaluation grid
    let mut g_design = vec![0.0; k * n];
    for i in 0..k {
        for (j, &x) in config.design_points.iter().enumerate() {
            g_design[i * n + j] = config.true_model.value(i, x)?;
        }
    }
    let grid_len = setup.grid.len();
    let mut g_grid = vec![0.0; k * grid_len];
    for i in 0..k {
        for (row, &x) in setup.grid.iter().enumerate() {
            g_grid[i * grid_len + row] = config.true_model.value(i, x)?;
        }
    }

    let reps = config.replications;
    let chunks = reps.div_ceil(CHUNK);
    let p = config.assumed_basis.dim();
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(reps - chunk * CHUNK);
            let mut y = vec![0.0f64; n];
            let mut beta = vec![0.0f64; k * p];
            let mut fitted = vec![0.0f64; k];
            let mut hits = 0u64;
            for _ in 0..count {
                for i in 0..k {
                    for j in 0..n {
                        let eps: f64 = rng.sample(StandardNormal);
                        y[j] = g_design[i * n + j] + eps;
                    }
                    for c in 0..p {
                        let mut acc = 0.0;
                        for (j, &obs) in y.iter().enumerate() {
                            acc += setup.solve[(c, j)] * obs;
                        }
                        beta[i * p + c] = acc;
                    }
                }
                let mut max_stat = f64::NEG_INFINITY;
                for row in 0..grid_len {
                    let mut mean = 0.0;
                    for i in 0..k {
                        let mut v = 0.0;
                        for c in 0..p {
                            v += beta[i * p + c] * setup.basis_rows[(row, c)];
                        }
                        let d = v - g_grid[i * grid_len + row];
                        fitted[i] = d;
                        mean += d;
                    }
                    mean /= k as f64;
                    let mut num = 0.0;
                    for &d in fitted.iter() {
                        num += (d - mean) * (d - mean);
                    }
                    let stat = num / setup.denom[row];
                    if stat > max_stat {
                        max_stat = stat;
                    }
                }
                if max_stat <= b2 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let coverage = hits as f64 / reps as f64;
    Ok(CoverageResult {
        coverage,
        stderr: (coverage * (1.0 - coverage) / reps as f64).sqrt(),
        replications: reps,
        seed: config.seed,
        critical_value: setup.critical,
    })
}

/// Deterministic bias functional: project the true curves onto the assumed
/// basis and take the maximal standardized centered discrepancy over the
/// evaluation grid.
pub fn bias_delta(config: &SimulationConfig) -> Result<f64> {
    let setup = study_setup(config)?;
    let k = config.true_model.k();
    let p = config.assumed_basis.dim();

    // best coefficients beta* = Sigma X^T g_i
    let mut beta_star = vec![0.0; k * p];
    for i in 0..k {
        for c in 0..p {
            let mut acc = 0.0;
            for (j, &x) in config.design_points.iter().enumerate() {
                acc += setup.solve[(c, j)] * config.true_model.value(i, x)?;
            }
            beta_star[i * p + c] = acc;
        }
    }

    let mut best: f64 = 0.0;
    let mut d = vec![0.0; k];
    for (row, &x) in setup.grid.iter().enumerate() {
        let mut mean = 0.0;
        for i in 0..k {
            let mut v = 0.0;
            for c in 0..p {
                v += beta_star[i * p + c] * setup.basis_rows[(row, c)];
            }
            let di = v - config.true_model.value(i, x)?;
            d[i] = di;
            mean += di;
        }
        mean /= k as f64;
        let num: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
        best = best.max((num / setup.denom[row]).sqrt());
    }
    Ok(best)
}

/// Approximate bound on the coverage-probability bias caused by `delta`:
/// `max{ alpha - tail((b + delta)^2), tail((b - delta)^2) - alpha }` with
/// `b` the tube critical value of the assumed-basis geometry.
pub fn coverage_bias_bound(config: &SimulationConfig, delta: f64) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::Contract(format!("delta must be >= 0, got {delta}")));
    }
    let setup = study_setup(config)?;
    let b = setup.critical;
    let up = tail_at_squared_level(&setup.params, (b + delta) * (b + delta))?;
    let down = tail_at_squared_level(&setup.params, (b - delta) * (b - delta))?;
    Ok((config.alpha - up).max(down - config.alpha).max(0.0))
}

/// Average width of the band over the basis domain:
/// `b_tube * integral of sqrt(f(x)^T Sigma f(x))`, for the three-group
/// study with unit noise.
pub fn average_band_width(
    assumed_basis: &BasisSpec,
    design_points: &[f64],
    alpha: f64,
) -> Result<f64> {
    let n = design_points.len();
    let info = DesignInfo::new(assumed_basis, design_points, &vec![1.0; n])?;
    let (a, b) = match *assumed_basis {
        BasisSpec::Bspline { a, b, .. } => (a, b),
        _ => (design_points[0], design_points[n - 1]),
    };
    let curve = info.curve(assumed_basis, Domain::interval(a, b)?)?;
    let gamma = arc_length(&curve, ARC_SEGMENTS)?.quadrature;
    let params = TubeFormulaParams::new(3, gamma, 1)?;
    let critical = critical_value(&params, alpha)?;

    let failure = std::sync::Mutex::new(None);
    let integrand = |x: f64| match info.quadratic_form(assumed_basis, x) {
        Ok(q) => q.sqrt(),
        Err(e) => {
            *failure.lock().unwrap() = Some(e);
            0.0
        }
    };
    let width = adaptive_simpson_split(
        &integrand,
        &[(a, b)],
        &assumed_basis.breakpoints(),
        1e-10,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(critical * width)
}
