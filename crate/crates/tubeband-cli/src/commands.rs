//! Subcommand implementations. Each prints one JSON summary object to
//! stdout and optionally writes CSV artifacts into `--output`.

use std::path::Path;

use nalgebra::DMatrix;

use tubeband::geometry::{arc_length, euler_characteristic, kappa_sweep, CurveGeometry};
use tubeband::montecarlo::{unit_grid_half_open, unit_grid_spanning};
use tubeband::{
    average_band_width, bias_delta, chi2_scan, contrast_band, coverage_bias_bound,
    coverage_simulation, critical_value, fit_groups, model_selection, pooled_variance,
    simulate_max_process, studentized_tube_tail, tube_tail_probability, BasisSpec, DesignInfo,
    Domain, GeometryGrids, GroupFit, SimulationConfig, SphericalCurve, TrueModel,
    TubeFormulaParams,
};

use crate::config::Config;
use crate::data::{self, Dataset};
use crate::json::JVal;
use crate::CliError;

const DEFAULT_SEED: u64 = 1_234_567;
const DEFAULT_REPS: usize = 100_000;
const ARC_SEGMENTS: usize = 100_000;

fn emit(summary: &JVal) {
    println!("{summary}");
}

fn ensure_output_dir(output: Option<&Path>) -> Result<(), CliError> {
    if let Some(dir) = output {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// tailprob / critical

fn params_config(k: usize, gamma_length: f64, euler: u32, nu: Option<u64>) -> Config {
    let mut cfg = Config::default();
    cfg.set("tube.k", k);
    cfg.set("tube.gamma_length", crate::json::fmt_f64(gamma_length));
    cfg.set("tube.euler", euler);
    if let Some(nu) = nu {
        cfg.set("tube.nu", nu);
    }
    cfg
}

fn build_params(
    k: usize,
    gamma_length: f64,
    euler: u32,
    nu: Option<u64>,
) -> Result<TubeFormulaParams, CliError> {
    let params = TubeFormulaParams::new(k, gamma_length, euler)?;
    Ok(match nu {
        Some(nu) => params.with_nu(nu)?,
        None => params,
    })
}

pub fn tailprob(
    k: usize,
    gamma_length: f64,
    euler: u32,
    nu: Option<u64>,
    b: f64,
) -> Result<(), CliError> {
    let params = build_params(k, gamma_length, euler, nu)?;
    let tail = match nu {
        Some(_) => studentized_tube_tail(&params, b)?,
        None => tube_tail_probability(&params, b)?,
    };
    let mut out = JVal::obj();
    out.push("k", k)
        .push("gamma_length", gamma_length)
        .push("euler_char", euler);
    if let Some(nu) = nu {
        out.push("nu", nu);
    }
    out.push("b", b)
        .push("tail", tail)
        .push("config_hash", params_config(k, gamma_length, euler, nu).hash());
    emit(&out);
    Ok(())
}

pub fn critical(
    k: usize,
    gamma_length: f64,
    euler: u32,
    nu: Option<u64>,
    alpha: f64,
) -> Result<(), CliError> {
    let params = build_params(k, gamma_length, euler, nu)?;
    let b = critical_value(&params, alpha)?;
    let mut out = JVal::obj();
    out.push("k", k)
        .push("gamma_length", gamma_length)
        .push("euler_char", euler);
    if let Some(nu) = nu {
        out.push("nu", nu);
    }
    out.push("alpha", alpha)
        .push("b", b)
        .push("config_hash", params_config(k, gamma_length, euler, nu).hash());
    emit(&out);
    Ok(())
}

// ---------------------------------------------------------------------------
// shared configuration plumbing

fn basis_from_config(cfg: &Config, fallback: Option<(f64, f64)>) -> Result<BasisSpec, CliError> {
    match cfg.require("basis.family")? {
        "polynomial" => {
            let p = cfg
                .get_usize("basis.p")?
                .ok_or_else(|| CliError::usage("polynomial basis needs basis.p".into()))?;
            Ok(BasisSpec::polynomial(p)?)
        }
        "trigonometric" => {
            let m = cfg
                .get_usize("basis.harmonics")?
                .ok_or_else(|| CliError::usage("trigonometric basis needs basis.harmonics".into()))?;
            Ok(BasisSpec::trigonometric(m)?)
        }
        "bspline" => {
            let degree = cfg.get_usize("basis.degree")?.unwrap_or(2);
            let m = cfg
                .get_usize("basis.m")?
                .ok_or_else(|| CliError::usage("bspline basis needs basis.m".into()))?;
            let (fa, fb) = fallback.unzip();
            let a = cfg.get_f64("basis.a")?.or(fa).ok_or_else(|| {
                CliError::usage("bspline basis needs basis.a (or design points)".into())
            })?;
            let b = cfg.get_f64("basis.b")?.or(fb).ok_or_else(|| {
                CliError::usage("bspline basis needs basis.b (or design points)".into())
            })?;
            Ok(BasisSpec::bspline(degree, m, a, b)?)
        }
        other => Err(CliError::usage(format!("unknown basis family `{other}`"))),
    }
}

fn domain_from_config(cfg: &Config, default_range: (f64, f64)) -> Result<Domain, CliError> {
    let intervals = cfg
        .get_intervals("domain.intervals")?
        .unwrap_or_else(|| vec![default_range]);
    let closed = cfg.get_bool("domain.closed")?.unwrap_or(false);
    Ok(Domain::new(intervals, closed)?)
}

enum VarianceMode {
    /// externally supplied covariance matrix
    Sigma,
    Known,
    Pooled { nu: u64 },
}

impl VarianceMode {
    fn label(&self) -> &'static str {
        match self {
            VarianceMode::Sigma => "sigma",
            VarianceMode::Known => "known",
            VarianceMode::Pooled { .. } => "pooled",
        }
    }
}

struct Setup {
    spec: BasisSpec,
    info: DesignInfo,
    domain: Domain,
    mode: VarianceMode,
}

fn setup_from_config(cfg: &Config, dataset: Option<&Dataset>) -> Result<Setup, CliError> {
    let fallback = dataset
        .map(|d| (d.points[0], d.points[d.points.len() - 1]))
        .or_else(|| {
            cfg.get_f64_list("design.points")
                .ok()
                .flatten()
                .filter(|p| p.len() >= 2)
                .map(|p| (p[0], p[p.len() - 1]))
        });
    let spec = basis_from_config(cfg, fallback)?;

    // explicit covariance wins; otherwise the information matrix of the
    // design points under the configured variance
    if let Some(rows) = cfg.get_matrix("design.sigma")? {
        let p = spec.dim();
        if rows.len() != p || rows.iter().any(|r| r.len() != p) {
            return Err(CliError::usage(format!(
                "design.sigma must be {p}x{p} for this basis"
            )));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let sigma = DMatrix::from_row_slice(p, p, &flat);
        let info = DesignInfo::from_sigma(sigma)?;
        let default_range = match fallback {
            Some(r) => r,
            None => {
                let iv = cfg.get_intervals("domain.intervals")?.ok_or_else(|| {
                    CliError::usage("domain.intervals required with design.sigma".into())
                })?;
                (iv[0].0, iv[iv.len() - 1].1)
            }
        };
        let domain = domain_from_config(cfg, default_range)?;
        return Ok(Setup {
            spec,
            info,
            domain,
            mode: VarianceMode::Sigma,
        });
    }

    let points: Vec<f64> = match (cfg.get_f64_list("design.points")?, dataset) {
        (Some(p), _) => p,
        (None, Some(d)) => d.points.clone(),
        (None, None) => {
            return Err(CliError::usage(
                "no design points: set design.points or provide data".into(),
            ))
        }
    };
    let n = points.len();
    let (variance, mode) = match cfg.get("design.variance") {
        Some("pooled") => {
            let dataset = dataset.ok_or_else(|| {
                CliError::usage("design.variance = pooled needs a data file".into())
            })?;
            let values = pooled_variance(&dataset.samples)?;
            let residual_df: f64 = dataset
                .samples
                .iter()
                .map(|s| s.replications as f64 - 1.0)
                .sum();
            let nu = cfg
                .get_u64("design.nu")?
                .unwrap_or((residual_df * n as f64) as u64);
            (values, VarianceMode::Pooled { nu })
        }
        Some(list) if list.contains(',') => (
            cfg.get_f64_list("design.variance")?.unwrap(),
            VarianceMode::Known,
        ),
        Some(single) => {
            let v: f64 = single.parse().map_err(|_| {
                CliError::usage(format!("design.variance: `{single}` is not a number or `pooled`"))
            })?;
            (vec![v; n], VarianceMode::Known)
        }
        None => (vec![1.0; n], VarianceMode::Known),
    };
    if variance.len() != n {
        return Err(CliError::usage(format!(
            "design.variance has {} entries for {n} points",
            variance.len()
        )));
    }
    let info = DesignInfo::new(&spec, &points, &variance)?;
    let default_range = match spec {
        BasisSpec::Bspline { a, b, .. } => (a, b),
        _ => (points[0], points[n - 1]),
    };
    let domain = domain_from_config(cfg, default_range)?;
    Ok(Setup {
        spec,
        info,
        domain,
        mode,
    })
}

fn curve_of(setup: &Setup) -> Result<SphericalCurve, CliError> {
    Ok(setup.info.curve(&setup.spec, setup.domain.clone())?)
}

/// Geometry plus the tube critical value for this setup.
fn critical_for_setup(
    setup: &Setup,
    k: usize,
    alpha: f64,
    studentized: bool,
) -> Result<(f64, f64, u32, Option<u64>), CliError> {
    let curve = curve_of(setup)?;
    let gamma = arc_length(&curve, ARC_SEGMENTS)?.quadrature;
    let euler = euler_characteristic(&curve);
    let mut params = TubeFormulaParams::new(k, gamma, euler)?;
    let mut nu_used = None;
    if studentized {
        if let VarianceMode::Pooled { nu } = setup.mode {
            params = params.with_nu(nu)?;
            nu_used = Some(nu);
        } else {
            return Err(CliError::usage(
                "design.studentized = true needs design.variance = pooled".into(),
            ));
        }
    }
    let b = critical_value(&params, alpha)?;
    Ok((b, gamma, euler, nu_used))
}

// ---------------------------------------------------------------------------
// geometry

pub fn geometry(
    config: &Path,
    output: Option<&Path>,
    x_grid: Option<usize>,
    alpha_grid: Option<usize>,
    segments: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = Config::from_file(config)?;
    if let Some(v) = x_grid {
        cfg.set("grids.x", v);
    }
    if let Some(v) = alpha_grid {
        cfg.set("grids.alpha", v);
    }
    if let Some(v) = segments {
        cfg.set("grids.segments", v);
    }
    let grids = GeometryGrids {
        x_grid: cfg.get_usize("grids.x")?.unwrap_or(2001),
        alpha_grid: cfg.get_usize("grids.alpha")?.unwrap_or(401),
        arc_segments: cfg.get_usize("grids.segments")?.unwrap_or(100_000),
    };
    let setup = setup_from_config(&cfg, None)?;
    let curve = curve_of(&setup)?;
    let geo = CurveGeometry::compute(&curve, &grids)?;

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let path = dir.join("kappa.csv");
        data::write_kappa_csv(&path, &kappa_sweep(&curve, grids.x_grid)?)?;
        artifacts.push(path.display().to_string());
    }

    let mut out = JVal::obj();
    out.push("gamma_length", geo.gamma_length)
        .push("gamma_length_polyline", geo.arc.polyline)
        .push("arc_discrepancy", geo.arc.discrepancy)
        .push("arc_warning", geo.arc.warning)
        .push("euler_char", geo.euler_char)
        .push("kappa_max", geo.kappa_max)
        .push("theta_loc", geo.theta_loc)
        .push("theta_loc_over_pi", geo.theta_loc / std::f64::consts::PI)
        .push("theta_c", geo.theta_c)
        .push("theta_c_over_pi", geo.theta_c / std::f64::consts::PI)
        .push("skipped_fraction", geo.skipped_fraction)
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

fn selection_candidates(cfg: &Config, n: usize) -> Result<Vec<(usize, usize)>, CliError> {
    let degrees = cfg
        .get_f64_list("inference.candidate_degrees")?
        .map(|v| v.into_iter().map(|d| d as usize).collect::<Vec<_>>())
        .unwrap_or_else(|| vec![2, 3, 4]);
    let max_m = cfg.get_usize("inference.max_m")?.unwrap_or(n).min(n);
    let mut out = Vec::new();
    for &d in &degrees {
        for m in (d + 1)..=max_m {
            out.push((d, m));
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("empty model-selection candidate set".into()));
    }
    Ok(out)
}

fn fit_from_setup(setup: &Setup, dataset: &Dataset) -> Result<GroupFit, CliError> {
    Ok(fit_groups(&setup.spec, &setup.info, &dataset.samples)?)
}

pub fn fit(config: &Path, data_path: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = Config::from_file(config)?;
    let dataset = data::read_data_csv(data_path)?;
    let setup = setup_from_config(&cfg, Some(&dataset))?;
    let fit = fit_from_setup(&setup, &dataset)?;

    let candidates = selection_candidates(&cfg, dataset.points.len())?;
    let selection = model_selection(
        &candidates,
        &dataset.points,
        &dataset.samples,
        setup.info.variance(),
    )?;
    let best_aic = selection.best_aic();
    let best_bic = selection.best_bic();

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let sel = dir.join("selection.csv");
        data::write_selection_csv(&sel, &selection.entries)?;
        artifacts.push(sel.display().to_string());

        let grid = setup.domain.grid(cfg.get_usize("grids.band")?.unwrap_or(201));
        let mut fitted = Vec::new();
        for i in 0..fit.k() {
            let mut series = Vec::with_capacity(grid.len());
            for &x in &grid {
                series.push(fit.fitted(i, x)?);
            }
            fitted.push(series);
        }
        let fpath = dir.join("fitted.csv");
        data::write_fitted_csv(&fpath, fit.group_ids(), &grid, &fitted)?;
        artifacts.push(fpath.display().to_string());

        let spath = dir.join("sigma.csv");
        data::write_sigma_csv(&spath, setup.info.points(), setup.info.variance())?;
        artifacts.push(spath.display().to_string());
    }

    let mut groups = Vec::new();
    for (i, id) in fit.group_ids().iter().enumerate() {
        let mut g = JVal::obj();
        g.push("id", id.as_str())
            .push("replications", fit.replications()[i] as u64)
            .push(
                "coefficients",
                fit.coefficients()[i].iter().copied().collect::<Vec<f64>>(),
            )
            .push("residual_l", fit.residual_l()[i]);
        groups.push(g);
    }
    let sel_json = |e: tubeband::inference::SelectionEntry| {
        let mut o = JVal::obj();
        o.push("degree", e.degree)
            .push("m", e.m)
            .push("l", e.l)
            .push("aic", e.aic)
            .push("bic", e.bic);
        o
    };
    let mut out = JVal::obj();
    out.push("groups", JVal::Arr(groups))
        .push("variance_mode", setup.mode.label())
        .push("best_aic", sel_json(best_aic))
        .push("best_bic", sel_json(best_bic))
        .push(
            "criteria_agree",
            best_aic.degree == best_bic.degree && best_aic.m == best_bic.m,
        )
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

// ---------------------------------------------------------------------------
// band / scan

fn parse_contrast(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad contrast entry `{tok}`")))
        })
        .collect()
}

pub fn band(
    config: &Path,
    data_path: &Path,
    contrast: &str,
    alpha: Option<f64>,
    grid_n: Option<usize>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = Config::from_file(config)?;
    if let Some(a) = alpha {
        cfg.set("inference.alpha", a);
    }
    if let Some(g) = grid_n {
        cfg.set("grids.band", g);
    }
    cfg.set("inference.contrast", contrast);
    let dataset = data::read_data_csv(data_path)?;
    let setup = setup_from_config(&cfg, Some(&dataset))?;
    let fit = fit_from_setup(&setup, &dataset)?;
    let c = parse_contrast(contrast)?;
    let alpha = cfg.get_f64("inference.alpha")?.unwrap_or(0.05);
    let studentized = cfg.get_bool("design.studentized")?.unwrap_or(false);
    let (b, gamma, euler, nu) = critical_for_setup(&setup, fit.k(), alpha, studentized)?;

    let grid = setup.domain.grid(cfg.get_usize("grids.band")?.unwrap_or(201));
    let band = contrast_band(&fit, &c, b, &grid)?;

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let path = dir.join("band.csv");
        data::write_band_csv(&path, &data::BandTable::from(&band))?;
        artifacts.push(path.display().to_string());
    }

    let mut out = JVal::obj();
    out.push("alpha", alpha)
        .push("b", b)
        .push("gamma_length", gamma)
        .push("euler_char", euler);
    if let Some(nu) = nu {
        out.push("nu", nu);
    }
    out.push("contrast", c.clone())
        .push("grid_points", band.xs.len())
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

pub fn scan(
    config: &Path,
    data_path: &Path,
    alpha: Option<f64>,
    grid_n: Option<usize>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = Config::from_file(config)?;
    if let Some(a) = alpha {
        cfg.set("inference.alpha", a);
    }
    if let Some(g) = grid_n {
        cfg.set("grids.band", g);
    }
    let dataset = data::read_data_csv(data_path)?;
    let setup = setup_from_config(&cfg, Some(&dataset))?;
    let fit = fit_from_setup(&setup, &dataset)?;
    let alpha = cfg.get_f64("inference.alpha")?.unwrap_or(0.05);
    let studentized = cfg.get_bool("design.studentized")?.unwrap_or(false);
    let (b, gamma, euler, nu) = critical_for_setup(&setup, fit.k(), alpha, studentized)?;

    let grid = setup.domain.grid(cfg.get_usize("grids.band")?.unwrap_or(201));
    let chi2 = chi2_scan(&fit, &grid)?;
    let threshold = b * b;
    let max_chi2 = chi2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rejected = chi2.iter().filter(|v| **v > threshold).count();

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let path = dir.join("scan.csv");
        data::write_scan_csv(&path, &grid, &chi2, threshold)?;
        artifacts.push(path.display().to_string());
    }

    let mut out = JVal::obj();
    out.push("alpha", alpha)
        .push("b", b)
        .push("threshold", threshold)
        .push("gamma_length", gamma)
        .push("euler_char", euler);
    if let Some(nu) = nu {
        out.push("nu", nu);
    }
    out.push("max_chi2", max_chi2)
        .push("rejected_fraction", rejected as f64 / grid.len() as f64)
        .push("any_rejection", rejected > 0)
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

// ---------------------------------------------------------------------------
// simulations

pub fn sim_max(
    config: &Path,
    output: Option<&Path>,
    reps: Option<usize>,
    seed: Option<u64>,
    grid_n: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = Config::from_file(config)?;
    if let Some(v) = reps {
        cfg.set("simulation.replications", v);
    }
    if let Some(v) = seed {
        cfg.set("simulation.seed", v);
    }
    if let Some(v) = grid_n {
        cfg.set("simulation.grid", v);
    }
    let reps = cfg
        .get_usize("simulation.replications")?
        .unwrap_or(DEFAULT_REPS);
    let seed = cfg.get_u64("simulation.seed")?.unwrap_or(DEFAULT_SEED);
    let grid_n = cfg.get_usize("simulation.grid")?.unwrap_or(201);
    let k = cfg.get_usize("simulation.k")?.unwrap_or(3);
    let alpha = cfg.get_f64("inference.alpha")?.unwrap_or(0.05);

    let setup = setup_from_config(&cfg, None)?;
    let curve = curve_of(&setup)?;
    let gamma = arc_length(&curve, ARC_SEGMENTS)?.quadrature;
    let euler = euler_characteristic(&curve);
    let params = TubeFormulaParams::new(k, gamma, euler)?;
    let sample = simulate_max_process(&curve, k, reps, grid_n, seed)?;

    let b_critical = critical_value(&params, alpha)?;
    let (mc_at_critical, se_at_critical) = sample.tail_probability(b_critical * b_critical);

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        // tail probability curve: tube formula vs Monte Carlo
        let mut rows = Vec::new();
        let mut b = 0.5;
        while b <= 5.0 + 1e-9 {
            let tube = tube_tail_probability(&params, b)?;
            let (mc, se) = sample.tail_probability(b * b);
            rows.push((b, tube, mc, se));
            b += 0.05;
        }
        let tpath = dir.join("tail_curve.csv");
        data::write_tail_curve_csv(&tpath, &rows)?;
        artifacts.push(tpath.display().to_string());

        // nominal vs actual confidence coefficient
        let mut rows = Vec::new();
        for i in 1..=50 {
            let nominal = i as f64 / 100.0;
            let b = critical_value(&params, nominal)?;
            let (actual, se) = sample.tail_probability(b * b);
            rows.push((nominal, actual, se));
        }
        let cpath = dir.join("coverage_curve.csv");
        data::write_coverage_curve_csv(&cpath, &rows)?;
        artifacts.push(cpath.display().to_string());
    }

    let mut out = JVal::obj();
    out.push("k", k)
        .push("gamma_length", gamma)
        .push("euler_char", euler)
        .push("replications", reps)
        .push("seed", seed)
        .push("grid_n", grid_n)
        .push("alpha", alpha)
        .push("b_critical", b_critical)
        .push("mc_tail_at_critical", mc_at_critical)
        .push("mc_stderr_at_critical", se_at_critical)
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

fn parse_model(name: &str, amplitude: f64) -> Result<TrueModel, CliError> {
    Ok(match name {
        "model1" => TrueModel::Model1 { amplitude },
        "model2" => TrueModel::Model2 { amplitude },
        "model3" => TrueModel::Model3 { amplitude },
        "in-basis" => TrueModel::InBasis,
        other => {
            return Err(CliError::usage(format!(
                "unknown model `{other}` (expected model1|model2|model3|in-basis)"
            )))
        }
    })
}

fn design_grid(rule: &str, n: usize) -> Result<Vec<f64>, CliError> {
    match rule {
        "spanning" => Ok(unit_grid_spanning(n)),
        "half-open" => Ok(unit_grid_half_open(n)),
        other => Err(CliError::usage(format!(
            "unknown design rule `{other}` (expected spanning|half-open)"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sim_coverage(
    config: Option<&Path>,
    output: Option<&Path>,
    model: Option<String>,
    amplitude: Option<f64>,
    m: Option<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
    grid_n: Option<usize>,
    design_rule: Option<String>,
) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    if let Some(v) = model {
        cfg.set("simulation.model", v);
    }
    if let Some(v) = amplitude {
        cfg.set("simulation.amplitude", v);
    }
    if let Some(v) = m {
        cfg.set("simulation.m", v);
    }
    if let Some(v) = reps {
        cfg.set("simulation.replications", v);
    }
    if let Some(v) = seed {
        cfg.set("simulation.seed", v);
    }
    if let Some(v) = grid_n {
        cfg.set("simulation.grid", v);
    }
    if let Some(v) = design_rule {
        cfg.set("simulation.rule", v);
    }

    let model_name = cfg.get("simulation.model").unwrap_or("model1").to_string();
    let amplitude = cfg.get_f64("simulation.amplitude")?.unwrap_or(1.0);
    let m = cfg.get_usize("simulation.m")?.unwrap_or(5);
    let n = cfg.get_usize("simulation.n")?.unwrap_or(11);
    let rule = cfg.get("simulation.rule").unwrap_or("spanning").to_string();
    let sim = SimulationConfig {
        true_model: parse_model(&model_name, amplitude)?,
        assumed_basis: BasisSpec::bspline(2, m, 0.0, 1.0)?,
        design_points: design_grid(&rule, n)?,
        replications: cfg
            .get_usize("simulation.replications")?
            .unwrap_or(DEFAULT_REPS),
        seed: cfg.get_u64("simulation.seed")?.unwrap_or(DEFAULT_SEED),
        grid_n: cfg.get_usize("simulation.grid")?.unwrap_or(2001),
        alpha: cfg.get_f64("inference.alpha")?.unwrap_or(0.05),
    };

    let delta = bias_delta(&sim)?;
    let bound = coverage_bias_bound(&sim, delta)?;
    let result = coverage_simulation(&sim)?;

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let path = dir.join("coverage_row.csv");
        data::write_table_row_csv(&path, &model_name, amplitude, m, &result, delta, bound)?;
        artifacts.push(path.display().to_string());
    }

    let mut out = JVal::obj();
    out.push("model", model_name.as_str())
        .push("amplitude", amplitude)
        .push("m", m)
        .push("n", n)
        .push("design_rule", rule.as_str())
        .push("alpha", sim.alpha)
        .push("coverage", result.coverage)
        .push("stderr", result.stderr)
        .push("delta", delta)
        .push("delta_bound", bound)
        .push("critical_value", result.critical_value)
        .push("replications", result.replications)
        .push("seed", result.seed)
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}

pub fn widths(
    m_min: usize,
    m_max: usize,
    n: usize,
    alpha: f64,
    design_rule: &str,
    output: Option<&Path>,
) -> Result<(), CliError> {
    if m_min < 3 || m_max < m_min {
        return Err(CliError::usage(format!(
            "need 3 <= m-min <= m-max, got {m_min}..{m_max}"
        )));
    }
    let points = design_grid(design_rule, n)?;
    let mut rows = Vec::new();
    for m in m_min..=m_max {
        let basis = BasisSpec::bspline(2, m, 0.0, 1.0)?;
        rows.push((m, average_band_width(&basis, &points, alpha)?));
    }

    ensure_output_dir(output)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = output {
        let path = dir.join("widths.csv");
        data::write_widths_csv(&path, &rows)?;
        artifacts.push(path.display().to_string());
    }

    let mut cfg = Config::default();
    cfg.set("widths.m_min", m_min);
    cfg.set("widths.m_max", m_max);
    cfg.set("widths.n", n);
    cfg.set("widths.alpha", crate::json::fmt_f64(alpha));
    cfg.set("widths.rule", design_rule);

    let width_objs: Vec<JVal> = rows
        .iter()
        .map(|(m, w)| {
            let mut o = JVal::obj();
            o.push("m", *m).push("width", *w);
            o
        })
        .collect();
    let mut out = JVal::obj();
    out.push("alpha", alpha)
        .push("n", n)
        .push("design_rule", design_rule)
        .push("widths", JVal::Arr(width_objs))
        .push("artifacts", JVal::Arr(artifacts.into_iter().map(JVal::from).collect()))
        .push("config_hash", cfg.hash());
    emit(&out);
    Ok(())
}
