//! Acceptance suite: every release criterion as one test that prints a
//! PASS line with the measured quantities. Run it alone with
//!
//! ```text
//! cargo test -p tubeband --test acceptance -- --nocapture
//! ```

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use tubeband::geometry::{
    arc_length, euler_characteristic, global_critical_radius, kappa, local_critical_radius,
    CurveGeometry, GeometryGrids,
};
use tubeband::montecarlo::unit_grid_spanning;
use tubeband::{
    bias_delta, chi2_scan, coverage_bias_bound, coverage_simulation, critical_value, fit_groups,
    h_matrix, simulate_max_process, studentized_tube_tail, studentized_tube_tail_quadrature,
    sqrt_factor, tube_tail_probability, tube_volume_fraction, average_band_width, BasisSpec,
    DesignInfo, Domain, GroupSample, SimulationConfig, SphericalCurve, TrueModel,
    TubeFormulaParams,
};

fn quadratic_example_curve() -> SphericalCurve {
    let spec = BasisSpec::polynomial(3).unwrap();
    let sigma = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 1.0],
    );
    let factor = sqrt_factor(&sigma).unwrap();
    SphericalCurve::from_factor(spec, factor, Domain::interval(-1.0, 1.0).unwrap()).unwrap()
}

fn quadratic_example_params() -> TubeFormulaParams {
    TubeFormulaParams::new(3, std::f64::consts::PI / 6.0f64.sqrt(), 1).unwrap()
}

fn check(ok: bool, label: &str, detail: String) {
    if ok {
        println!("PASS {label}: {detail}");
    } else {
        println!("FAIL {label}: {detail}");
        panic!("{label} failed: {detail}");
    }
}

#[test]
fn criterion_01_worked_example_geometry() {
    let start = Instant::now();
    let curve = quadratic_example_curve();
    let expect_len = std::f64::consts::PI / 6.0f64.sqrt();

    let arc = arc_length(&curve, 100_000).unwrap();
    let quad_err = (arc.quadrature - expect_len).abs();
    let poly_err = (arc.polyline - expect_len).abs();

    let mut kappa_err: f64 = 0.0;
    for i in 0..=100 {
        let x = -1.0 + i as f64 / 50.0;
        kappa_err = kappa_err.max((kappa(&curve, x).unwrap() - 5.0).abs());
    }

    let theta_loc = local_critical_radius(&curve, 2001).unwrap();
    let loc_err = (theta_loc - (1.0 / 5.0f64.sqrt()).atan()).abs();
    let theta_c = global_critical_radius(&curve, 2001, 401).unwrap();
    let global_err = (theta_c - theta_loc).abs();

    let elapsed = start.elapsed().as_secs_f64();
    check(
        quad_err < 1e-6
            && poly_err < 1e-4
            && kappa_err < 1e-8
            && loc_err < 1e-8
            && global_err < 1e-3
            && elapsed < 10.0,
        "criterion 1 (worked-example geometry)",
        format!(
            "|arc-pi/sqrt6| = {quad_err:.2e} (quadrature), {poly_err:.2e} (polyline); \
             max |kappa-5| = {kappa_err:.2e}; |theta_loc - atan(1/sqrt5)| = {loc_err:.2e}; \
             |theta_c - theta_loc| = {global_err:.2e}; runtime {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_02_closed_form_tube_identity() {
    let params = quadratic_example_params();
    let mut worst: f64 = 0.0;
    for b in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
        let tube = tube_tail_probability(&params, b).unwrap();
        let closed =
            (std::f64::consts::PI.sqrt() / (2.0 * 3.0f64.sqrt()) * b + 1.0) * (-b * b / 2.0).exp();
        worst = worst.max((tube - closed).abs());
    }
    check(
        worst < 1e-12,
        "criterion 2 (closed-form tube identity)",
        format!("max |tube - closed form| = {worst:.2e} over b in {{0.5,1,2,3,4,5}}"),
    );
}

#[test]
fn criterion_03_growth_critical_value() {
    let params = TubeFormulaParams::new(3, 6.989, 1).unwrap();
    let b = critical_value(&params, 0.05).unwrap();
    let round_trip = (tube_tail_probability(&params, b).unwrap() - 0.05).abs();
    check(
        (b - 3.258).abs() < 1e-3 && round_trip < 1e-9,
        "criterion 3 (growth critical value)",
        format!("b = {b:.6} (target 3.258 +- 0.001); |tail(b) - 0.05| = {round_trip:.2e}"),
    );
}

#[test]
fn criterion_04_conservative_and_accurate_tail() {
    let start = Instant::now();
    let curve = quadratic_example_curve();
    let params = quadratic_example_params();
    let sample = simulate_max_process(&curve, 3, 100_000, 201, 20_240_817).unwrap();

    let mut checked = 0;
    let mut worst_gap: f64 = 0.0;
    let mut conservative = true;
    let mut b = 1.0;
    while b <= 4.0 + 1e-9 {
        let tube = tube_tail_probability(&params, b).unwrap();
        if (0.01..=0.2).contains(&tube) {
            let (mc, se) = sample.tail_probability(b * b);
            if mc > tube + 3.0 * se {
                conservative = false;
            }
            worst_gap = worst_gap.max((tube - mc).abs());
            checked += 1;
        }
        b += 0.05;
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        checked > 10 && conservative && worst_gap <= 0.012 && elapsed < 60.0,
        "criterion 4 (conservativeness and accuracy)",
        format!(
            "{checked} levels with tube tail in [0.01, 0.2]: MC <= tube + 3se everywhere, \
             max |tube - MC| = {worst_gap:.4}; runtime {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_05_deterministic_bias_columns() {
    let start = Instant::now();
    let study = |model, m| SimulationConfig::study(model, m).unwrap();
    let m1 = |k_amp: f64| TrueModel::Model1 { amplitude: k_amp };

    let cases = [
        (study(m1(1.0), 3), 0.4692, 5e-4),
        (study(m1(1.0), 4), 0.3996, 5e-4),
        (study(m1(1.0), 5), 0.0000, 5e-4),
        (study(m1(1.0), 6), 0.1006, 5e-4),
        (study(TrueModel::Model2 { amplitude: 1.0 }, 3), 0.06491, 5e-5),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (cfg, target, tol) in &cases {
        let delta = bias_delta(cfg).unwrap();
        ok &= (delta - target).abs() < *tol;
        details.push(format!("{delta:.5} (target {target})"));
    }

    let cfg = study(m1(1.0), 3);
    let delta = bias_delta(&cfg).unwrap();
    let bound = coverage_bias_bound(&cfg, delta).unwrap();
    ok &= (bound - 0.1155).abs() < 1e-3;
    details.push(format!("bound {bound:.5} (target 0.1155)"));

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    check(
        ok,
        "criterion 5 (deterministic bias columns)",
        format!("delta = [{}]; runtime {elapsed:.2}s", details.join(", ")),
    );
}

#[test]
fn criterion_06_stochastic_coverage_spot_checks() {
    let mut details = Vec::new();
    let mut ok = true;
    let cases = [
        (TrueModel::Model1 { amplitude: 1.0 }, 5, 0.9512, 0.003),
        (TrueModel::Model2 { amplitude: 9.0 }, 3, 0.9277, 0.004),
        (TrueModel::Model1 { amplitude: 9.0 }, 3, 0.0000, 0.001),
    ];
    for (model, m, target, tol) in cases {
        let start = Instant::now();
        let cfg = SimulationConfig::study(model, m).unwrap();
        let result = coverage_simulation(&cfg).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let hit = (result.coverage - target).abs() <= tol && elapsed < 300.0;
        ok &= hit;
        details.push(format!(
            "m={m}: {:.4} (target {target} +- {tol}, {elapsed:.1}s)",
            result.coverage
        ));
    }
    check(
        ok,
        "criterion 6 (stochastic coverage spot checks)",
        details.join("; "),
    );
}

#[test]
fn criterion_07_average_band_widths() {
    let start = Instant::now();
    let targets = [1.463, 1.752, 2.017, 2.275, 2.546, 2.764, 2.990, 3.211];
    let points = unit_grid_spanning(11);
    let mut ok = true;
    let mut details = Vec::new();
    for (m, target) in (3..=10).zip(targets) {
        let basis = BasisSpec::bspline(2, m, 0.0, 1.0).unwrap();
        let w = average_band_width(&basis, &points, 0.05).unwrap();
        ok &= (w - target).abs() < 2e-3;
        details.push(format!("{w:.4}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    check(
        ok,
        "criterion 7 (average band widths)",
        format!(
            "W(3..10) = [{}] vs reference, all within 2e-3; runtime {elapsed:.2}s",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_08_h_matrix_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let k = 2 + trial % 7;
        let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..20.0)).collect();
        let h = h_matrix(&r).unwrap();
        let rho = DVector::from_iterator(k, r.iter().map(|v| v.sqrt()));
        worst = worst.max((rho.transpose() * &h).amax());
        worst = worst.max((h.transpose() * &h - DMatrix::identity(k - 1, k - 1)).amax());
        let projector = DMatrix::identity(k, k) - &rho * rho.transpose() / rho.norm_squared();
        worst = worst.max((&h * h.transpose() - projector).amax());
    }
    check(
        worst < 1e-12,
        "criterion 8 (H-matrix identities)",
        format!("max identity violation = {worst:.2e} over 100 random replication vectors"),
    );
}

#[test]
fn criterion_09_studentized_equivalence() {
    let base = quadratic_example_params();
    let mut worst: f64 = 0.0;
    for nu in [5u64, 20, 100] {
        let params = base.with_nu(nu).unwrap();
        for b in [1.0, 2.0, 3.0, 4.0] {
            let closed = studentized_tube_tail(&params, b).unwrap();
            let quad = studentized_tube_tail_quadrature(&params, b, 64).unwrap();
            worst = worst.max((closed - quad).abs());
        }
    }
    let huge = base.with_nu(1_000_000).unwrap();
    let mut limit_gap: f64 = 0.0;
    for b in [1.0, 2.0, 3.0, 4.0] {
        limit_gap = limit_gap.max(
            (studentized_tube_tail(&huge, b).unwrap()
                - tube_tail_probability(&base, b).unwrap())
            .abs(),
        );
    }
    check(
        worst < 1e-8 && limit_gap < 1e-4,
        "criterion 9 (studentized equivalence)",
        format!(
            "max |closed - quadrature| = {worst:.2e} over nu in {{5,20,100}} x b in {{1..4}}; \
             nu = 1e6 limit gap = {limit_gap:.2e}"
        ),
    );
}

#[test]
fn criterion_10_pointwise_chi_square_distribution() {
    // under the null every group mean curve is zero; at a fixed x the scan
    // statistic follows chi-square with k - 1 = 2 degrees of freedom
    let spec = BasisSpec::bspline(2, 5, 0.0, 1.0).unwrap();
    let points = unit_grid_spanning(11);
    let info = DesignInfo::new(&spec, &points, &[1.0; 11]).unwrap();
    let x0 = 0.35;
    let reps = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut samples = Vec::with_capacity(3);
        for g in 0..3 {
            let ys: Vec<f64> = (0..11).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            samples.push(GroupSample::new(format!("g{g}"), 1, ys));
        }
        let fit = fit_groups(&spec, &info, &samples).unwrap();
        values.push(chi2_scan(&fit, &[x0]).unwrap()[0]);
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // chi-square with 2 df has cdf 1 - exp(-t/2)
    let mut ks: f64 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let cdf = 1.0 - (-v / 2.0).exp();
        let lo = i as f64 / reps as f64;
        let hi = (i + 1) as f64 / reps as f64;
        ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
    }
    check(
        ks < 0.02,
        "criterion 10 (pointwise chi-square distribution)",
        format!("KS distance = {ks:.4} over {reps} null replications at x0 = {x0}"),
    );
}

#[test]
fn criterion_11_tube_volume_against_sphere_sampling() {
    let curve = quadratic_example_curve();
    let params = quadratic_example_params();
    let p = 3;
    let k = 3;
    let n = p * (k - 1);
    let grid: Vec<f64> = (0..1001).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
    let psi_flat: Vec<f64> = grid
        .iter()
        .flat_map(|&x| {
            let v = curve.psi(x).unwrap();
            v.iter().copied().collect::<Vec<f64>>()
        })
        .collect();

    let total: usize = 1_000_000;
    let chunk = 4096;
    let chunks = total.div_ceil(chunk);
    // distance from a uniform point on the sphere to the index manifold
    let distances: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(111);
            rng.set_stream(c as u64);
            let count = chunk.min(total - c * chunk);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut best: f64 = 0.0;
                for row in psi_flat.chunks_exact(p) {
                    let mut s = 0.0;
                    for i in 0..(k - 1) {
                        let d: f64 = v[i * p..(i + 1) * p]
                            .iter()
                            .zip(row)
                            .map(|(a, b)| a * b)
                            .sum();
                        s += d * d;
                    }
                    if s > best {
                        best = s;
                    }
                }
                let cosine = (best.sqrt() / norm).clamp(-1.0, 1.0);
                out.push(cosine.acos());
            }
            out
        })
        .collect();

    let mut ok = true;
    let mut details = Vec::new();
    for theta in [0.1, 0.2, 0.3] {
        let formula = tube_volume_fraction(&params, p, theta).unwrap();
        let hits = distances.iter().filter(|d| **d <= theta).count();
        let mc = hits as f64 / total as f64;
        let se = (mc * (1.0 - mc) / total as f64).sqrt();
        let gap = (formula - mc).abs();
        ok &= gap <= 3.0 * se;
        details.push(format!(
            "theta={theta}: formula {formula:.5e}, MC {mc:.5e} (3se = {:.1e})",
            3.0 * se
        ));
    }
    check(
        ok,
        "criterion 11 (tube volume vs sphere sampling)",
        details.join("; "),
    );
}

#[test]
fn criterion_12_factor_invariance() {
    let base = quadratic_example_curve();
    let grids = GeometryGrids {
        x_grid: 501,
        alpha_grid: 101,
        arc_segments: 20_000,
    };
    let reference = CurveGeometry::compute(&base, &grids).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = m.qr();
        let mut q = qr.q();
        let r = qr.r();
        for i in 0..3 {
            if r[(i, i)] < 0.0 {
                for row in 0..3 {
                    q[(row, i)] = -q[(row, i)];
                }
            }
        }
        let rotated = SphericalCurve::from_factor(
            base.spec().clone(),
            &q * base.factor(),
            base.domain().clone(),
        )
        .unwrap();
        let geo = CurveGeometry::compute(&rotated, &grids).unwrap();
        worst = worst.max((geo.gamma_length - reference.gamma_length).abs());
        worst = worst.max((geo.arc.polyline - reference.arc.polyline).abs());
        worst = worst.max((geo.kappa_max - reference.kappa_max).abs());
        worst = worst.max((geo.theta_loc - reference.theta_loc).abs());
        worst = worst.max((geo.theta_c - reference.theta_c).abs());
        assert_eq!(geo.euler_char, reference.euler_char);
        assert_eq!(
            euler_characteristic(&rotated),
            euler_characteristic(&base)
        );
    }
    check(
        worst < 1e-10,
        "criterion 12 (factor invariance)",
        format!("max output deviation = {worst:.2e} across 20 orthogonal re-factorings"),
    );
}
