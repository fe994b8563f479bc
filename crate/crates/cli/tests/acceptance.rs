//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with the measured numbers. Run with
//! `cargo test -p geofourier-cli --test acceptance -- --nocapture`.

use std::time::Instant;

use geofourier_cli::config::{random_trig_with_rng, sample_direction, sample_point};
use geofourier_cli::{run_breakdown_demo, ExperimentConfig};
use geofourier_core::numeric::observed_order;
use geofourier_core::{
    apply_transport, exp_map, fiber_norm, geodesic_flow_compose_check, invert, make_window,
    symmetrized_derivative_via_exp, symmetrized_stencil_derivative, transport_along, ChartPoint,
    CutoffWindow, DifferentialOperator, FdSettings, FiberValue, QuadraturePlan, TangentVector,
    TensorType,
};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SPHERE_THETAS: [f64; 5] = [1.05, 1.25, 1.8, 1.95, 2.09];
const SPHERE_EPSILON_CAP: f64 = 0.45;

fn zoo() -> Vec<geofourier_core::ManifoldChart> {
    vec![
        geofourier_core::zoo::euclidean(2),
        geofourier_core::zoo::flat_torus(&[1.0, 1.0]),
        geofourier_core::zoo::sphere2(1.0),
        geofourier_core::zoo::poincare_disk(),
        geofourier_core::zoo::surface_of_revolution(1.0, 3.0),
    ]
}

/// Criterion 1: flat exactness. Identity on euclidean(2) with a Gaussian
/// bump recovers the point value to 1e-9 at N = 64 in under a second.
#[test]
fn criterion_01_flat_exactness() {
    let chart = geofourier_core::zoo::euclidean(2);
    let a = DifferentialOperator::identity(2, TensorType::scalar());
    let u = geofourier_core::sections::gaussian_bump(&[0.3, -0.4], 0.35, 1.0);
    let mut worst = 0.0f64;
    let mut worst_time = 0.0f64;
    for coords in [[0.25, -0.5], [0.0, 0.0], [0.4, 0.3]] {
        let x = ChartPoint::new(coords.to_vec());
        let start = Instant::now();
        let window = make_window(&chart, &x, 1.0).unwrap();
        let plan = QuadraturePlan::new(&chart, &x, &window, 64).unwrap();
        let got = invert(&chart, &a, &u, &x, &window, &plan, 64).unwrap();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        worst = worst.max((got.scalar_value() - u.eval(&x).scalar_value()).norm());
    }
    let pass = worst < 1e-9 && worst_time < 1.0;
    println!(
        "[criterion 01] flat exactness: {} (worst abs {worst:.2e}, {worst_time:.2} s/pt)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-9, "abs error {worst}");
    assert!(worst_time < 1.0, "runtime {worst_time} s");
}

/// Criterion 2: first-order formula on the flat torus at N = 64, steps =
/// 64, relative error below 1e-6 against 2 pi cos(2 pi x1).
///
/// Known red: the admissible compactly-supported cutoff profiles leave the
/// N = 64 quadrature at ~2e-5 relative (the window's spectral tail); the
/// same setup passes 1e-6 at N = 128. See the decisions ledger.
#[test]
fn criterion_02_first_order_torus() {
    let chart = geofourier_core::zoo::flat_torus(&[1.0, 1.0]);
    let a =
        DifferentialOperator::covariant_derivative_along(2, TensorType::scalar(), vec![1.0, 0.0]);
    let u = geofourier_core::sections::sin_wave(2, &[1.0, 0.0], 0.0);
    let mut worst_n64 = 0.0f64;
    let mut worst_n128 = 0.0f64;
    let mut worst_time = 0.0f64;
    for x1 in [0.0f64, 0.15, 0.4] {
        let x = ChartPoint::new(vec![x1, 0.5]);
        let oracle = std::f64::consts::TAU * (std::f64::consts::TAU * x1).cos();
        let window = make_window(&chart, &x, 10.0).unwrap();
        let start = Instant::now();
        let plan = QuadraturePlan::new(&chart, &x, &window, 64).unwrap();
        let got = invert(&chart, &a, &u, &x, &window, &plan, 64).unwrap();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        worst_n64 = worst_n64.max((got.scalar_value().re - oracle).abs() / oracle.abs());
        let plan = QuadraturePlan::new(&chart, &x, &window, 128).unwrap();
        let got = invert(&chart, &a, &u, &x, &window, &plan, 64).unwrap();
        worst_n128 = worst_n128.max((got.scalar_value().re - oracle).abs() / oracle.abs());
    }
    let pass = worst_n64 < 1e-6 && worst_time < 2.0;
    println!(
        "[criterion 02] first-order torus: {} (rel {worst_n64:.2e} at N=64, rel {worst_n128:.2e} at N=128, {worst_time:.2} s/pt)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst_time < 2.0, "runtime {worst_time} s");
    assert!(worst_n128 < 1e-6, "N=128 rel {worst_n128}");
    assert!(
        worst_n64 < 1e-6,
        "N=64 rel error {worst_n64:.3e}: the 1e-6 tolerance at N=64 is below the \
         spectral floor of every admissible cutoff profile (best found ~1.7e-5); \
         the identical setup reaches {worst_n128:.3e} at N=128"
    );
}

/// Criterion 3: the sphere Laplacian on the zonal harmonic at five base
/// points, relative error below 1e-3 at N = 64, steps = 256.
#[test]
fn criterion_03_sphere_laplacian() {
    let chart = geofourier_core::zoo::sphere2(1.0);
    let a = DifferentialOperator::laplace_beltrami(&chart);
    let u = geofourier_core::sections::cos_theta();
    let mut worst = 0.0f64;
    let mut worst_time = 0.0f64;
    for &theta in &SPHERE_THETAS {
        let x = ChartPoint::new(vec![theta, 0.8]);
        let start = Instant::now();
        let window = make_window(&chart, &x, SPHERE_EPSILON_CAP).unwrap();
        let plan = QuadraturePlan::new(&chart, &x, &window, 64).unwrap();
        let got = invert(&chart, &a, &u, &x, &window, &plan, 256).unwrap();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        let oracle = -2.0 * theta.cos();
        worst = worst.max((got.scalar_value().re - oracle).abs() / oracle.abs());
    }
    let pass = worst < 1e-3 && worst_time < 30.0;
    println!(
        "[criterion 03] sphere Laplacian eigenvalue: {} (worst rel {worst:.2e}, {worst_time:.2} s/pt)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-3, "worst rel {worst}");
    assert!(worst_time < 30.0, "runtime {worst_time} s");
}

/// Criterion 4, grid half: consecutive error ratios in the N-sweep
/// {32, 64, 128} at steps = 1024 exceed 10x (no curvature error plateau).
#[test]
fn criterion_04_grid_ratios() {
    let chart = geofourier_core::zoo::sphere2(1.0);
    let a = DifferentialOperator::laplace_beltrami(&chart);
    let u = geofourier_core::sections::cos_theta();
    let theta = 1.25f64;
    let x = ChartPoint::new(vec![theta, 0.8]);
    let oracle = -2.0 * theta.cos();
    let window = make_window(&chart, &x, SPHERE_EPSILON_CAP).unwrap();
    let mut errs = Vec::new();
    for n in [32usize, 64, 128] {
        let plan = QuadraturePlan::new(&chart, &x, &window, n).unwrap();
        let got = invert(&chart, &a, &u, &x, &window, &plan, 1024).unwrap();
        errs.push((got.scalar_value().re - oracle).abs());
    }
    let floor = 1e-11;
    let mut pass = true;
    let mut detail = String::new();
    for pair in errs.windows(2) {
        if pair[1] < floor {
            detail.push_str(" (hit floor)");
            break;
        }
        let ratio = pair[0] / pair[1];
        detail.push_str(&format!(" {ratio:.0}x"));
        pass &= ratio > 10.0;
    }
    println!(
        "[criterion 04a] N-sweep ratios: {} (errors {errs:?}, ratios{detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "ratios{detail} from errors {errs:?}");
}

/// Criterion 4, steps half: the error floor in the steps sweep at N = 128
/// scales as steps^-4 with observed order at least 3.5.
///
/// Known red: the geodesic-integrator contribution to the inverted value
/// sits at round-off (~1e-10) for every admissible configuration because
/// the smooth endpoint error field cancels in the symbol-weighted
/// quadrature; the sweep is flat at the spectral floor. The steps^-4 law
/// is verified where it is observable, at the geodesic endpoint level
/// (`rk4_order_against_closed_form_sphere_exp`). See the decisions ledger.
#[test]
fn criterion_04_steps_order() {
    let chart = geofourier_core::zoo::sphere2(1.0);
    let a = DifferentialOperator::laplace_beltrami(&chart);
    let u = geofourier_core::sections::cos_theta();
    let theta = 1.25f64;
    let x = ChartPoint::new(vec![theta, 0.8]);
    let oracle = -2.0 * theta.cos();
    let window = make_window(&chart, &x, SPHERE_EPSILON_CAP).unwrap();
    let plan = QuadraturePlan::new(&chart, &x, &window, 128).unwrap();
    let mut errs = Vec::new();
    for steps in [8usize, 16, 32, 64] {
        let got = invert(&chart, &a, &u, &x, &window, &plan, steps).unwrap();
        errs.push((got.scalar_value().re - oracle).abs());
    }
    let best_order = errs
        .windows(2)
        .map(|pair| observed_order(pair[0], pair[1]))
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = best_order >= 3.5;
    println!(
        "[criterion 04b] steps-sweep order: {} (errors {errs:?}, best observed order {best_order:.2})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        best_order >= 3.5,
        "best observed order {best_order:.3} across errors {errs:?}: the integrator \
         error component of the inverted value is ~1e-10 (cancellation of the smooth \
         RK4 error field in the quadrature), far below the N=128 spectral floor, so \
         no steps^-4 law can surface in this sweep"
    );
}

/// Criterion 5: geodesic-flow semigroup residual below 1e-8 on 50 seeded
/// samples per zoo manifold at steps = 512.
#[test]
fn criterion_05_flow_semigroup() {
    let mut worst_all = 0.0f64;
    for chart in zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let x = sample_point(&chart, &mut rng);
            let speed = (0.6 * chart.inj_radius_at(&x)).min(1.0);
            let eta = sample_direction(&chart, &x, speed, &mut rng);
            let t = rng.random_range(0.05..0.3);
            let s = rng.random_range(0.05..0.3);
            let r = geodesic_flow_compose_check(&chart, &x, &eta, t, s, 512).unwrap();
            worst = worst.max(r);
        }
        assert!(worst < 1e-8, "{}: worst {worst}", chart.name());
        worst_all = worst_all.max(worst);
    }
    println!("[criterion 05] flow semigroup: PASS (worst residual {worst_all:.2e})");
}

/// Criterion 6: the symmetrized derivative through the exponential map
/// agrees with stencil symmetrization to 1e-4 for p = 1, 2 on 20 seeded
/// samples per manifold.
#[test]
fn criterion_06_symmetrized_derivative() {
    let fd = FdSettings {
        h_nested: 2.5e-4,
        t_step: 2.5e-4,
        ..FdSettings::default()
    };
    let mut worst_all = 0.0f64;
    for chart in zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let u = random_trig_with_rng(&chart, TensorType::scalar(), 3, &mut rng);
            let x = sample_point(&chart, &mut rng);
            for p in [1usize, 2] {
                let etas: Vec<_> = (0..p)
                    .map(|_| sample_direction(&chart, &x, 1.0, &mut rng))
                    .collect();
                let via_exp =
                    symmetrized_derivative_via_exp(&chart, &u, &x, &etas, &fd, 64).unwrap();
                let via_stencil =
                    symmetrized_stencil_derivative(&chart, &u, &x, &etas, &fd).unwrap();
                worst = worst.max(via_exp.max_diff(&via_stencil));
            }
        }
        assert!(worst < 1e-4, "{}: worst {worst}", chart.name());
        worst_all = worst_all.max(worst);
    }
    println!("[criterion 06] symmetrized derivative identity: PASS (worst {worst_all:.2e})");
}

/// Criterion 7: transport preserves fiber norms to 1e-8 across tensor
/// types, and the octant holonomy of the sphere is a quarter turn to 1e-3.
#[test]
fn criterion_07_transport_isometry_and_holonomy() {
    let types = [
        TensorType::scalar(),
        TensorType::vector(),
        TensorType::covector(),
        TensorType::new(1, 1),
        TensorType::new(0, 2),
    ];
    let mut worst_all = 0.0f64;
    for chart in zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = chart.dim();
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = sample_point(&chart, &mut rng);
            let speed = (0.6 * chart.inj_radius_at(&x)).min(0.5);
            let eta = sample_direction(&chart, &x, speed, &mut rng);
            let path = exp_map(&chart, &x, &eta, 256).unwrap();
            let op = transport_along(&chart, &path).unwrap();
            for ttype in types {
                let comps: Vec<Complex64> = (0..ttype.fiber_dim(n))
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect();
                let v = FiberValue::new(
                    ttype,
                    ArrayD::from_shape_vec(IxDyn(&ttype.shape(n)), comps).unwrap(),
                )
                .unwrap();
                let w = apply_transport(&op, &v).unwrap();
                let n_src = fiber_norm(&chart, &op.source, &v).unwrap();
                let n_dst = fiber_norm(&chart, &op.target, &w).unwrap();
                worst = worst.max((n_src - n_dst).abs());
            }
        }
        assert!(worst < 1e-8, "{}: worst norm drift {worst}", chart.name());
        worst_all = worst_all.max(worst);
    }

    // octant holonomy, vertices rotated to a chart-safe latitude
    let chart = geofourier_core::zoo::sphere2(1.0);
    let angle = octant_holonomy_angle(&chart);
    let holonomy_err = (angle - std::f64::consts::FRAC_PI_2).abs();
    assert!(holonomy_err < 1e-3, "holonomy angle {angle}");
    println!(
        "[criterion 07] transport isometry + holonomy: PASS (worst drift {worst_all:.2e}, holonomy angle error {holonomy_err:.2e})"
    );
}

fn octant_holonomy_angle(chart: &geofourier_core::ManifoldChart) -> f64 {
    // orthonormal vertex triple with z = 1/sqrt(3)
    let s3 = 3.0f64.sqrt();
    let axis = [1.0 / s3, 1.0 / s3, 1.0 / s3];
    let to = [0.0, 0.0, 1.0];
    let cross = [
        axis[1] * to[2] - axis[2] * to[1],
        axis[2] * to[0] - axis[0] * to[2],
        axis[0] * to[1] - axis[1] * to[0],
    ];
    let c = axis[2];
    let s2: f64 = cross.iter().map(|v| v * v).sum();
    let vx = [
        [0.0, -cross[2], cross[1]],
        [cross[2], 0.0, -cross[0]],
        [-cross[1], cross[0], 0.0],
    ];
    let mut rot = [[0.0f64; 3]; 3];
    for (i, row) in rot.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (i, row) in rot.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let vx2: f64 = (0..3).map(|k| vx[i][k] * vx[k][j]).sum();
            *slot += vx[i][j] + vx2 * (1.0 - c) / s2;
        }
    }
    let verts: Vec<[f64; 3]> = (0..3)
        .map(|k| {
            let mut v = [0.0; 3];
            for i in 0..3 {
                v[i] = rot[i][k];
            }
            v
        })
        .collect();
    let chart_of = |p: &[f64; 3]| {
        ChartPoint::new(vec![
            p[2].clamp(-1.0, 1.0).acos(),
            p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU),
        ])
    };
    let tangent_to_chart = |x: &ChartPoint, w: &[f64; 3]| -> Vec<f64> {
        let (st, ct) = x.coords[0].sin_cos();
        let (sp, cp) = x.coords[1].sin_cos();
        let e_t = [ct * cp, ct * sp, -st];
        let e_p = [-st * sp, st * cp, 0.0];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        vec![dot(w, &e_t) / dot(&e_t, &e_t), dot(w, &e_p) / dot(&e_p, &e_p)]
    };
    let mut hol = nalgebra::DMatrix::identity(2, 2);
    for i in 0..3 {
        let from = verts[i];
        let to_v = verts[(i + 1) % 3];
        let x = chart_of(&from);
        let v_emb = to_v.map(|c| c * std::f64::consts::FRAC_PI_2);
        let v = tangent_to_chart(&x, &v_emb);
        let path = exp_map(chart, &x, &TangentVector::new(x.clone(), v), 512).unwrap();
        let op = transport_along(chart, &path).unwrap();
        hol = op.forward_matrix.clone() * hol;
    }
    let a_chart = chart_of(&verts[0]);
    let g = chart.metric_at(&a_chart).unwrap();
    let w0 = nalgebra::DVector::from_column_slice(&[0.7, -0.3]);
    let w1 = &hol * &w0;
    let pair = (w0.transpose() * &g * &w1)[(0, 0)];
    let n0 = (w0.transpose() * &g * &w0)[(0, 0)].sqrt();
    let n1 = (w1.transpose() * &g * &w1)[(0, 0)].sqrt();
    (pair / (n0 * n1)).clamp(-1.0, 1.0).acos()
}

/// Criterion 8: two admissible windows with different profiles and radii
/// agree within twice the larger individual oracle error on the sphere
/// Laplacian setup.
#[test]
fn criterion_08_chi_independence() {
    let chart = geofourier_core::zoo::sphere2(1.0);
    let a = DifferentialOperator::laplace_beltrami(&chart);
    let u = geofourier_core::sections::cos_theta();
    let mut worst_ratio = 0.0f64;
    for &theta in &SPHERE_THETAS {
        let x = ChartPoint::new(vec![theta, 0.8]);
        let oracle = -2.0 * theta.cos();
        let w1 = make_window(&chart, &x, SPHERE_EPSILON_CAP).unwrap();
        let w2 = CutoffWindow::classic(0.35);
        let p1 = QuadraturePlan::new(&chart, &x, &w1, 64).unwrap();
        let p2 = QuadraturePlan::new(&chart, &x, &w2, 64).unwrap();
        let v1 = invert(&chart, &a, &u, &x, &w1, &p1, 256).unwrap();
        let v2 = invert(&chart, &a, &u, &x, &w2, &p2, 256).unwrap();
        let e1 = (v1.scalar_value().re - oracle).abs();
        let e2 = (v2.scalar_value().re - oracle).abs();
        let diff = v1.max_diff(&v2);
        let bound = 2.0 * e1.max(e2);
        assert!(diff <= bound + 1e-14, "diff {diff} exceeds bound {bound}");
        worst_ratio = worst_ratio.max(diff / bound.max(1e-300));
    }
    println!(
        "[criterion 08] chi independence: PASS (worst diff/bound ratio {worst_ratio:.2})"
    );
}

/// Criterion 9: the order-3 breakdown demo shows a vanishing flat
/// discrepancy, a curvature gap persisting as the grid doubles, and an
/// order-2 control that still meets criterion 3.
#[test]
fn criterion_09_order_three_breakdown() {
    let config = ExperimentConfig::from_toml(
        r#"
id = "acceptance-breakdown"
seed = 42
tolerance = 1e-3

[manifold]
name = "sphere2"

[plan]
nodes = 64
steps = 256
epsilon_cap = 0.45

[breakdown]
flat_nodes = 320
curved_nodes = [128, 256]
flat_eta_scale = 0.5
"#,
    )
    .unwrap();
    let outcome = run_breakdown_demo(&config, 1e-3).unwrap();
    let flat = outcome
        .rows
        .iter()
        .find(|r| r.case == "p3-flat-control")
        .unwrap();
    assert!(
        flat.abs_error < 1e-6,
        "flat discrepancy {}",
        flat.abs_error
    );
    let sphere_rows: Vec<_> = outcome
        .rows
        .iter()
        .filter(|r| r.case == "p3-sphere")
        .collect();
    assert_eq!(sphere_rows.len(), 2);
    for row in &sphere_rows {
        assert!(
            row.abs_error > 1e-2,
            "sphere discrepancy {} at N={}",
            row.abs_error,
            row.nodes
        );
    }
    let control = outcome
        .rows
        .iter()
        .find(|r| r.case == "p2-control")
        .unwrap();
    assert!(control.rel_error < 1e-3, "control rel {}", control.rel_error);
    println!(
        "[criterion 09] order-3 breakdown: PASS (flat {:.2e}, sphere {:.3} -> {:.3}, control rel {:.2e})",
        flat.abs_error,
        sphere_rows[0].abs_error,
        sphere_rows[1].abs_error,
        control.rel_error
    );
}

/// Criterion 10: `verify` twice with identical config and seed produces
/// byte-identical CSV output, including under different worker counts.
#[test]
fn criterion_10_determinism() {
    let config_text = r#"
id = "acceptance-determinism"
seed = 42
# determinism is a byte-level property; keep the accuracy gate out of the way
tolerance = 1.0
base_points = [[1.05, 0.8], [1.25, 0.8]]

[manifold]
name = "sphere2"

[operator]
name = "laplace_beltrami"

[section]
name = "cos_theta"

[plan]
nodes = 32
steps = 64
epsilon_cap = 0.45
"#;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    std::fs::write(&config_path, config_text).unwrap();
    let mut outputs = Vec::new();
    for (label, threads) in [("a", "1"), ("b", "4"), ("c", "1")] {
        let out = dir.path().join(label);
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_geofourier"))
            .args([
                "verify",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(output.status.success(), "{output:?}");
        outputs.push(std::fs::read(out.join("acceptance-determinism_verify.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "different worker counts diverged");
    assert_eq!(outputs[0], outputs[2], "repeat run diverged");
    println!(
        "[criterion 10] determinism: PASS ({} identical bytes across runs and worker counts)",
        outputs[0].len()
    );
}
