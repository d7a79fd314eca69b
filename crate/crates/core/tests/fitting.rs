mod common;

use std::sync::Arc;

use geomext_core::fitting::{bound, box_gap, fit_gauge, gradient_penalty, nll_angular, nll_radial, GaugeFit};
use geomext_core::gauge::exchangeable_correlation;
use geomext_core::sampling::sample_truncated_gamma;
use geomext_core::special::gamma_quantile;
use geomext_core::{ExceedanceSample, FitConfig, FitMode, FittedModel, Gauge, ParametricGauge, PwlGauge, Setup, SimplexMesh};
use rand::Rng;

fn flat_gauge() -> PwlGauge {
    let mesh = Arc::new(SimplexMesh::delaunay(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
    PwlGauge::new(mesh, vec![1.0, 1.0]).unwrap()
}

/// Exceedances of the median threshold drawn from the truncated gamma model
/// with uniform directions.
fn synthetic(gauge: &PwlGauge, n: usize, seed: u64) -> ExceedanceSample {
    let mut rng = common::rng(seed);
    let d = gauge.dim();
    let mut radii = Vec::with_capacity(n);
    let mut dirs = Vec::with_capacity(n);
    let mut thr = Vec::with_capacity(n);
    for _ in 0..n {
        let w = common::uniform_simplex(d, &mut rng);
        let g = gauge.eval(&w).unwrap();
        let r0 = gamma_quantile(0.5, d, g).unwrap();
        radii.push(sample_truncated_gamma(d, g, r0, 1, &mut rng).unwrap()[0]);
        dirs.push(w);
        thr.push(r0);
    }
    ExceedanceSample::new(d, radii, dirs, thr, 2 * n).unwrap()
}

#[test]
fn single_untruncated_point() {
    let s = ExceedanceSample::new(2, vec![3.0], vec![vec![0.5, 0.5]], vec![0.0], 1).unwrap();
    let v = nll_radial(&flat_gauge(), &s).unwrap();
    assert!((v - (3.0 - 3f64.ln())).abs() < 1e-12);
}

#[test]
fn toy_radial_likelihood() {
    let mesh = Arc::new(SimplexMesh::regular(2, 5).unwrap());
    let g = PwlGauge::new(mesh, vec![0.9, 0.7, 0.6, 0.75, 1.0]).unwrap();
    let radii = vec![4.0, 6.5, 3.2, 9.0, 5.5];
    let dirs = vec![vec![0.1, 0.9], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.62, 0.38], vec![0.97, 0.03]];
    let thr = vec![3.0, 0.0, 2.5, 7.0, 5.0];
    let s = ExceedanceSample::new(2, radii.clone(), dirs.clone(), thr.clone(), 100).unwrap();
    let mut want = 0.0;
    for i in 0..5 {
        let rate = g.eval(&dirs[i]).unwrap();
        want -= (common::erlang_pdf(radii[i], 2, rate) / common::erlang_sf(thr[i], 2, rate)).ln();
    }
    assert!((nll_radial(&g, &s).unwrap() - want).abs() < 1e-10);
    // with no truncation the plain gamma likelihood remains
    let s0 = ExceedanceSample::new(2, radii.clone(), dirs.clone(), vec![0.0; 5], 100).unwrap();
    let plain: f64 = (0..5).map(|i| -common::erlang_pdf(radii[i], 2, g.eval(&dirs[i]).unwrap()).ln()).sum();
    assert!((nll_radial(&g, &s0).unwrap() - plain).abs() < 1e-10);
}

#[test]
fn angular_likelihood() {
    let s = ExceedanceSample::new(2, vec![1.0, 2.0, 3.0], vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.8, 0.2]], vec![0.0; 3], 3).unwrap();
    assert!(nll_angular(&flat_gauge(), &s).unwrap().abs() < 1e-12);

    let mesh = Arc::new(SimplexMesh::regular(3, 3).unwrap());
    let theta: Vec<f64> = (0..mesh.n_nodes()).map(|k| 0.5 + 0.05 * k as f64).collect();
    let g = PwlGauge::new(mesh.clone(), theta.clone()).unwrap();
    let scaled = g.with_theta(theta.iter().map(|t| 3.7 * t).collect()).unwrap();
    let dirs = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![0.1, 0.1, 0.8]];
    let s = ExceedanceSample::new(3, vec![1.0; 3], dirs.clone(), vec![0.0; 3], 3).unwrap();
    let a = nll_angular(&g, &s).unwrap();
    assert!((a - nll_angular(&scaled, &s).unwrap()).abs() < 1e-10);
    let want: f64 = dirs.iter().map(|w| 3.0 * g.eval(w).unwrap().ln() + (3.0 * g.volume()).ln()).sum();
    assert!((a - want).abs() < 1e-10);
}

#[test]
fn penalty_values() {
    let mesh = Arc::new(SimplexMesh::regular(3, 4).unwrap());
    let plane: Vec<f64> = mesh.nodes().iter().map(|w| 1.0 / (1.0 * w[0] + 2.0 * w[1] + 1.5 * w[2])).collect();
    let g = PwlGauge::new(mesh.clone(), plane.clone()).unwrap();
    assert!(gradient_penalty(&g) < 1e-24);
    let mut bumped = plane;
    bumped[5] *= 2.0;
    assert!(gradient_penalty(&g.with_theta(bumped).unwrap()) > 1e-3);
}

#[test]
fn config_rules() {
    assert!(FitConfig::new(FitMode::Angular, true).is_err());
    assert!(FitConfig::new(FitMode::Radial, false).unwrap().with_lambda(-1.0).is_err());
    assert_eq!("ss4".parse::<Setup>().unwrap(), Setup::SS4);
    assert_eq!(FitConfig::new(FitMode::Joint, true).unwrap().ss_label(false), Some(Setup::SS6));
}

#[test]
fn fit_improves_objective_and_recovers_gauge() {
    let mesh = Arc::new(SimplexMesh::regular(2, 5).unwrap());
    let truth = PwlGauge::interpolate(mesh.clone(), &ParametricGauge::logistic(2, 0.6).unwrap()).unwrap();
    let sample = synthetic(&truth, 5000, 1);
    let cfg = FitConfig::new(FitMode::Radial, false).unwrap().with_lambda(0.0).unwrap();
    let fit = fit_gauge(&cfg, &sample, mesh.clone(), &vec![0.5; 5]).unwrap();
    assert!(fit.objective < fit.initial_objective);
    for (a, b) in fit.gauge.theta().iter().zip(truth.theta()) {
        assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
    }
}

#[test]
fn bounding_an_already_bounded_model() {
    let mesh = Arc::new(SimplexMesh::regular(2, 5).unwrap());
    let theta: Vec<f64> = mesh.nodes().iter().map(|w| 1.0 / w[0].max(w[1])).collect();
    let g = PwlGauge::new(mesh, theta.clone()).unwrap();
    let sample = synthetic(&g, 200, 2);
    let fit = GaugeFit { gauge: g, objective: 0.0, initial_objective: 0.0, evals: 0, converged: true, bounding: None };
    let model = FittedModel {
        setup: Some(Setup::SS1),
        config: FitConfig::new(FitMode::Radial, false).unwrap(),
        radial: Some(fit),
        angular: None,
        threshold: None,
        exceedances: sample,
    };
    let out = bound(&model).unwrap();
    let report = out.radial.as_ref().unwrap().bounding.clone().unwrap();
    assert_eq!(report.iterations, 0);
    assert_eq!(out.radial_gauge().unwrap().theta(), theta.as_slice());
    assert_eq!(out.setup, Some(Setup::SS2));
}

#[test]
fn bounding_touches_the_box() {
    let mesh = Arc::new(SimplexMesh::regular(2, 11).unwrap());
    let pg = ParametricGauge::gaussian(2, &exchangeable_correlation(2, 0.8)).unwrap();
    let truth = PwlGauge::interpolate(mesh.clone(), &pg).unwrap();
    let sample = synthetic(&truth, 2000, 3);
    // start from a gauge that leaves the box
    let init: Vec<f64> = truth.theta().iter().map(|t| 1.3 * t).collect();
    let cfg = FitConfig::new(FitMode::Radial, true).unwrap();
    let fit = fit_gauge(&cfg, &sample, mesh.clone(), &init).unwrap();
    assert!(box_gap(&fit.gauge) <= 1e-6, "{}", box_gap(&fit.gauge));
    let report = fit.bounding.unwrap();
    assert!(report.frozen_sizes.windows(2).all(|w| w[1] > w[0]));
    let mut rng = common::rng(4);
    for _ in 0..1000 {
        let x = [rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0];
        assert!(fit.gauge.eval(&x).unwrap() >= x[0].max(x[1]) - 1e-9);
    }
}
