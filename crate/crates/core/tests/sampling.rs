mod common;

use std::sync::Arc;

use geomext_core::fitting::GaugeFit;
use geomext_core::sampling::{
    estimate_probability, probability_from_points, sample_exceedances, sample_truncated_gamma, AngularSampler, ExtremalRegion,
    McmcSampler, Proposal,
};
use geomext_core::threshold::ConstantThreshold;
use geomext_core::{ExceedanceSample, FitConfig, FitMode, FittedModel, PwlGauge, SimplexMesh};

fn flat_gauge() -> PwlGauge {
    let mesh = Arc::new(SimplexMesh::delaunay(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
    PwlGauge::new(mesh, vec![1.0, 1.0]).unwrap()
}

fn uniform_chain(g: &PwlGauge) -> AngularSampler {
    AngularSampler::Mcmc(McmcSampler { gauge: g.clone(), proposal: Proposal::Uniform, burn_in: 100, thin: 1 })
}

fn model_for(g: &PwlGauge, sample: ExceedanceSample) -> FittedModel {
    let fit = GaugeFit { gauge: g.clone(), objective: 0.0, initial_objective: 0.0, evals: 0, converged: true, bounding: None };
    FittedModel {
        setup: None,
        config: FitConfig::new(FitMode::Radial, false).unwrap(),
        radial: Some(fit),
        angular: None,
        threshold: None,
        exceedances: sample,
    }
}

fn toy_sample(n_total: usize) -> ExceedanceSample {
    let dirs: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 + 0.5) / 10.0, 1.0 - (i as f64 + 0.5) / 10.0]).collect();
    ExceedanceSample::new(2, vec![3.0; 10], dirs, vec![2.0; 10], n_total).unwrap()
}

#[test]
fn untruncated_mean() {
    let n = 100_000;
    let xs = sample_truncated_gamma(3, 2.0, 0.0, n, &mut common::rng(1)).unwrap();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = (0.75f64 / n as f64).sqrt();
    assert!((mean - 1.5).abs() < 4.0 * se);
}

#[test]
fn truncated_mean_and_cdf() {
    let n = 100_000;
    let xs = sample_truncated_gamma(2, 1.0, 5.0, n, &mut common::rng(2)).unwrap();
    assert!(xs.iter().all(|&x| x > 5.0));
    let s0 = common::erlang_sf(5.0, 2, 1.0);
    let dens = |r: f64| common::erlang_pdf(r, 2, 1.0) / s0;
    let m1 = common::simpson(|r| r * dens(r), 5.0, 80.0, 20_000);
    let m2 = common::simpson(|r| r * r * dens(r), 5.0, 80.0, 20_000);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = ((m2 - m1 * m1) / n as f64).sqrt();
    assert!((mean - m1).abs() < 4.0 * se, "{mean} vs {m1}");
    let d = common::ks(xs, |r| 1.0 - common::erlang_sf(r, 2, 1.0) / s0);
    assert!(d <= 1.63 / (n as f64).sqrt());
}

#[test]
fn flat_target_accepts_everything() {
    let g = flat_gauge();
    let draws = uniform_chain(&g).sample_angles(20_000, &mut common::rng(3)).unwrap();
    assert_eq!(draws.acceptance_rate, Some(1.0));
    let xs: Vec<f64> = draws.directions.iter().map(|w| w[0]).collect();
    assert!(common::ks(xs, |x| x) <= 1.63 / (20_000f64).sqrt());
}

#[test]
fn simulated_points_exceed_threshold() {
    let g = flat_gauge();
    let thr = ConstantThreshold(2.0);
    let sim = sample_exceedances(&g, &thr, &uniform_chain(&g), 5000, &mut common::rng(4)).unwrap();
    for i in 0..sim.points.len() {
        let x = &sim.points[i];
        let r: f64 = x.iter().sum();
        assert!(r > 2.0);
        for j in 0..2 {
            assert!((x[j] / r - sim.directions[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn empirical_resampling_reuses_thresholds() {
    let g = flat_gauge();
    let sample = toy_sample(200);
    let sim = sample_exceedances(&g, &ConstantThreshold(100.0), &AngularSampler::empirical(&sample), 500, &mut common::rng(5)).unwrap();
    assert!(sim.thresholds.iter().all(|&t| t == 2.0));
    assert!(sim.directions.iter().all(|w| sample.directions().contains(w)));
}

#[test]
fn whole_region_and_additivity() {
    let g = flat_gauge();
    let model = model_for(&g, toy_sample(200));
    let thr = ConstantThreshold(2.0);
    let all = ExtremalRegion::new(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY]).unwrap();
    let est = estimate_probability(&model, &thr, &uniform_chain(&g), &all, 4000, &mut common::rng(6)).unwrap();
    assert_eq!(est.hits, 4000);
    assert!((est.estimate - 10.0 / 200.0).abs() < 1e-15);

    let sim = sample_exceedances(&g, &thr, &uniform_chain(&g), 20_000, &mut common::rng(7)).unwrap();
    let a = ExtremalRegion::new(vec![1.0, 1.0], vec![2.0, f64::INFINITY]).unwrap();
    let b = ExtremalRegion::new(vec![2.0 + 1e-9, 1.0], vec![5.0, f64::INFINITY]).unwrap();
    let ab = ExtremalRegion::new(vec![1.0, 1.0], vec![5.0, f64::INFINITY]).unwrap();
    let pa = probability_from_points(&sim.points, &a, 0.05);
    let pb = probability_from_points(&sim.points, &b, 0.05);
    let pab = probability_from_points(&sim.points, &ab, 0.05);
    assert!(pa.hits > 0 && pb.hits > 0);
    assert_eq!(pa.hits + pb.hits, pab.hits);
    assert!((pa.estimate + pb.estimate - pab.estimate).abs() < 1e-15);
}

#[test]
fn seeded_streams_repeat() {
    let g = flat_gauge();
    let thr = ConstantThreshold(2.0);
    let a = sample_exceedances(&g, &thr, &uniform_chain(&g), 1000, &mut common::rng(8)).unwrap();
    let b = sample_exceedances(&g, &thr, &uniform_chain(&g), 1000, &mut common::rng(8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimator_is_unbiased() {
    let g = flat_gauge();
    let sample = toy_sample(10);
    let model = model_for(&g, sample);
    let thr = ConstantThreshold(2.0);
    let region = ExtremalRegion::new(vec![2.5, 1.5], vec![f64::INFINITY, f64::INFINITY]).unwrap();
    let s0 = common::erlang_sf(2.0, 2, 1.0);
    let truth = common::simpson(
        |w| {
            let t = (2.5 / w).max(1.5 / (1.0 - w)).max(2.0);
            if t.is_finite() {
                common::erlang_sf(t, 2, 1.0) / s0
            } else {
                0.0
            }
        },
        1e-12,
        1.0 - 1e-12,
        200_000,
    );
    let mut rng = common::rng(9);
    let ests: Vec<f64> = (0..100)
        .map(|_| estimate_probability(&model, &thr, &uniform_chain(&g), &region, 5000, &mut rng).unwrap().estimate)
        .collect();
    let mean = ests.iter().sum::<f64>() / 100.0;
    let sd = (ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    assert!((mean - truth).abs() < 3.0 * sd / 10.0, "{mean} vs {truth}");
}

#[test]
fn region_validation() {
    let thr = ConstantThreshold(5.0);
    let far = ExtremalRegion::new(vec![10.0, 10.0], vec![12.0, 12.0]).unwrap();
    assert!(far.validate(&thr, geomext_core::data::Margin::Exponential).is_ok());
    let near = ExtremalRegion::new(vec![1.0, 1.0], vec![12.0, 12.0]).unwrap();
    assert!(near.validate(&thr, geomext_core::data::Margin::Exponential).is_err());
}
