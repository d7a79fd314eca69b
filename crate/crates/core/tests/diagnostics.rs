mod common;

use std::sync::Arc;

use geomext_core::data::{polar_all, simulate, CopulaSpec, Margin};
use geomext_core::diagnostics::{angle_grid, chi_empirical, chi_u0, export_limit_set, fraction_beyond, pit_values, pp_qq_data, return_curve};
use geomext_core::sampling::sample_truncated_gamma;
use geomext_core::special::gamma_quantile;
use geomext_core::threshold::ConstantThreshold;
use geomext_core::{Domain, ExceedanceSample, Gauge, ParametricGauge, PwlGauge, Result, SimplexMesh, ThresholdModel, ThresholdParams};
use rand::Rng;

fn flat_gauge() -> PwlGauge {
    let mesh = Arc::new(SimplexMesh::delaunay(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
    PwlGauge::new(mesh, vec![1.0, 1.0]).unwrap()
}

#[test]
fn pit_is_uniform_on_model_data() {
    let mesh = Arc::new(SimplexMesh::regular(2, 7).unwrap());
    let g = PwlGauge::interpolate(mesh, &ParametricGauge::logistic(2, 0.5).unwrap()).unwrap();
    let mut rng = common::rng(1);
    let n = 4000;
    let (mut radii, mut dirs, mut thr) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let w = common::uniform_simplex(2, &mut rng);
        let rate = g.eval(&w).unwrap();
        let r0 = gamma_quantile(0.9, 2, rate).unwrap();
        radii.push(sample_truncated_gamma(2, rate, r0, 1, &mut rng).unwrap()[0]);
        dirs.push(w);
        thr.push(r0);
    }
    let s = ExceedanceSample::new(2, radii, dirs, thr, 10 * n).unwrap();
    let u = pit_values(&g, &s).unwrap();
    assert!(common::ks(u, |x| x) <= 1.36 / (n as f64).sqrt());
    let rows = pp_qq_data(&g, &s).unwrap();
    assert_eq!(rows.len(), n);
    assert!(rows.windows(2).all(|w| w[1].empirical_p >= w[0].empirical_p && w[1].model_q > w[0].model_q));
}

#[test]
fn pit_at_the_threshold_is_zero() {
    let s = ExceedanceSample::new(2, vec![3.0 + 1e-9], vec![vec![0.5, 0.5]], vec![3.0], 1).unwrap();
    assert!(pit_values(&flat_gauge(), &s).unwrap()[0] < 1e-8);
}

#[test]
fn constant_gauge_return_curve() {
    let g = flat_gauge();
    let dirs = angle_grid(Domain::Simplex, 2, 11).unwrap();
    let curve = return_curve(&g, 0.95, 20.0, &dirs).unwrap();
    let want = common::bisect(|r| 0.05 - common::erlang_sf(r, 2, 1.0), 0.0, 50.0);
    assert!(curve.points.iter().all(|p| (p.radius - want).abs() < 1e-8));
    assert!(return_curve(&g, 0.95, 19.0, &dirs).is_err());

    let pg = ParametricGauge::logistic(2, 0.4).unwrap();
    let a = return_curve(&pg, 0.95, 50.0, &dirs).unwrap();
    let b = return_curve(&pg, 0.95, 100.0, &dirs).unwrap();
    assert!(a.points.iter().zip(&b.points).all(|(p, q)| q.radius >= p.radius));
}

#[test]
fn return_period_calibration() {
    let g = PwlGauge::interpolate(Arc::new(SimplexMesh::regular(2, 7).unwrap()), &ParametricGauge::logistic(2, 0.5).unwrap()).unwrap();
    let mut rng = common::rng(2);
    let n = 50_000;
    let (mut radii, mut dirs) = (vec![], vec![]);
    for _ in 0..n {
        let w = common::uniform_simplex(2, &mut rng);
        radii.push(sample_truncated_gamma(2, g.eval(&w).unwrap(), 0.0, 1, &mut rng).unwrap()[0]);
        dirs.push(w);
    }
    for t in [50.0, 100.0, 1000.0] {
        let f = fraction_beyond(&g, 0.95, t, &radii, &dirs).unwrap();
        let se = (1.0 / t * (1.0 - 1.0 / t) / n as f64).sqrt();
        assert!((f - 1.0 / t).abs() <= 3.0 * se, "T={t}: {f}");
    }
}

#[test]
fn chi_limits() {
    let mut rng = common::rng(3);
    let n = 200_000;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()).collect();
    let single = chi_empirical(&rows, &[1], &[0.9, 0.99], Margin::Exponential).unwrap();
    assert!(single.iter().all(|c| (c - 1.0).abs() < 0.05));
    let pair = chi_empirical(&rows, &[0, 1], &[0.5, 0.8], Margin::Exponential).unwrap();
    for (c, u) in pair.iter().zip([0.5, 0.8]) {
        let se = ((1.0 - u) * (1.0 - u) * (1.0 - (1.0 - u) * (1.0 - u)) / n as f64).sqrt() / (1.0 - u);
        assert!((c - (1.0 - u)).abs() < 4.0 * se, "{c} at {u}");
    }
}

#[test]
fn minimum_level_keeps_region_beyond_threshold() {
    let u0 = chi_u0(&ConstantThreshold(5.0), Domain::Simplex, 2, &[0, 1], Margin::Exponential).unwrap();
    assert!((u0 - (1.0 - (-2.5f64).exp())).abs() < 1e-12);

    let rows = simulate(&CopulaSpec::benchmark(1).unwrap(), Margin::Exponential, 3000, &mut common::rng(4)).unwrap();
    let (radii, dirs) = polar_all(&rows, Margin::Exponential).unwrap();
    let m = ThresholdModel::new(ThresholdParams::default(), 2, &radii, &dirs).unwrap();
    let u0 = chi_u0(&m, Domain::Simplex, 2, &[0, 1], Margin::Exponential).unwrap();
    let level = -(1.0 - (u0 + 1e-4)).ln();
    // boundary of the joint exceedance region
    for i in 0..=400 {
        let t = level + 20.0 * i as f64 / 400.0;
        for x in [[level, t], [t, level]] {
            let r = x[0] + x[1];
            assert!(r > m.quantile(&[x[0] / r, x[1] / r]).unwrap());
        }
    }
}

#[test]
fn bounded_export_touches_box() {
    let mesh = Arc::new(SimplexMesh::regular(2, 11).unwrap());
    let theta = mesh.nodes().iter().map(|w| 1.0 / w[0].max(w[1])).collect();
    let g = PwlGauge::new(mesh, theta).unwrap();
    let surf = export_limit_set(&g, Domain::Simplex, 201, 50).unwrap();
    assert_eq!(surf.len(), 1);
    for j in 0..2 {
        let m = surf[0].rows.iter().map(|p| p.radius * p.direction[j]).fold(0.0, f64::max);
        assert!((m - 1.0).abs() < 1e-2);
    }
}

struct FlatInLast;

impl Gauge for FlatInLast {
    fn dim(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(2.0 * x[0].max(x[1]).max(x[2]) + 0.5 * (x[0] + x[1] + x[2]) + 0.0 * x[3])
    }
}

#[test]
fn four_dimensional_export() {
    let surf = export_limit_set(&FlatInLast, Domain::Simplex, 200, 50).unwrap();
    assert_eq!(surf.len(), 4);
    let last = surf.iter().find(|s| s.dropped == vec![3]).unwrap();
    for p in &last.rows {
        let w = &p.direction;
        let direct = FlatInLast.eval(&[w[0], w[1], w[2], 0.0]).unwrap();
        assert!((p.radius - 1.0 / direct).abs() < 1e-12);
    }
    let fine = export_limit_set(&FlatInLast, Domain::Simplex, 200, 100).unwrap();
    for (a, b) in surf.iter().zip(&fine) {
        // the gauge vanishes along the fourth axis
        for (p, q) in a.rows.iter().zip(&b.rows).filter(|(p, _)| p.radius.is_finite()) {
            assert!((p.radius - q.radius).abs() < 1e-2);
        }
    }
}
