mod common;

use einflow_core::geometry;
use einflow_core::spectral::{eigen_dense, eigen_smallest, EigenOptions, WeakLaplacian};
use einflow_core::{GridChart, MetricField, ScalarField};

#[test]
fn weak_laplacian_is_symmetric_and_kills_constants() {
    let chart = GridChart::cube(3, 10, 2.0).unwrap();
    let mut r = common::rng(3);
    let g = common::metric(&chart, &mut r, 1, 0.3);
    let lap = WeakLaplacian::new(&g);
    let f = common::trig(&chart, &mut r, 2, 1.0, 6);
    let u = common::trig(&chart, &mut r, 2, 1.0, 6);
    let kf = lap.stiffness(&f);
    let ku = lap.stiffness(&u);
    let a: f64 = kf.iter().zip(&u).map(|(x, y)| x * y).sum();
    let b: f64 = ku.iter().zip(&f).map(|(x, y)| x * y).sum();
    assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
    let c = lap.apply(&vec![1.0; chart.node_count()]);
    assert!(c.iter().all(|v| v.abs() < 1e-12));
    assert!(lap.energy(&f) > 0.0);
}

#[test]
fn weak_laplacian_converges_to_strong_form() {
    let mut errs = Vec::new();
    for n in [16, 32] {
        let chart = GridChart::cube(2, n, std::f64::consts::TAU).unwrap();
        let u = ScalarField::from_fn(&chart, |x| 0.2 * x[0].sin() * x[1].cos());
        let g = MetricField::conformally_flat(&u).unwrap();
        let f = ScalarField::from_fn(&chart, |x| (x[0] + 2.0 * x[1]).cos());
        let weak = WeakLaplacian::new(&g).apply(&f.values);
        let strong = geometry::laplacian(&g, &f).unwrap();
        errs.push(common::rel(&weak, &strong.values));
    }
    let rate = (errs[0] / errs[1]).log2();
    assert!(rate > 3.5, "{errs:?} rate {rate}");
}

#[test]
fn torus_spectrum_is_exact_multiples() {
    let l = 3.0;
    let chart = GridChart::cube(2, 12, l).unwrap();
    let g = MetricField::flat(&chart);
    let v = ScalarField::constant(&chart, 0.0);
    let opts = EigenOptions { count: 2, ..Default::default() };
    let res = eigen_smallest(&g, 1.0, &v, opts).unwrap();
    assert!(res.values[0].abs() < 1e-10);
    let dense = eigen_dense(&g, 1.0, &v, 6).unwrap();
    assert!((res.values[1] - dense[1]).abs() < 1e-9, "{:?} {:?}", res.values, dense);
    let k = std::f64::consts::TAU / l;
    assert!((dense[1] - k * k).abs() / (k * k) < 1e-3);
}

#[test]
fn lanczos_matches_dense_on_curved_metric() {
    let chart = GridChart::cube(3, 8, 2.0).unwrap();
    let mut r = common::rng(11);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let v = ScalarField::new(chart.clone(), common::trig(&chart, &mut r, 1, 2.0, 5)).unwrap();
    let res = eigen_smallest(&g, 4.0, &v, EigenOptions { count: 3, ..Default::default() }).unwrap();
    let dense = eigen_dense(&g, 4.0, &v, 3).unwrap();
    for (a, b) in res.values.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} {b}");
    }
    assert!(res.residuals.iter().all(|r| *r < 1e-9));
}
