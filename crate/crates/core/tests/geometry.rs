mod common;

use einflow_core::field::sym_index;
use einflow_core::geometry as geo;
use einflow_core::spectral::{eigen_smallest, EigenOptions};
use einflow_core::{FdOrder, GridChart, MetricField, OneFormField, ScalarField, SymTensorField};
use proptest::prelude::*;

const TAU: f64 = std::f64::consts::TAU;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[test]
fn flat_and_scaled_flat_metrics_have_no_curvature() {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    for c in [1.0, 2.5] {
        let g = MetricField::flat(&chart).scaled(c).unwrap();
        let pack = geo::curvature(&g);
        assert!(pack.riemann.flat_norm() < 1e-12);
        assert!(pack.ricci.max_abs() < 1e-12);
        assert!(max_abs(&pack.scal.values) < 1e-12);
    }
}

/// `g = e^{2u} delta` on `T^2` with `u = 0.1 sin x`: `scal = -2 e^{-2u} (u_xx + u_yy)`.
fn conformal_scal_error(n: usize) -> f64 {
    let chart = GridChart::cube(2, n, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let u = ScalarField::from_fn(&chart, |x| 0.1 * x[0].sin());
    let g = MetricField::conformally_flat(&u).unwrap();
    let exact = ScalarField::from_fn(&chart, |x| 2.0 * (-0.2 * x[0].sin()).exp() * 0.1 * x[0].sin());
    max_abs(&diff(&geo::scalar_curvature(&g).values, &exact.values))
}

#[test]
fn conformal_scalar_curvature_converges_at_stencil_order() {
    let (e1, e2) = (conformal_scal_error(16), conformal_scal_error(32));
    assert!(e2 < 1e-6, "{e1} {e2}");
    assert!((e1 / e2).log2() > 6.0, "{e1} {e2}");
}

#[test]
fn laplacian_sign_and_closed_forms() {
    let chart = GridChart::new(vec![16, 12], vec![3.0, TAU], FdOrder::Eighth).unwrap();
    let g = MetricField::flat(&chart);
    assert!(max_abs(&geo::laplacian(&g, &ScalarField::constant(&chart, 4.0)).unwrap().values) < 1e-12);
    let k = TAU / 3.0;
    let f = ScalarField::from_fn(&chart, |x| (k * x[0]).sin());
    let lf = geo::laplacian(&g, &f).unwrap();
    let exact: Vec<f64> = f.values.iter().map(|v| k * k * v).collect();
    assert!(max_abs(&diff(&lf.values, &exact)) < 1e-5);

    // Conformal: Delta_g f = e^{-2u} (Delta_0 f - (n - 2) <du, df>).
    let chart = GridChart::cube(3, 24, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let u = ScalarField::from_fn(&chart, |x| 0.1 * (x[0].sin() + x[1].cos() * x[2].sin()));
    let g = MetricField::conformally_flat(&u).unwrap();
    let f = ScalarField::from_fn(&chart, |x| (x[0] + 2.0 * x[2]).cos());
    let flat = MetricField::flat(&chart);
    let l0 = geo::laplacian(&flat, &f).unwrap();
    let (du, df) = (geo::differential(&u), geo::differential(&f));
    let exact: Vec<f64> = (0..chart.node_count())
        .map(|k| {
            let dot: f64 = (0..3).map(|a| du.comps[a][k] * df.comps[a][k]).sum();
            (-2.0 * u.values[k]).exp() * (l0.values[k] - dot)
        })
        .collect();
    assert!(max_abs(&diff(&geo::laplacian(&g, &f).unwrap().values, &exact)) < 1e-6);
}

#[test]
fn divergence_adjointness_and_gauge_conventions() {
    let chart = GridChart::cube(3, 24, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let mut r = common::rng(21);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    assert_eq!(geo::adjoint_divergence(&g, &OneFormField::zeros(&chart)).unwrap().max_abs(), 0.0);
    for _ in 0..3 {
        let h = common::sym(&chart, &mut r, 2, 1.0);
        let w = common::form(&chart, &mut r, 2, 1.0);
        let lhs = geo::l2_inner_form(&g, &geo::divergence(&g, &h).unwrap(), &w).unwrap();
        let rhs = geo::l2_inner_sym(&g, &h, &geo::adjoint_divergence(&g, &w).unwrap()).unwrap();
        let scale = geo::l2_norm_sym(&g, &h).unwrap() * geo::l2_norm_form(&g, &w).unwrap();
        assert!((lhs - rhs).abs() <= 1e-6 * scale, "{}", (lhs - rhs).abs() / scale);
    }
    // Flat: delta^* w = (d_i w_j + d_j w_i) / 2 and delta(Hess phi) = d(Delta phi).
    let flat = MetricField::flat(&chart);
    let w = common::form(&chart, &mut r, 1, 1.0);
    let sw = geo::adjoint_divergence(&flat, &w).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let di_wj = chart.d1(i, &w.comps[j]);
            let dj_wi = chart.d1(j, &w.comps[i]);
            let expect: Vec<f64> = di_wj.iter().zip(&dj_wi).map(|(a, b)| 0.5 * (a + b)).collect();
            assert!(max_abs(&diff(sw.get(i, j), &expect)) < 1e-12);
        }
    }
    let phi = common::scalar(&chart, &mut r, 1, 1.0);
    let div_hess = geo::divergence(&flat, &geo::hessian(&flat, &phi).unwrap()).unwrap();
    let d_lap = geo::differential(&geo::laplacian(&flat, &phi).unwrap());
    for a in 0..3 {
        assert!(max_abs(&diff(&div_hess.comps[a], &d_lap.comps[a])) < 1e-6);
    }
}

#[test]
fn curvature_action_identities() {
    let chart = GridChart::cube(3, 12, TAU).unwrap();
    let mut r = common::rng(5);
    let h = common::sym(&chart, &mut r, 1, 1.0);
    assert!(geo::curvature_action(&MetricField::flat(&chart), &h).unwrap().max_abs() < 1e-12);
    let u = common::scalar(&chart, &mut r, 1, 0.2);
    let g = MetricField::conformally_flat(&u).unwrap();
    let rg = geo::curvature_action(&g, g.tensor()).unwrap();
    let ric = geo::ricci(&g);
    assert!(rg.axpy(-1.0, &ric).unwrap().max_abs() < 1e-12 * ric.max_abs().max(1.0));
    let k = common::sym(&chart, &mut r, 1, 1.0);
    let a = geo::pointwise_inner_sym(&g, &geo::curvature_action(&g, &h).unwrap(), &k).unwrap();
    let b = geo::pointwise_inner_sym(&g, &h, &geo::curvature_action(&g, &k).unwrap()).unwrap();
    assert!(max_abs(&diff(&a.values, &b.values)) < 1e-12);
}

#[test]
fn lichnerowicz_and_einstein_operators() {
    let chart = GridChart::cube(3, 12, TAU).unwrap();
    let mut r = common::rng(6);
    let h = common::sym(&chart, &mut r, 1, 1.0);
    let flat = MetricField::flat(&chart);
    let rough = geo::rough_laplacian(&flat, &h).unwrap();
    assert!(geo::lichnerowicz(&flat, &h).unwrap().axpy(-1.0, &rough).unwrap().max_abs() < 1e-12);
    assert!(geo::einstein_operator(&flat, &h).unwrap().axpy(-1.0, &rough).unwrap().max_abs() < 1e-12);
    // Delta_L - Delta_E = Ric o h + h o Ric on any background.
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let gap = geo::lichnerowicz(&g, &h).unwrap().axpy(-1.0, &geo::einstein_operator(&g, &h).unwrap()).unwrap();
    let ric = geo::ricci(&g);
    let n = 3;
    for node in [0, 17, 400] {
        let (gm, rm, hm) = (g.tensor().matrix_at(node), ric.matrix_at(node), h.matrix_at(node));
        let gi = gm.clone().try_inverse().unwrap();
        let expect = &rm * &gi * &hm + &hm * &gi * &rm;
        for i in 0..n {
            for j in i..n {
                assert!((gap.comps[sym_index(n, i, j)][node] - expect[(i, j)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn trace_of_lichnerowicz_converges_to_laplacian_of_trace() {
    let mut errs = Vec::new();
    for n in [16, 24] {
        let chart = GridChart::cube(3, n, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
        let mut r = common::rng(9);
        let g = common::metric(&chart, &mut r, 1, 0.1);
        let h = common::sym(&chart, &mut r, 1, 1.0);
        let a = geo::trace(&g, &geo::lichnerowicz(&g, &h).unwrap()).unwrap();
        let b = geo::laplacian(&g, &geo::trace(&g, &h).unwrap()).unwrap();
        errs.push(max_abs(&diff(&a.values, &b.values)) / max_abs(&b.values));
    }
    assert!(errs[1] < 1e-5, "{errs:?}");
    assert!(errs[0] / errs[1] > 1.5f64.powi(6), "{errs:?}");
}

#[test]
fn hodge_laplacian_examples() {
    let chart = GridChart::cube(3, 24, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let flat = MetricField::flat(&chart);
    let mut r = common::rng(12);
    let c = OneFormField::from_fn(&chart, |i, _| 1.0 + i as f64);
    assert!(geo::hodge_laplacian_1form(&flat, &c).unwrap().comps.concat().iter().all(|v| v.abs() < 1e-12));
    let f = common::scalar(&chart, &mut r, 1, 1.0);
    let lhs = geo::hodge_laplacian_1form(&flat, &geo::differential(&f)).unwrap();
    let rhs = geo::differential(&geo::laplacian(&flat, &f).unwrap());
    for a in 0..3 {
        assert!(max_abs(&diff(&lhs.comps[a], &rhs.comps[a])) < 1e-6);
    }
    // Curved: Weitzenboeck evaluation against the composite d delta + delta d.
    let u = common::scalar(&chart, &mut r, 1, 0.2);
    let g = MetricField::conformally_flat(&u).unwrap();
    let w = common::form(&chart, &mut r, 1, 1.0);
    let hodge = geo::hodge_laplacian_1form(&g, &w).unwrap();
    let d_delta = geo::differential(&geo::codifferential(&g, &w).unwrap());
    let delta_d = geo::codifferential_2form(&g, &geo::exterior_derivative_1form(&w)).unwrap();
    let scale = max_abs(&hodge.comps.concat());
    for a in 0..3 {
        let comp: Vec<f64> = d_delta.comps[a].iter().zip(&delta_d.comps[a]).map(|(x, y)| x + y).collect();
        assert!(max_abs(&diff(&hodge.comps[a], &comp)) < 1e-5 * scale);
    }
}

#[test]
fn quadrature_examples() {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    let flat = MetricField::flat(&chart);
    assert!((geo::volume(&flat) - TAU.powi(3)).abs() < 1e-10);
    let mut r = common::rng(1);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    assert!((geo::average(&g, &ScalarField::constant(&chart, 1.0)).unwrap() - 1.0).abs() < 1e-14);
    let s = ScalarField::from_fn(&chart, |x| (2.0 * x[1]).sin());
    let ss = geo::integrate(&flat, &s.map(|v| v * v)).unwrap();
    assert!((ss - 0.5 * TAU.powi(3)).abs() < 1e-10);
}

#[test]
fn schrodinger_eigenvalues_on_flat_box() {
    let chart = GridChart::new(vec![12, 10], vec![3.0, 5.0], FdOrder::Fourth).unwrap();
    let flat = MetricField::flat(&chart);
    let zero = ScalarField::constant(&chart, 0.0);
    let res = eigen_smallest(&flat, 1.0, &zero, EigenOptions { count: 2, ..Default::default() }).unwrap();
    assert!(res.values[0].abs() < 1e-10);
    let v0 = &res.vectors[0].values;
    assert!(v0.iter().all(|v| (v - v0[0]).abs() < 1e-8));
    // Weak-form symbol on the longest axis approximates (2 pi / 5)^2.
    let exact = (TAU / 5.0).powi(2);
    assert!((res.values[1] - exact).abs() < 2e-2 * exact, "{} vs {exact}", res.values[1]);
}

fn random_metric(seed: u64, eps: f64) -> (MetricField, SymTensorField, SymTensorField) {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    let mut r = common::rng(seed);
    let g = common::metric(&chart, &mut r, 1, eps);
    let h = common::sym(&chart, &mut r, 1, 1.0);
    let k = common::sym(&chart, &mut r, 1, 1.0);
    (g, h, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn riemann_symmetries_and_bianchi(seed in 0u64..10_000, eps in 0.05f64..0.3) {
        let (g, _, _) = random_metric(seed, eps);
        let rm = geo::curvature(&g).riemann;
        let scale = rm.comps.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let n = 3;
        for i in 0..n { for j in 0..n { for k in 0..n { for l in 0..n {
            for node in [0, 101, 300] {
                let r = |a, b, c, d| rm.get(a, b, c, d)[node];
                prop_assert!((r(i, j, k, l) + r(j, i, k, l)).abs() < 1e-11 * scale);
                prop_assert!((r(i, j, k, l) + r(i, j, l, k)).abs() < 1e-11 * scale);
                prop_assert!((r(i, j, k, l) - r(k, l, i, j)).abs() < 1e-11 * scale);
                prop_assert!((r(i, j, k, l) + r(j, k, i, l) + r(k, i, j, l)).abs() < 1e-11 * scale);
            }
        }}}}
        // Trace consistency: tr_g Ric = scal.
        let pack = geo::curvature(&g);
        let tr = geo::trace(&g, &pack.ricci).unwrap();
        prop_assert!(max_abs(&diff(&tr.values, &pack.scal.values)) < 1e-11 * max_abs(&pack.scal.values).max(1e-12));
    }

    #[test]
    fn curvature_action_is_pointwise_self_adjoint(seed in 0u64..10_000) {
        let (g, h, k) = random_metric(seed, 0.2);
        let a = geo::pointwise_inner_sym(&g, &geo::curvature_action(&g, &h).unwrap(), &k).unwrap();
        let b = geo::pointwise_inner_sym(&g, &h, &geo::curvature_action(&g, &k).unwrap()).unwrap();
        prop_assert!(max_abs(&diff(&a.values, &b.values)) < 1e-11 * max_abs(&a.values).max(1e-12));
    }

    #[test]
    fn laplacian_spectrum_is_nonnegative(seed in 0u64..10_000) {
        let (g, _, _) = random_metric(seed, 0.2);
        let mut r = common::rng(seed ^ 0x55);
        let f = common::scalar(g.chart(), &mut r, 2, 1.0);
        let lap = einflow_core::spectral::WeakLaplacian::new(&g);
        let energy = lap.energy(&f.values);
        prop_assert!(energy >= -1e-12);
    }
}
