mod common;

use einflow_core::variation::{verify_all, Quantity};
use einflow_core::GridChart;

#[test]
fn linearizations_match_difference_quotients() {
    let chart = GridChart::cube(3, 12, std::f64::consts::TAU).unwrap();
    let mut r = common::rng(7);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let h = common::sym(&chart, &mut r, 1, 1.0);
    let f = common::scalar(&chart, &mut r, 1, 1.0);
    let reports = verify_all(&g, &h, &f, 1e-2).unwrap();
    for rep in &reports {
        println!("{:?} rel {:e} order {:?} norm {:e}", rep.quantity, rep.rel_error, rep.convergence_order_estimate, rep.fd_norm);
    }
    for rep in &reports {
        assert!(rep.rel_error < 1e-7, "{:?}: {:e}", rep.quantity, rep.rel_error);
    }
    assert_eq!(reports.len(), Quantity::ALL.len());
}

use einflow_core::entropy::lambda_perelman;
use einflow_core::geometry as geo;
use einflow_core::variation::{conformal_second_variations, default_step, fd_directional};
use einflow_core::{Error, FdOrder, MetricField, ScalarField, SymTensorField};

const TAU: f64 = std::f64::consts::TAU;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn total_scal(g: &MetricField) -> einflow_core::Result<Vec<f64>> {
    Ok(vec![geo::integrate(g, &geo::scalar_curvature(g))?])
}

#[test]
fn conformal_second_variations_match_flat_closed_forms() {
    let chart = GridChart::cube(3, 16, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let g = MetricField::flat(&chart);
    let v = ScalarField::from_fn(&chart, |x| 0.3 * x[0].sin() + 0.2 * (x[1] + x[2]).cos());
    let out = conformal_second_variations(&g, &v, Some(0.0)).unwrap();
    let ric_closed = out.ricci_closed.unwrap();
    let scale = ric_closed.max_abs();
    let e = out.ricci.axpy(-1.0, &ric_closed).unwrap().max_abs();
    assert!(e < 1e-6 * scale, "{e} {scale}");
    let scal_closed = out.scal_closed.unwrap();
    let gap: Vec<f64> = out.scal.values.iter().zip(&scal_closed.values).map(|(a, b)| a - b).collect();
    assert!(max_abs(&gap) < 1e-6 * max_abs(&scal_closed.values));
}

#[test]
fn conformal_second_variations_degenerate_directions() {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    let g = MetricField::flat(&chart);
    let zero = conformal_second_variations(&g, &ScalarField::constant(&chart, 0.0), Some(0.0)).unwrap();
    assert_eq!(zero.ricci.max_abs(), 0.0);
    assert!(zero.convergence_order.is_none());
    // Constant rescaling of a flat metric stays flat.
    let c = ScalarField::constant(&chart, 0.5);
    let ric_closed = conformal_second_variations(&g, &c, Some(0.0)).map(|o| o.ricci_closed.unwrap());
    match ric_closed {
        Ok(rc) => assert!(rc.max_abs() < 1e-14),
        // Every difference quotient along a flat curve sits at roundoff.
        Err(e) => assert!(matches!(e, Error::NoisyFunctional(_)), "{e}"),
    }

    let mut r = common::rng(3);
    let bumpy = common::metric(&chart, &mut r, 1, 0.2);
    let v = common::scalar(&chart, &mut r, 1, 1.0);
    assert!(matches!(
        conformal_second_variations(&bumpy, &v, Some(0.0)),
        Err(Error::NonEinsteinBackgroundForClosedForm(_))
    ));
    assert!(conformal_second_variations(&bumpy, &v, None).unwrap().ricci_closed.is_none());
}

#[test]
fn second_directional_derivative_is_quadratic_in_direction() {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    let mut r = common::rng(31);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let h = common::sym(&chart, &mut r, 1, 0.5);
    let t0 = default_step(&g, &h, 1e-2);
    let once = fd_directional(&total_scal, &g, &h, 2, t0).unwrap().value[0];
    // Same curve points: step t0/2 along 2h.
    let twice = fd_directional(&total_scal, &g, &h.scale(2.0), 2, 0.5 * t0).unwrap().value[0];
    assert!((twice - 4.0 * once).abs() < 1e-8 * once.abs().max(1e-12), "{once} {twice}");
}

#[test]
fn volume_derivative_along_the_metric() {
    let chart = GridChart::cube(3, 8, TAU).unwrap();
    let mut r = common::rng(2);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let vol = |m: &MetricField| -> einflow_core::Result<Vec<f64>> { Ok(vec![geo::volume(m)]) };
    let d = fd_directional(&vol, &g, g.tensor(), 1, 1e-2).unwrap().value[0];
    assert!((d - 1.5 * geo::volume(&g)).abs() < 1e-9 * geo::volume(&g));
}

#[test]
fn total_scalar_curvature_is_blind_to_lie_derivatives() {
    let chart = GridChart::cube(3, 24, TAU).unwrap().with_stencil(FdOrder::Eighth).unwrap();
    let mut r = common::rng(8);
    let g = common::metric(&chart, &mut r, 1, 0.2);
    let w = common::form(&chart, &mut r, 1, 1.0);
    let lie = geo::adjoint_divergence(&g, &w).unwrap().scale(2.0);
    let generic = common::sym(&chart, &mut r, 1, lie.max_abs());
    let along = |h: &SymTensorField| fd_directional(&total_scal, &g, h, 1, default_step(&g, h, 1e-2)).unwrap().value[0];
    let (d_lie, d_generic) = (along(&lie), along(&generic));
    assert!(d_lie.abs() < 1e-6 * d_generic.abs(), "{d_lie} {d_generic}");
}

#[test]
fn perelman_lambda_scales_inversely_with_the_metric() {
    let chart = GridChart::cube(2, 12, TAU).unwrap();
    let mut r = common::rng(4);
    let g = common::metric(&chart, &mut r, 1, 0.1);
    let base = lambda_perelman(&g).unwrap().value;
    let scaled = lambda_perelman(&g.scaled(2.25).unwrap()).unwrap().value;
    assert!((scaled - base / 2.25).abs() < 1e-9 * base.abs().max(1e-12), "{base} {scaled}");
}
