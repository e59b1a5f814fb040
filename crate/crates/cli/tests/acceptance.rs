//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use einflow_core::entropy::{self, CscData};
use einflow_core::flow::{self, FlowConfig, FlowKind, Gauge, MonitoredFunctional};
use einflow_core::model::{self, ratio_string, Verdict};
use einflow_core::variation::fd_directional;
use einflow_core::{geometry as geo, sample, FdOrder, GridChart, MetricField, SymTensorField};
use einflow_spherepoly::certificate::eigenfunction_summands;
use einflow_spherepoly::montecarlo::monte_carlo_average;
use einflow_spherepoly::sphere::sphere_average;
use einflow_spherepoly::{cpn_eigenfunction, monomial_average, third_variation_certificate, ZPoly};

use einflow_cli::commands::conformal_factor;

const TAU: f64 = std::f64::consts::TAU;
const MC_SEED: u64 = 20240611;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn cube(dim: usize, n: usize, stencil: FdOrder) -> GridChart {
    GridChart::new(vec![n; dim], vec![TAU; dim], stencil).expect("valid chart")
}

fn cpn_certificate() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    for n in 2..=6 {
        let c = third_variation_certificate(n).map_err(err)?;
        pass &= c.agree && c.value == c.headline;
    }
    let h = cpn_eigenfunction(2).map_err(err)?;
    let cube_avg = sphere_average(&h.pow(3));
    let headline = third_variation_certificate(2).map_err(err)?.headline;
    pass &= ratio_string::format(&cube_avg) == "1/5" && ratio_string::format(&headline.0) == "8/5";

    let mc = monte_carlo_average(&h.pow(3), 10_000_000, MC_SEED);
    pass &= mc.agrees_with(0.2, 3.0);
    let mono = ZPoly::monomial(3, vec![2, 1, 0], vec![2, 1, 0], BigRational::one()).map_err(err)?;
    let exact = monomial_average(&[2, 1, 0], &[2, 1, 0], 3).map_err(err)?.value;
    let exact_f = ratio_string::format(&exact);
    let mc2 = monte_carlo_average(&mono, 10_000_000, MC_SEED + 1);
    pass &= mc2.agrees_with(exact.to_f64().ok_or("average not representable")?, 3.0);
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 60.0;
    Ok((
        pass,
        format!(
            "n=2..6 exact, avg h^3 = {}, headline {}, MC {:.5}+-{:.1e} and {:.6}+-{:.1e} vs {exact_f}, {secs:.1}s",
            ratio_string::format(&cube_avg),
            ratio_string::format(&headline.0),
            mc.mean,
            mc.standard_error,
            mc2.mean,
            mc2.standard_error
        ),
    ))
}

fn antisymmetry() -> Outcome {
    let [h1, h2, _] = eigenfunction_summands(2).map_err(err)?;
    let a = sphere_average(&h1.pow(3));
    let b = sphere_average(&(&h1 * &h2.pow(2)));
    let c = monomial_average(&[1, 2, 0], &[1, 0, 2], 3).map_err(err)?.value;
    let all = [a, b, c];
    let pass = all.iter().all(|v| v.is_zero());
    Ok((pass, format!("values {:?}", all.iter().map(ratio_string::format).collect::<Vec<_>>())))
}

fn variation_suite() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(err)?;
    let out = tmp.path().join("vv");
    let args = [
        "einflow", "--out", out.to_str().unwrap(), "verify-variations", "--samples", "20", "--torus", "3", "--N", "24",
        "--tol", "1e-5", "--min-order", "3",
    ];
    let (mut so, mut se) = (Vec::new(), Vec::new());
    let run = einflow_cli::run_with(args, &mut so, &mut se);
    let rep = run.report.ok_or_else(|| String::from_utf8_lossy(&se).to_string())?;
    let max_err = rep.result["max_rel_error"].as_f64().unwrap_or(f64::INFINITY);
    let order = rep.result["min_convergence_order"].as_f64();
    let secs = start.elapsed().as_secs_f64();
    let pass = run.exit_code == 0 && max_err <= 1e-5 && order.is_some_and(|o| o >= 3.0) && secs <= 600.0;
    Ok((pass, format!("20 samples at N=24: max rel error {max_err:.2e}, min order {order:?}, {secs:.0}s")))
}

/// `x -> (x_0 + a sin x_1, x_1, ...)` pulled back from the flat metric.
fn sheared_flat(chart: &GridChart, a: f64) -> MetricField {
    let n = chart.dim();
    let t = SymTensorField::from_fn(chart, |i, j, x| {
        let s = a * x[1].cos();
        match (i.min(j), i.max(j)) {
            (0, 0) => 1.0,
            (0, 1) => s,
            (1, 1) => 1.0 + s * s,
            (p, q) if p == q && p < n => 1.0,
            _ => 0.0,
        }
    });
    MetricField::new(t).expect("pullback metric")
}

fn mu_plus_closed_form() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_el: f64 = 0.0;
    let mut cases = Vec::new();
    let flat3 = MetricField::flat(&cube(3, 12, FdOrder::Fourth));
    cases.push(("flat T^3(2pi)", flat3));
    for (dims, lens) in [(vec![10, 12], vec![1.0, 2.0]), (vec![10, 12], vec![10.0, 20.0]), (vec![8, 10, 12], vec![3.0, 5.0, 7.0])] {
        let chart = GridChart::new(dims, lens, FdOrder::Fourth).map_err(err)?;
        cases.push(("flat box", MetricField::flat(&chart)));
    }
    let chart = cube(3, 10, FdOrder::Fourth);
    let k = SymTensorField::from_fn(&chart, |i, j, _| [[2.0, 0.3, -0.2], [0.3, 1.5, 0.1], [-0.2, 0.1, 0.8]][i][j]);
    cases.push(("constant coefficients", MetricField::new(k).map_err(err)?));
    cases.push(("sheared flat", sheared_flat(&cube(2, 24, FdOrder::Eighth), 0.3)));
    cases.push(("sheared flat 3D", sheared_flat(&cube(3, 16, FdOrder::Eighth), 0.2)));

    let mut pass = true;
    for (i, (_, g)) in cases.iter().enumerate() {
        let sol = entropy::mu_plus_solve(g).map_err(err)?;
        let csc = CscData::from_grid(g, 1e-5).map_err(err)?;
        let closed = entropy::mu_plus_csc(csc.volume, csc.scal);
        let gap = (sol.value - closed).abs();
        if i == 0 {
            let exact = -3.0 * TAU.ln();
            pass &= (sol.value - exact).abs() <= 1e-8;
        }
        pass &= gap <= 1e-7 && sol.el_residual_l2 <= 1e-9;
        worst_gap = worst_gap.max(gap);
        worst_el = worst_el.max(sol.el_residual_l2);
    }
    Ok((pass, format!("{} metrics: max |mu_+ - closed| {worst_gap:.1e}, max EL residual {worst_el:.1e}", cases.len())))
}

fn mu_plus_first_variation() -> Outcome {
    let chart = cube(3, 24, FdOrder::Eighth);
    let mut rng = sample::rng(51);
    let g = sample::metric(&chart, &mut rng, 1, 0.2).map_err(err)?;
    let sol = entropy::mu_plus_solve(&g).map_err(err)?;
    let f = |m: &MetricField| Ok(vec![entropy::mu_plus_solve(m)?.value]);
    let mut worst_rel: f64 = 0.0;
    let mut worst_diffeo: f64 = 0.0;
    for _ in 0..10 {
        let h = sample::sym(&chart, &mut rng, 1, 1.0);
        let analytic = entropy::mu_plus_first_variation(&g, &h, &sol).map_err(err)?;
        let fd = fd_directional(&f, &g, &h, 1, 0.02).map_err(err)?.value[0];
        worst_rel = worst_rel.max((analytic - fd).abs() / fd.abs());

        let omega = sample::form(&chart, &mut rng, 1, 1.0);
        let lie = geo::adjoint_divergence(&g, &omega).map_err(err)?;
        let unit = lie.scale(1.0 / geo::l2_norm_sym(&g, &lie).map_err(err)?);
        worst_diffeo = worst_diffeo.max(entropy::mu_plus_first_variation(&g, &unit, &sol).map_err(err)?.abs());
    }
    let pass = worst_rel <= 1e-5 && worst_diffeo <= 1e-5;
    Ok((pass, format!("10 directions: max rel gap {worst_rel:.1e}; unit diffeomorphism directions max {worst_diffeo:.1e}")))
}

fn monotonicity() -> Outcome {
    let chart = cube(2, 16, FdOrder::Fourth);
    let mut runs = vec![("flat".to_string(), MetricField::flat(&chart))];
    for seed in [4u64, 9, 17] {
        runs.push((format!("seed {seed}"), sample::metric(&chart, &mut sample::rng(seed), 1, 0.1).map_err(err)?));
    }
    let mut pass = true;
    let mut min_inc = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    let mut rates = 0;
    for (_, g0) in &runs {
        let mut cfg = FlowConfig::new(FlowKind::NegativeNormalized, 0.3);
        cfg.monitors.every = 5;
        cfg.monitors.mu_plus = true;
        let tr = flow::flow_run(g0, &cfg).map_err(err)?;
        pass &= tr.failure.is_none();
        let rep = flow::monotonicity_monitor(&tr, MonitoredFunctional::MuPlus, 1e-8).map_err(err)?;
        pass &= rep.violations == 0 && !rep.rates.is_empty();
        min_inc = min_inc.min(rep.min_increment);
        max_gap = max_gap.max(rep.max_rate_gap);
        rates += rep.rates.len();
    }
    pass &= min_inc >= -1e-8 && max_gap <= 1e-3;
    Ok((pass, format!("{} runs: min increment {min_inc:.2e}, max rate gap {max_gap:.1e} over {rates} rates", runs.len())))
}

fn homothety() -> Outcome {
    let chart = cube(2, 8, FdOrder::Fourth);
    let g0 = MetricField::conformally_flat(&conformal_factor(&chart, 0.1, 1.0)).map_err(err)?;
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| flow::homothety_check(&g0, Gauge::None, 0.3, dt, 2).map(|r| r.max_c0_discrepancy))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = errs.iter().all(|e| *e <= 1e-5) && orders.iter().all(|o| *o >= 3.0);
    let errs_s: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    let orders_s: Vec<String> = orders.iter().map(|o| format!("{o:.2}")).collect();
    Ok((pass, format!("C0 discrepancy {} at dt 0.02/0.01/0.005, orders {}", errs_s.join("/"), orders_s.join("/"))))
}

fn ricci_flat_stability() -> Outcome {
    let chart = cube(3, 12, FdOrder::Fourth);
    let g0 = MetricField::conformally_flat(&conformal_factor(&chart, 0.01, 2.0)).map_err(err)?;
    let mut cfg = FlowConfig::new(FlowKind::Standard, 5.0);
    cfg.gauge = Gauge::DeTurckFlat;
    cfg.monitors.every = 10;
    cfg.monitors.lambda = true;
    let tr = flow::flow_run(&g0, &cfg).map_err(err)?;
    let last = tr.diagnostics.last().ok_or("no diagnostics")?;
    let lambdas: Vec<f64> = tr.diagnostics.iter().filter_map(|d| d.lambda).collect();
    let min_inc = lambdas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let lam = *lambdas.last().ok_or("no lambda samples")?;
    let pass = tr.failure.is_none() && last.time >= 5.0 - 1e-9 && last.ricci_l2 <= 1e-4 && min_inc >= -1e-8 && lam.abs() <= 1e-8;
    Ok((pass, format!("T = {:.2}: |Ric|_L2 {:.1e}, lambda {lam:.1e}, min increment {min_inc:.1e}", last.time, last.ricci_l2)))
}

fn shrinker_closed_form() -> Outcome {
    let mut pass = true;
    let mut worst_w: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut count = 0;
    for m in model::catalog().into_iter().filter(|m| m.is_positive_einstein()) {
        let csc = m.csc_data();
        let nu = entropy::nu_minus_csc(&csc).map_err(err)?;
        let (f, tau) = entropy::nu_minus_einstein_minimizer(csc.dim, m.mu_f64(), csc.volume).map_err(err)?;
        // The Einstein minimizer sits at tau = 1/(2 mu).
        pass &= (tau - 0.5 / m.mu_f64()).abs() <= 1e-15 * tau;
        let w = entropy::w_minus_constant(&csc, f, tau);
        worst_w = worst_w.max((w - nu).abs());
        for c in [0.5, 1.0, 2.0, 10.0] {
            let dev = (entropy::nu_minus_csc(&csc.scaled(c)).map_err(err)? - nu).abs();
            worst_scale = worst_scale.max(dev / nu.abs().max(1.0));
        }
        count += 1;
    }
    pass &= worst_w <= 1e-10 && worst_scale <= 1e-14;
    Ok((pass, format!("{count} models: max |W_- - nu| {worst_w:.1e}, max relative scale deviation {worst_scale:.1e}")))
}

fn l_operator_roots() -> Outcome {
    let mut pass = true;
    let mut levels = 0;
    let mut roots = 0;
    for m in model::catalog().into_iter().filter(|m| m.is_positive_einstein()) {
        let n = m.dim_real as i64;
        let two = BigRational::from_integer(2.into());
        let root = BigRational::new(n.into(), (n - 1).into());
        pass &= model::l_multiplier_at(m.dim_real, &two).map_err(err)?.is_zero();
        pass &= model::l_multiplier_at(m.dim_real, &root).map_err(err)?.is_zero();
        for lvl in &m.spectrum {
            let x = &lvl.eigenvalue / &m.einstein_constant;
            let value = model::conformal_l_multiplier(&m, &lvl.eigenvalue).map_err(err)?;
            let is_root = x == two || x == root;
            pass &= value.is_zero() == is_root;
            roots += usize::from(is_root);
            levels += 1;
        }
    }
    for n in 2..=6 {
        let m = model::complex_projective(n).map_err(err)?;
        pass &= *m.lambda_one() == BigRational::from_integer(2.into()) * &m.einstein_constant;
        pass &= model::classify(&m, None).map_err(err)?.verdict == Verdict::Indeterminate;
        let w = third_variation_certificate(n).map_err(err)?.value.0;
        pass &= model::classify(&m, Some(&w)).map_err(err)?.verdict == Verdict::BorderlineResolvedUnstable;
    }
    Ok((pass, format!("{levels} catalog levels checked, {roots} roots; CP^2..CP^6 borderline resolved by the cubic witness")))
}

/// The two sides of the trace identity differ by O(dx^8); N = 32 leaves about 8e-6.
const IDENTITY_RESOLUTION: usize = 48;

fn operator_identities() -> Outcome {
    let chart = cube(3, IDENTITY_RESOLUTION, FdOrder::Eighth);
    let mut worst_trace: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = sample::rng(1000 + seed);
        let g = sample::metric(&chart, &mut rng, 1, 0.1).map_err(err)?;
        let h = sample::sym(&chart, &mut rng, 2, 1.0);
        let omega = sample::form(&chart, &mut rng, 2, 1.0);
        let a = geo::trace(&g, &geo::lichnerowicz(&g, &h).map_err(err)?).map_err(err)?;
        let b = geo::laplacian(&g, &geo::trace(&g, &h).map_err(err)?).map_err(err)?;
        let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        worst_trace = worst_trace.max(max_abs(&diff) / max_abs(&b.values));
        let lhs = geo::l2_inner_form(&g, &geo::divergence(&g, &h).map_err(err)?, &omega).map_err(err)?;
        let rhs = geo::l2_inner_sym(&g, &h, &geo::adjoint_divergence(&g, &omega).map_err(err)?).map_err(err)?;
        let scale = geo::l2_norm_sym(&g, &h).map_err(err)? * geo::l2_norm_form(&g, &omega).map_err(err)?;
        worst_adj = worst_adj.max((lhs - rhs).abs() / scale);
    }
    let pass = worst_trace <= 1e-6 && worst_adj <= 1e-6;
    Ok((pass, format!("20 inputs at N={IDENTITY_RESOLUTION}: trace identity {worst_trace:.1e}, adjointness {worst_adj:.1e}")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "CP^n third-variation certificate", cpn_certificate),
        (2, "antisymmetric cubic averages vanish", antisymmetry),
        (3, "first-variation suite on T^3", variation_suite),
        (4, "mu_+ closed form on constant-scalar metrics", mu_plus_closed_form),
        (5, "mu_+ first variation", mu_plus_first_variation),
        (6, "mu_+ monotonicity along the normalized flow", monotonicity),
        (7, "homothety equivalence", homothety),
        (8, "perturbed flat torus converges", ricci_flat_stability),
        (9, "nu_- closed form and scale invariance", shrinker_closed_form),
        (10, "conformal multiplier roots", l_operator_roots),
        (11, "operator identities", operator_identities),
    ];
    // Optional numeric arguments select criteria by id.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {id}: {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
