//! Command implementations. Each reads its resolved config, writes artifacts, and returns
//! the JSON result embedded in the report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use einflow_core::entropy::{self, CscData, MuPlusOptions};
use einflow_core::flow::{self, DtPolicy, FlowConfig, FlowKind, Gauge, MonitoredFunctional};
use einflow_core::io::{self, FieldData};
use einflow_core::lojasiewicz::{lojasiewicz_fit, EntropySample, FitOptions};
use einflow_core::model::{self, ratio_string, ModelKind};
use einflow_core::spectral::EigenOptions;
use einflow_core::variation::{verify_all, Quantity};
use einflow_core::{geometry, sample, FdOrder, GridChart, MetricField, ScalarField};
use einflow_spherepoly::third_variation_certificate;

use crate::config::{Command, Config};
use crate::error::{CliError, CliResult};
use crate::report::{hash_file, OutputDir, Status};

pub struct Context {
    pub cfg: Config,
    pub out: OutputDir,
    /// Hashes of the input artifacts read so far, keyed by config key.
    pub inputs: BTreeMap<String, String>,
}

pub struct Outcome {
    pub status: Status,
    pub message: Option<String>,
    pub result: Value,
    /// One line for stdout.
    pub summary: String,
}

impl Outcome {
    fn ok(result: Value, summary: String) -> Outcome {
        Outcome { status: Status::Ok, message: None, result, summary }
    }

    fn checked(pass: bool, failure: impl Into<String>, result: Value, summary: String) -> Outcome {
        if pass {
            Outcome::ok(result, summary)
        } else {
            Outcome { status: Status::CheckFailed, message: Some(failure.into()), result, summary }
        }
    }
}

pub fn execute(ctx: &mut Context) -> CliResult<Outcome> {
    match ctx.cfg.command {
        Command::VerifyVariations => verify_variations(ctx),
        Command::MuPlus => mu_plus(ctx),
        Command::Lambda => lambda(ctx),
        Command::NuCsc => nu_csc(ctx),
        Command::Classify => classify(ctx),
        Command::CpnCertificate => cpn_certificate(ctx),
        Command::Flow => flow_cmd(ctx),
        Command::HomothetyCheck => homothety(ctx),
        Command::LojasiewiczFit => lojasiewicz(ctx),
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn stencil(cfg: &Config) -> CliResult<FdOrder> {
    match cfg.raw("stencil") {
        "2" => Ok(FdOrder::Second),
        "4" => Ok(FdOrder::Fourth),
        "6" => Ok(FdOrder::Sixth),
        "8" => Ok(FdOrder::Eighth),
        other => Err(cfg.invalid("stencil", format!("expected 2, 4, 6 or 8, got {other:?}"))),
    }
}

pub fn chart(cfg: &Config) -> CliResult<GridChart> {
    let dim: usize = cfg.get("torus")?;
    if dim < 2 {
        return Err(cfg.invalid("torus", "dimension must be at least 2"));
    }
    let n: usize = cfg.get("N")?;
    let length = cfg.positive("L")?;
    GridChart::new(vec![n; dim], vec![length; dim], stencil(cfg)?).map_err(|e| cfg.invalid("N", e.to_string()))
}

/// `u = amplitude (sin(m x_0) cos(m x_1) + cos(m x_{n-1}))`.
pub fn conformal_factor(chart: &GridChart, amplitude: f64, mode: f64) -> ScalarField {
    let last = chart.dim() - 1;
    ScalarField::from_fn(chart, |x| amplitude * ((mode * x[0]).sin() * (mode * x[1]).cos() + (mode * x[last]).cos()))
}

/// The metric named by the grid keys; random metrics draw from `rng` first.
fn grid_metric(ctx: &mut Context, rng: &mut sample::SampleRng) -> CliResult<MetricField> {
    let cfg = &ctx.cfg;
    if let Some(path) = cfg.get_opt::<String>("init-metric")? {
        let p = Path::new(&path);
        let hash = hash_file(p).map_err(|e| cfg.invalid("init-metric", e.to_string()))?;
        let field = io::read_field(p).map_err(|e| cfg.invalid("init-metric", e.to_string()))?;
        let FieldData::Metric(g) = field else {
            return Err(cfg.invalid("init-metric", format!("container holds a {:?} field", field.kind())));
        };
        ctx.inputs.insert("init-metric".into(), hash);
        return Ok(g);
    }
    let chart = chart(cfg)?;
    let amplitude: f64 = cfg.get("amplitude")?;
    let mode: u32 = cfg.get("mode")?;
    match cfg.choice("metric", &["flat", "conformal", "random"])? {
        "flat" => Ok(MetricField::flat(&chart)),
        "conformal" => Ok(MetricField::conformally_flat(&conformal_factor(&chart, amplitude, mode as f64))?),
        _ => Ok(sample::metric(&chart, rng, mode as i32, amplitude)?),
    }
}

fn seeded_metric(ctx: &mut Context) -> CliResult<MetricField> {
    let seed: u64 = ctx.cfg.get("seed")?;
    grid_metric(ctx, &mut sample::rng(seed))
}

fn write_fields(ctx: &Context) -> CliResult<bool> {
    ctx.cfg.get("write-fields")
}

fn write_field(ctx: &mut Context, name: &str, role: &str, field: &FieldData) -> CliResult<String> {
    let bytes = io::encode(field)?;
    ctx.out.write(name, role, &bytes)
}

fn verify_variations(ctx: &mut Context) -> CliResult<Outcome> {
    let samples: usize = ctx.cfg.get("samples")?;
    let seed: u64 = ctx.cfg.get("seed")?;
    let field_modes: i32 = ctx.cfg.get("field-modes")?;
    let rel_step = ctx.cfg.positive("rel-step")?;
    let tol = ctx.cfg.positive("tol")?;
    let min_order: f64 = ctx.cfg.get("min-order")?;
    if samples == 0 {
        return Err(ctx.cfg.invalid("samples", "must be positive"));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["sample", "quantity", "rel_error", "convergence_order", "analytic_norm", "fd_norm"])?;
    let mut per_q: BTreeMap<&'static str, (f64, Option<f64>)> = BTreeMap::new();
    for s in 0..samples {
        let mut rng = sample::rng(seed.wrapping_add(s as u64));
        let g = grid_metric(ctx, &mut rng)?;
        let h = sample::sym(g.chart(), &mut rng, field_modes, 1.0);
        let f = sample::scalar(g.chart(), &mut rng, field_modes, 1.0);
        for rep in verify_all(&g, &h, &f, rel_step)? {
            let order = rep.convergence_order_estimate;
            csv.write_record([
                s.to_string(),
                rep.quantity.name().to_string(),
                format!("{:e}", rep.rel_error),
                order.map(|o| format!("{o:.4}")).unwrap_or_default(),
                format!("{:e}", rep.analytic_norm),
                format!("{:e}", rep.fd_norm),
            ])?;
            let e = per_q.entry(rep.quantity.name()).or_insert((0.0, None));
            e.0 = e.0.max(rep.rel_error);
            if let Some(o) = order {
                e.1 = Some(e.1.map_or(o, |m: f64| m.min(o)));
            }
        }
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    ctx.out.write("variations.csv", "per-sample errors", &bytes)?;

    let max_err = per_q.values().map(|v| v.0).fold(0.0, f64::max);
    let min_ord = per_q.values().filter_map(|v| v.1).fold(f64::INFINITY, f64::min);
    let pass = max_err <= tol && (min_ord >= min_order || min_ord.is_infinite());
    let quantities: BTreeMap<&str, Value> = per_q
        .iter()
        .map(|(k, (e, o))| (*k, json!({ "max_rel_error": e, "min_convergence_order": o })))
        .collect();
    debug_assert_eq!(quantities.len(), Quantity::ALL.len());
    let result = json!({
        "samples": samples,
        "quantities": quantities,
        "max_rel_error": max_err,
        // Null when every ladder sat at roundoff.
        "min_convergence_order": if min_ord.is_finite() { Some(min_ord) } else { None },
        "pass": pass,
    });
    let summary = format!("max relative error {max_err:.3e}, min order {min_ord:.2} over {samples} samples");
    Ok(Outcome::checked(pass, format!("tolerance {tol:e} or order {min_order} not met"), result, summary))
}

fn mu_plus(ctx: &mut Context) -> CliResult<Outcome> {
    let g = seeded_metric(ctx)?;
    let cfg = &ctx.cfg;
    let opts = MuPlusOptions {
        el_tol: cfg.positive("el-tol")?,
        target_tol: cfg.positive("target-tol")?,
        max_newton: cfg.get("max-newton")?,
        warm_start_iters: cfg.get("warm-start")?,
        positivity_floor: cfg.positive("positivity-floor")?,
        inner_tol: cfg.positive("inner-tol")?,
    };
    let csc_tol = cfg.positive("csc-tol")?;
    let sol = entropy::mu_plus_solve_with(&g, opts, None)?;
    let scal = geometry::scalar_curvature(&g);
    let volume = geometry::volume(&g);
    let closed = match CscData::from_grid(&g, csc_tol) {
        Ok(c) => Some(entropy::mu_plus_csc(c.volume, c.scal)),
        Err(einflow_core::Error::NonConstantScalar { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut fields = BTreeMap::new();
    if write_fields(ctx)? {
        let p = write_field(ctx, "minimizer_w.efld", "minimizer w = e^{-f/2}", &FieldData::Scalar(sol.minimizer_w.clone()))?;
        fields.insert("minimizer_w", p);
    }
    let result = json!({
        "mu_plus": sol.value,
        "closed_form": closed,
        "closed_form_gap": closed.map(|c| (sol.value - c).abs()),
        "el_residual_l2": sol.el_residual_l2,
        "el_residual_f_l2": sol.el_residual_f_l2,
        "constraint_residual": sol.constraint_residual,
        "iterations": sol.iterations,
        "volume": volume,
        "scal_min": scal.min(),
        "scal_max": scal.max(),
        "lower_bound": entropy::mu_plus_lower_bound(&g),
        "fields": fields,
    });
    Ok(Outcome::ok(result, format!("mu_plus = {:.10} (EL residual {:.2e})", sol.value, sol.el_residual_l2)))
}

fn lambda(ctx: &mut Context) -> CliResult<Outcome> {
    let g = seeded_metric(ctx)?;
    let cfg = &ctx.cfg;
    let opts = EigenOptions {
        count: 1,
        tol: cfg.positive("eig-tol")?,
        max_krylov: cfg.get("max-krylov")?,
        inner_tol: cfg.positive("inner-tol")?,
    };
    let sol = entropy::lambda_with(&g, opts)?;
    let mut fields = BTreeMap::new();
    if write_fields(ctx)? {
        let p = write_field(ctx, "minimizer_w.efld", "eigenfunction w = e^{-f/2}", &FieldData::Scalar(sol.minimizer_w.clone()))?;
        fields.insert("minimizer_w", p);
    }
    let result = json!({
        "lambda": sol.value,
        "el_residual_l2": sol.el_residual_l2,
        "constraint_residual": sol.constraint_residual,
        "iterations": sol.iterations,
        "fields": fields,
    });
    Ok(Outcome::ok(result, format!("lambda = {:.10}", sol.value)))
}

fn nu_csc(ctx: &mut Context) -> CliResult<Outcome> {
    let name = ctx.cfg.raw("model").to_string();
    let scales = ctx.cfg.list_f64("scales")?;
    if let Some(c) = scales.iter().find(|c| !(**c > 0.0)) {
        return Err(ctx.cfg.invalid("scales", format!("factor {c} is not positive")));
    }
    let (csc, einstein) = if name == "grid" {
        let g = seeded_metric(ctx)?;
        let tol = ctx.cfg.positive("csc-tol")?;
        let csc = CscData::from_grid(&g, tol)?;
        // Scalar curvature at the oscillation tolerance is indistinguishable from zero.
        if csc.scal.abs() <= tol {
            return Err(einflow_core::Error::NonPositiveScalar { scal: csc.scal }.into());
        }
        (csc, None)
    } else {
        let m = model::by_name(&name).map_err(|e| ctx.cfg.invalid("model", e.to_string()))?;
        let csc = m.csc_data();
        let einstein = m.is_positive_einstein().then(|| m.mu_f64());
        (csc, einstein)
    };
    let nu = entropy::nu_minus_csc(&csc)?;
    let tau = entropy::tau_csc(&csc)?;
    let n = csc.dim as f64;
    let f = csc.volume.ln() - 0.5 * n * (4.0 * std::f64::consts::PI * tau).ln();
    let (r1, r2) = entropy::nu_minus_el_residuals(&csc, f, tau, nu);
    let scale_dev = scales
        .iter()
        .map(|&c| entropy::nu_minus_csc(&csc.scaled(c)).map(|v| (v - nu).abs()))
        .collect::<Result<Vec<f64>, _>>()?;
    let einstein_check = match einstein {
        Some(mu) => {
            let (fe, te) = entropy::nu_minus_einstein_minimizer(csc.dim, mu, csc.volume)?;
            let w = entropy::w_minus_constant(&csc, fe, te);
            Some(json!({ "mu": mu, "f": fe, "tau": te, "w_minus": w, "gap": (w - nu).abs() }))
        }
        None => None,
    };
    let result = json!({
        "model": name,
        "dim": csc.dim,
        "volume": csc.volume,
        "scal": csc.scal,
        "nu_minus": nu,
        "tau": tau,
        "f": f,
        "el_residuals": [r1, r2],
        "constraint_residual": entropy::nu_minus_constraint(&csc, f, tau),
        "scales": scales,
        "scale_deviation": scale_dev,
        "einstein": einstein_check,
    });
    Ok(Outcome::ok(result, format!("nu_minus = {nu:.12} at tau = {tau:.12}")))
}

fn classify(ctx: &mut Context) -> CliResult<Outcome> {
    let name = ctx.cfg.raw("model").to_string();
    let m = model::by_name(&name).map_err(|e| ctx.cfg.invalid("model", e.to_string()))?;
    let witness = match ctx.cfg.raw("witness") {
        "none" => None,
        "auto" => match m.kind {
            ModelKind::ComplexProjective { complex_dim } => Some(third_variation_certificate(complex_dim)?.value.0),
            _ => None,
        },
        s => Some(ratio_string::parse(s).ok_or_else(|| ctx.cfg.invalid("witness", format!("not a rational: {s:?}")))?),
    };
    let v = model::classify(&m, witness.as_ref())?;
    let summary = format!("{}: {:?} ({})", m.name, v.verdict, v.reasons.join("; "));
    let result = json!({ "model": m.name, "verdict": to_value(&v.verdict)?, "reasons": v.reasons, "detail": to_value(&v)? });
    Ok(Outcome::ok(result, summary))
}

fn cpn_certificate(ctx: &mut Context) -> CliResult<Outcome> {
    let n: usize = ctx.cfg.get("n")?;
    if n < 1 {
        return Err(ctx.cfg.invalid("n", "complex dimension must be positive"));
    }
    let cert = third_variation_certificate(n)?;
    let m = model::complex_projective(n)?;
    let v = model::classify(&m, Some(&cert.value.0))?;
    let result = json!({
        "value": cert.value,
        "headline": cert.headline,
        "agree": cert.agree,
        "verdict": to_value(&v.verdict)?,
        "reasons": v.reasons,
        "certificate": to_value(&cert)?,
    });
    let summary = format!("CP^{n}: third variation {} = {}, {:?}", ratio_string::format(&cert.value.0), ratio_string::format(&cert.headline.0), v.verdict);
    Ok(Outcome::checked(cert.agree, "assembled value differs from the headline", result, summary))
}

fn gauge(cfg: &Config) -> CliResult<Gauge> {
    Ok(match cfg.choice("gauge", &["none", "deturck"])? {
        "none" => Gauge::None,
        _ => Gauge::DeTurckFlat,
    })
}

fn flow_cmd(ctx: &mut Context) -> CliResult<Outcome> {
    let g0 = seeded_metric(ctx)?;
    let cfg = &ctx.cfg;
    let kind = match cfg.choice("kind", &["standard", "negative-normalized", "nn", "tau"])? {
        "standard" => FlowKind::Standard,
        "tau" => FlowKind::TauFlow,
        _ => FlowKind::NegativeNormalized,
    };
    let mut fc = FlowConfig::new(kind, cfg.positive("T")?);
    fc.gauge = gauge(cfg)?;
    fc.cfl = cfg.positive("cfl")?;
    fc.dt = match cfg.raw("dt") {
        "cfl" => DtPolicy::Cfl { c: fc.cfl },
        _ => DtPolicy::Fixed(cfg.positive("dt")?),
    };
    fc.snapshot_stride = cfg.get("stride")?;
    fc.monitors.every = cfg.get("monitor-every")?;
    fc.monitors.mu_plus = cfg.get("monitor-mu-plus")?;
    fc.monitors.lambda = cfg.get("monitor-lambda")?;
    fc.metric_floor = cfg.positive("metric-floor")?;
    if fc.snapshot_stride == 0 || fc.monitors.every == 0 {
        return Err(cfg.invalid(if fc.snapshot_stride == 0 { "stride" } else { "monitor-every" }, "must be positive"));
    }
    let mono_tol = cfg.positive("monotonicity-tol")?;
    let trace = flow::flow_run(&g0, &fc)?;

    let mut rows = Vec::new();
    io::write_diagnostics_csv(&mut rows, &trace.diagnostics)?;
    ctx.out.write("diagnostics.csv", "diagnostics trace", &rows)?;
    let mut fields = BTreeMap::new();
    if write_fields(ctx)? {
        let p = write_field(ctx, "final_metric.efld", "last accepted metric", &FieldData::Metric(trace.final_metric().clone()))?;
        fields.insert("final_metric", p);
    }

    let monitored = match kind {
        FlowKind::NegativeNormalized if fc.monitors.mu_plus => Some(MonitoredFunctional::MuPlus),
        FlowKind::Standard if fc.monitors.lambda => Some(MonitoredFunctional::Lambda),
        _ => None,
    };
    let monotonicity = match monitored {
        Some(f) => match flow::monotonicity_monitor(&trace, f, mono_tol) {
            Ok(r) => Some(r),
            Err(einflow_core::Error::InsufficientData(_)) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let last = trace.diagnostics.last();
    let result = json!({
        "dt": trace.dt,
        "t_reached": last.map(|d| d.time),
        "steps": last.map(|d| d.step),
        "final": to_value(&last)?,
        "events": to_value(&trace.events)?,
        "failure": trace.failure,
        "monotonicity": to_value(&monotonicity)?,
        "fields": fields,
    });
    let summary = match last {
        Some(d) => format!("t = {:.6}, |Ric|_L2 = {:.3e}, mu_plus = {:?}, lambda = {:?}", d.time, d.ricci_l2, d.mu_plus, d.lambda),
        None => "no diagnostics recorded".to_string(),
    };
    if let Some(f) = &trace.failure {
        return Ok(Outcome { status: Status::NumericalFailure, message: Some(f.clone()), result, summary });
    }
    let violations = monotonicity.as_ref().map_or(0, |m| m.violations);
    Ok(Outcome::checked(violations == 0, format!("{violations} monotonicity violations"), result, summary))
}

fn homothety(ctx: &mut Context) -> CliResult<Outcome> {
    let g0 = seeded_metric(ctx)?;
    let cfg = &ctx.cfg;
    let dt = match cfg.raw("dt") {
        "cfl" => flow::cfl_bound(&g0, flow::DEFAULT_CFL),
        _ => cfg.positive("dt")?,
    };
    let stride: usize = cfg.get("stride")?;
    if stride == 0 {
        return Err(cfg.invalid("stride", "must be positive"));
    }
    let rep = flow::homothety_check(&g0, gauge(cfg)?, cfg.positive("T")?, dt, stride)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "c0_discrepancy"])?;
    for (t, d) in rep.times.iter().zip(&rep.c0_discrepancy) {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    ctx.out.write("homothety.csv", "discrepancy trace", &bytes)?;
    let summary = format!("max C0 discrepancy {:.3e}", rep.max_c0_discrepancy);
    Ok(Outcome::ok(to_value(&rep)?, summary))
}

fn lojasiewicz(ctx: &mut Context) -> CliResult<Outcome> {
    let cfg = &ctx.cfg;
    let path = cfg.raw("trace").to_string();
    let hash = hash_file(Path::new(&path)).map_err(|e| cfg.invalid("trace", e.to_string()))?;
    let file = std::fs::File::open(&path).map_err(|e| cfg.invalid("trace", e.to_string()))?;
    let rows = io::read_diagnostics_csv(file).map_err(|e| cfg.invalid("trace", e.to_string()))?;
    let functional = cfg.choice("functional", &["lambda", "mu-plus"])?;
    let samples: Vec<EntropySample> = rows
        .iter()
        .filter_map(|d| {
            let (v, gn) = if functional == "lambda" {
                (d.lambda?, d.lambda_gradient_norm?)
            } else {
                (d.mu_plus?, d.mu_plus_gradient_norm?)
            };
            Some(EntropySample { time: d.time, value: v, gradient_norm: gn })
        })
        .collect();
    let reference = match cfg.raw("reference") {
        "last" => samples
            .last()
            .map(|s| s.value)
            .ok_or_else(|| cfg.invalid("trace", format!("no {functional} samples in the trace")))?,
        _ => cfg.get("reference")?,
    };
    let window = match (cfg.get_opt::<f64>("window-start")?, cfg.get_opt::<f64>("window-end")?) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY))),
    };
    let opts = FitOptions {
        residual_threshold: cfg.positive("residual-threshold")?,
        eta: cfg.get("eta")?,
        window,
        gap_floor: cfg.get("gap-floor")?,
        min_points: cfg.get("min-points")?,
    };
    ctx.inputs.insert("trace".into(), hash);
    let fit = lojasiewicz_fit(&samples, reference, opts)?;
    let summary = format!("sigma = {:.4}, theta = {:.4} from {} samples", fit.sigma_estimate, fit.theta_estimate, fit.points_used);
    let result = json!({ "functional": functional, "reference": reference, "fit": to_value(&fit)? });
    Ok(Outcome::ok(result, summary))
}
