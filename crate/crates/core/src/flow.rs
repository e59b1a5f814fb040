//! Time integration of Ricci-type flows on grid metrics and on products of round spheres.
//!
//! Grid flows use classical RK4 with a fixed step. The DeTurck gauge adds `L_W g` with
//! `W^k = g^{pq}(Gamma^k_pq - ref Gamma^k_pq)` from `t = 0`.

use serde::{Deserialize, Serialize};

use crate::entropy::{self, CscData, EntropySolveResult, MuPlusOptions};
use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField, DEFAULT_POSITIVITY_FLOOR};
use crate::geometry;
use crate::lojasiewicz::EntropySample;
use crate::model::sphere_volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowKind {
    /// `g' = -2 Ric`.
    Standard,
    /// `g' = -2 (Ric + g)`.
    NegativeNormalized,
    /// `g' = -2 Ric + g / tau_g` with `tau_g` the shrinker-entropy scale.
    TauFlow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gauge {
    None,
    /// DeTurck with the flat reference metric of the chart.
    DeTurckFlat,
    DeTurck(MetricField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    Fixed(f64),
    /// `dt = c (min dx)^2 / max |g^{-1}|` at the initial metric, further scaled by
    /// `e^{-2T}` for the negatively normalized flow, whose metric shrinks like `e^{-2t}`.
    Cfl { c: f64 },
}

pub const DEFAULT_CFL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Monitor every this many steps (and at the final step).
    pub every: usize,
    pub mu_plus: bool,
    pub lambda: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors { every: 10, mu_plus: false, lambda: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub kind: FlowKind,
    pub gauge: Gauge,
    pub dt: DtPolicy,
    /// CFL constant `c` that a fixed `dt` must respect.
    pub cfl: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub monitors: Monitors,
    pub metric_floor: f64,
    /// Reference for the deviation diagnostics; defaults to the initial metric.
    pub reference: Option<MetricField>,
}

impl FlowConfig {
    pub fn new(kind: FlowKind, t_final: f64) -> Self {
        FlowConfig {
            kind,
            gauge: Gauge::None,
            dt: DtPolicy::Cfl { c: DEFAULT_CFL },
            cfl: DEFAULT_CFL,
            t_final,
            snapshot_stride: 10,
            monitors: Monitors::default(),
            metric_floor: DEFAULT_POSITIVITY_FLOOR,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub mu_plus: Option<f64>,
    /// `|Ric + g + Hess f|_{L^2(e^{-f} dV)}` at the expander minimizer.
    pub mu_plus_gradient_norm: Option<f64>,
    /// `int |Ric + g + Hess f|^2 e^{-f} dV`, the analytic rate of `mu_+` along the
    /// negatively normalized flow.
    pub mu_plus_rate: Option<f64>,
    pub lambda: Option<f64>,
    /// `|Ric + Hess f|_{L^2(e^{-f} dV)}` at the lambda minimizer.
    pub lambda_gradient_norm: Option<f64>,
    pub ricci_l2: f64,
    pub c0_deviation: f64,
    pub l2_deviation: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub step: usize,
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub kind: FlowKind,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<MetricField>,
    pub diagnostics: Vec<Diagnostics>,
    pub events: Vec<FlowEvent>,
    /// Set when the run halted before `t_final`.
    pub failure: Option<String>,
}

impl FlowTrace {
    pub fn final_metric(&self) -> &MetricField {
        self.snapshots.last().expect("trace has the initial snapshot")
    }

    /// `(time, mu_+, gradient norm)` samples for Lojasiewicz fits.
    pub fn mu_plus_samples(&self) -> Vec<EntropySample> {
        self.diagnostics
            .iter()
            .filter_map(|d| {
                Some(EntropySample { time: d.time, value: d.mu_plus?, gradient_norm: d.mu_plus_gradient_norm? })
            })
            .collect()
    }

    pub fn lambda_samples(&self) -> Vec<EntropySample> {
        self.diagnostics
            .iter()
            .filter_map(|d| {
                Some(EntropySample { time: d.time, value: d.lambda?, gradient_norm: d.lambda_gradient_norm? })
            })
            .collect()
    }
}

/// `c (min dx)^2 / max |g^{-1}|`.
pub fn cfl_bound(g: &MetricField, c: f64) -> f64 {
    let h = g.chart().min_spacing();
    c * h * h / g.max_inverse_eigenvalue()
}

fn c0_l2_distance(g: &MetricField, reference: &MetricField) -> Result<(f64, f64)> {
    let d = g.tensor().axpy(-1.0, reference.tensor())?;
    Ok((d.max_abs(), geometry::l2_norm_sym(reference, &d)?))
}

/// Right-hand side of the flow at `g`.
pub fn flow_rhs(g: &MetricField, kind: FlowKind, gauge: &Gauge, tau: Option<f64>) -> Result<SymTensorField> {
    let base = match gauge {
        Gauge::None => geometry::ricci(g).scale(-2.0),
        Gauge::DeTurckFlat => geometry::ricci_deturck(g, None)?,
        Gauge::DeTurck(r) => geometry::ricci_deturck(g, Some(r))?,
    };
    match kind {
        FlowKind::Standard => Ok(base),
        FlowKind::NegativeNormalized => base.axpy(-2.0, g.tensor()),
        FlowKind::TauFlow => {
            let tau = tau.ok_or_else(|| Error::InvalidInput("tau-flow needs tau".into()))?;
            base.axpy(1.0 / tau, g.tensor())
        }
    }
}

/// `|Ric + Hess f|_{L^2(e^{-f})}` at the lambda minimizer.
pub fn lambda_gradient_norm(g: &MetricField, sol: &EntropySolveResult) -> Result<f64> {
    let grad = geometry::ricci(g).axpy(1.0, &geometry::hessian(g, &sol.minimizer_f)?)?;
    let p = geometry::pointwise_inner_sym(g, &grad, &grad)?;
    let integrand = crate::field::ScalarField {
        chart: g.chart().clone(),
        values: p.values.iter().zip(&sol.minimizer_w.values).map(|(a, w)| a * w * w).collect(),
    };
    Ok(geometry::integrate(g, &integrand)?.max(0.0).sqrt())
}

struct MonitorState {
    mu_w: Option<crate::field::ScalarField>,
}

fn diagnose(
    g: &MetricField,
    step: usize,
    time: f64,
    dt: f64,
    cfg: &FlowConfig,
    reference: &MetricField,
    state: &mut MonitorState,
) -> Result<Diagnostics> {
    let ric = geometry::ricci(g);
    let (c0, l2) = c0_l2_distance(g, reference)?;
    let mut d = Diagnostics {
        step,
        time,
        dt,
        mu_plus: None,
        mu_plus_gradient_norm: None,
        mu_plus_rate: None,
        lambda: None,
        lambda_gradient_norm: None,
        ricci_l2: geometry::l2_norm_sym(g, &ric)?,
        c0_deviation: c0,
        l2_deviation: l2,
        min_eigenvalue: g.min_eigenvalue(),
    };
    if cfg.monitors.mu_plus {
        let sol = match &state.mu_w {
            Some(w) => entropy::mu_plus_solve_with(g, MuPlusOptions::default(), Some(w))
                .or_else(|_| entropy::mu_plus_solve(g))?,
            None => entropy::mu_plus_solve(g)?,
        };
        let rate = entropy::mu_plus_gradient_norm_sq(g, &sol)?;
        d.mu_plus = Some(sol.value);
        d.mu_plus_rate = Some(rate);
        d.mu_plus_gradient_norm = Some(rate.max(0.0).sqrt());
        state.mu_w = Some(sol.minimizer_w);
    }
    if cfg.monitors.lambda {
        let sol = entropy::lambda_perelman(g)?;
        d.lambda = Some(sol.value);
        d.lambda_gradient_norm = Some(lambda_gradient_norm(g, &sol)?);
    }
    Ok(d)
}

/// Runs the configured flow from `g0`. A metric leaving the positivity floor halts the run;
/// the trace then records the event and `failure`.
pub fn flow_run(g0: &MetricField, cfg: &FlowConfig) -> Result<FlowTrace> {
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("t_final = {}", cfg.t_final)));
    }
    if cfg.snapshot_stride == 0 || cfg.monitors.every == 0 {
        return Err(Error::InvalidInput("stride and monitor interval must be positive".into()));
    }
    let tau = match cfg.kind {
        FlowKind::TauFlow => {
            let lambda = entropy::lambda_perelman(g0)?.value;
            if lambda <= 1e-8 {
                return Err(Error::TauFlowUnavailable { lambda });
            }
            return Err(Error::InvalidInput(
                "shrinker-entropy scale is not computed on grid metrics; use the product-spheres backend".into(),
            ));
        }
        _ => None,
    };
    let bound = cfl_bound(g0, cfg.cfl);
    let shrink = if cfg.kind == FlowKind::NegativeNormalized { (-2.0 * cfg.t_final).exp() } else { 1.0 };
    let dt_req = match cfg.dt {
        DtPolicy::Fixed(dt) => {
            if !(dt > 0.0) || dt > bound {
                return Err(Error::CflViolation { dt, bound });
            }
            dt
        }
        DtPolicy::Cfl { c } => cfl_bound(g0, c) * shrink,
    };
    let steps = (cfg.t_final / dt_req).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let reference = cfg.reference.clone().unwrap_or_else(|| g0.clone());

    let mut state = MonitorState { mu_w: None };
    let mut trace = FlowTrace {
        kind: cfg.kind,
        dt,
        snapshot_times: vec![0.0],
        snapshots: vec![g0.clone()],
        diagnostics: vec![diagnose(g0, 0, 0.0, dt, cfg, &reference, &mut state)?],
        events: Vec::new(),
        failure: None,
    };
    let mut g = g0.clone();
    let floor = cfg.metric_floor;
    let stage = |base: &MetricField, k: &SymTensorField, s: f64| -> Result<MetricField> {
        MetricField::with_floor(base.tensor().axpy(s, k)?, floor)
    };
    for step in 1..=steps {
        let t = step as f64 * dt;
        let result = (|| -> Result<MetricField> {
            let k1 = flow_rhs(&g, cfg.kind, &cfg.gauge, tau)?;
            let k2 = flow_rhs(&stage(&g, &k1, 0.5 * dt)?, cfg.kind, &cfg.gauge, tau)?;
            let k3 = flow_rhs(&stage(&g, &k2, 0.5 * dt)?, cfg.kind, &cfg.gauge, tau)?;
            let k4 = flow_rhs(&stage(&g, &k3, dt)?, cfg.kind, &cfg.gauge, tau)?;
            let incr = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.axpy(1.0, &k4)?;
            stage(&g, &incr, dt / 6.0)
        })();
        match result {
            Ok(next) => g = next,
            Err(Error::NonPositiveDefinite { min_eigenvalue, .. }) => {
                // Reported at the last accepted time; the failing step never completed.
                let t_prev = (step - 1) as f64 * dt;
                let e = Error::MetricDegenerate { time: t_prev, min_eigenvalue };
                trace.events.push(FlowEvent { step, time: t_prev, message: e.to_string() });
                trace.failure = Some(e.to_string());
                return Ok(trace);
            }
            Err(e) => return Err(e),
        }
        if step % cfg.monitors.every == 0 || step == steps {
            let hard = cfl_bound(&g, 2.0 * cfg.cfl);
            if dt > hard {
                let e = Error::CflViolation { dt, bound: hard };
                trace.events.push(FlowEvent { step, time: t, message: e.to_string() });
                trace.failure = Some(e.to_string());
                return Ok(trace);
            }
            trace.diagnostics.push(diagnose(&g, step, t, dt, cfg, &reference, &mut state)?);
        }
        if step % cfg.snapshot_stride == 0 || step == steps {
            trace.snapshot_times.push(t);
            trace.snapshots.push(g.clone());
        }
    }
    Ok(trace)
}

/// Cubic Lagrange interpolation of the snapshots at time `s`.
pub fn interpolate_snapshots(trace: &FlowTrace, s: f64) -> Result<MetricField> {
    let times = &trace.snapshot_times;
    let count = times.len();
    if count < 4 {
        return Err(Error::InsufficientSnapshots { found: count, needed: 4 });
    }
    let last = times[count - 1];
    if s < -1e-12 || s > last * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("time {s} outside [0, {last}]")));
    }
    let upper = times.partition_point(|&t| t < s).clamp(1, count - 1);
    let start = upper.saturating_sub(2).min(count - 4);
    let idx: Vec<usize> = (start..start + 4).collect();
    let mut out = trace.snapshots[idx[0]].tensor().scale(0.0);
    for &i in &idx {
        let mut w = 1.0;
        for &j in &idx {
            if i != j {
                w *= (s - times[j]) / (times[i] - times[j]);
            }
        }
        out = out.axpy(w, trace.snapshots[i].tensor())?;
    }
    MetricField::new(out)
}

/// `g~(t) = e^{-2t} g((e^{2t} - 1)/2)` at the requested times, from a standard-flow trace.
pub fn homothety_transform(trace: &FlowTrace, times: &[f64]) -> Result<FlowTrace> {
    if trace.kind != FlowKind::Standard {
        return Err(Error::InvalidInput("homothety transform expects a standard-flow trace".into()));
    }
    if trace.snapshots.len() < 4 {
        return Err(Error::InsufficientSnapshots { found: trace.snapshots.len(), needed: 4 });
    }
    let mut snapshots = Vec::with_capacity(times.len());
    for &t in times {
        let s = 0.5 * ((2.0 * t).exp() - 1.0);
        let g = interpolate_snapshots(trace, s)?;
        snapshots.push(g.scaled((-2.0 * t).exp())?);
    }
    Ok(FlowTrace {
        kind: FlowKind::NegativeNormalized,
        dt: trace.dt,
        snapshot_times: times.to_vec(),
        snapshots,
        diagnostics: Vec::new(),
        events: Vec::new(),
        failure: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomothetyReport {
    pub times: Vec<f64>,
    pub c0_discrepancy: Vec<f64>,
    pub max_c0_discrepancy: f64,
    pub dt_standard: f64,
    pub dt_normalized: f64,
}

/// Runs the standard flow to `s = (e^{2T} - 1)/2` and the negatively normalized flow to `T`
/// from the same `g0`, and compares the transformed standard trajectory at the normalized
/// snapshot times.
pub fn homothety_check(g0: &MetricField, gauge: Gauge, t_final: f64, dt: f64, stride: usize) -> Result<HomothetyReport> {
    let s_final = 0.5 * ((2.0 * t_final).exp() - 1.0);
    let steps_s = (s_final / dt).ceil() as usize;
    let dt_s = s_final / steps_s as f64;
    let mut cfg_s = FlowConfig::new(FlowKind::Standard, s_final);
    cfg_s.gauge = gauge.clone();
    cfg_s.dt = DtPolicy::Fixed(dt_s);
    cfg_s.snapshot_stride = stride;
    cfg_s.monitors.every = steps_s.max(1);
    let standard = flow_run(g0, &cfg_s)?;
    let mut cfg_n = FlowConfig::new(FlowKind::NegativeNormalized, t_final);
    cfg_n.gauge = gauge;
    cfg_n.dt = DtPolicy::Fixed(dt.min(cfl_bound(g0, DEFAULT_CFL)));
    cfg_n.snapshot_stride = stride;
    cfg_n.monitors.every = usize::MAX / 2;
    let direct = flow_run(g0, &cfg_n)?;
    if let Some(f) = standard.failure.as_ref().or(direct.failure.as_ref()) {
        return Err(Error::InvalidInput(format!("flow halted: {f}")));
    }
    let transformed = homothety_transform(&standard, &direct.snapshot_times)?;
    let mut disc = Vec::new();
    for (a, b) in transformed.snapshots.iter().zip(&direct.snapshots) {
        disc.push(a.tensor().axpy(-1.0, b.tensor())?.max_abs());
    }
    Ok(HomothetyReport {
        times: direct.snapshot_times.clone(),
        max_c0_discrepancy: disc.iter().cloned().fold(0.0, f64::max),
        c0_discrepancy: disc,
        dt_standard: standard.dt,
        dt_normalized: direct.dt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub time: f64,
    pub measured: f64,
    pub analytic: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub increments: Vec<f64>,
    pub min_increment: f64,
    pub violations: usize,
    pub tolerance: f64,
    pub rates: Vec<RateComparison>,
    pub max_rate_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonitoredFunctional {
    MuPlus,
    Lambda,
}

/// Increments of the monitored functional, and for `mu_+` the central-difference rate
/// against the analytic integrand at interior monitor points.
pub fn monotonicity_monitor(trace: &FlowTrace, functional: MonitoredFunctional, tolerance: f64) -> Result<MonotonicityReport> {
    let pts: Vec<(f64, f64, Option<f64>)> = trace
        .diagnostics
        .iter()
        .filter_map(|d| match functional {
            MonitoredFunctional::MuPlus => Some((d.time, d.mu_plus?, d.mu_plus_rate)),
            MonitoredFunctional::Lambda => Some((d.time, d.lambda?, None)),
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("fewer than two monitored values".into()));
    }
    let increments: Vec<f64> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let min_increment = increments.iter().cloned().fold(f64::INFINITY, f64::min);
    let violations = increments.iter().filter(|&&d| d < -tolerance).count();
    let mut rates = Vec::new();
    for w in pts.windows(3) {
        let (t0, v0, _) = w[0];
        let (t1, _, r1) = w[1];
        let (t2, v2, _) = w[2];
        let uniform = ((t1 - t0) - (t2 - t1)).abs() <= 1e-9 * (t2 - t0);
        if let (Some(analytic), true) = (r1, uniform) {
            let measured = (v2 - v0) / (t2 - t0);
            rates.push(RateComparison {
                time: t1,
                measured,
                analytic,
                relative_gap: (measured - analytic).abs() / analytic.abs().max(1e-300),
            });
        }
    }
    let max_rate_gap = rates.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    Ok(MonotonicityReport { increments, min_increment, violations, tolerance, rates, max_rate_gap })
}

/// `g = a g_{S^p} + b g_{S^q}` with unit round factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSpheres {
    pub p: usize,
    pub q: usize,
    pub a: f64,
    pub b: f64,
}

impl ProductSpheres {
    pub fn new(p: usize, q: usize, a: f64, b: f64) -> Result<Self> {
        if p < 2 || q < 2 || !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidInput(format!("S^{p}(a={a}) x S^{q}(b={b})")));
        }
        Ok(ProductSpheres { p, q, a, b })
    }

    /// The Einstein member with the given Einstein constant.
    pub fn einstein(p: usize, q: usize, mu: f64) -> Result<Self> {
        Self::new(p, q, (p - 1) as f64 / mu, (q - 1) as f64 / mu)
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn scal(&self) -> f64 {
        let (p, q) = (self.p as f64, self.q as f64);
        p * (p - 1.0) / self.a + q * (q - 1.0) / self.b
    }

    pub fn volume(&self) -> f64 {
        sphere_volume(self.p as u32).value() * sphere_volume(self.q as u32).value()
            * self.a.powf(self.p as f64 / 2.0)
            * self.b.powf(self.q as f64 / 2.0)
    }

    pub fn csc(&self) -> CscData {
        CscData { dim: self.dim(), volume: self.volume(), scal: self.scal() }
    }

    /// Smallest nonzero Laplace eigenvalue `min(p/a, q/b)`.
    pub fn lambda_one(&self) -> f64 {
        (self.p as f64 / self.a).min(self.q as f64 / self.b)
    }

    /// Perelman's lambda; constant scalar curvature makes the minimizer constant.
    pub fn lambda_perelman(&self) -> f64 {
        self.scal()
    }

    /// Shrinker scale `n / (2 scal)`, valid while the constant function is a local minimizer
    /// of the shrinker functional, i.e. `lambda_1 >= scal / n`.
    pub fn tau(&self) -> Result<f64> {
        let n = self.dim() as f64;
        if self.lambda_one() < self.scal() / n {
            return Err(Error::InvalidInput(format!(
                "constant shrinker minimizer unstable: lambda_1 = {} < scal/n = {}",
                self.lambda_one(),
                self.scal() / n
            )));
        }
        entropy::tau_csc(&self.csc())
    }

    pub fn nu_minus(&self) -> Result<f64> {
        self.tau()?;
        entropy::nu_minus_csc(&self.csc())
    }

    /// `(a', b')` under the given flow.
    pub fn velocity(&self, kind: FlowKind) -> Result<(f64, f64)> {
        let (rp, rq) = ((self.p - 1) as f64, (self.q - 1) as f64);
        Ok(match kind {
            FlowKind::Standard => (-2.0 * rp, -2.0 * rq),
            FlowKind::NegativeNormalized => (-2.0 * rp - 2.0 * self.a, -2.0 * rq - 2.0 * self.b),
            FlowKind::TauFlow => {
                let tau = self.tau()?;
                (-2.0 * rp + self.a / tau, -2.0 * rq + self.b / tau)
            }
        })
    }

    fn shifted(&self, da: f64, db: f64) -> Result<Self> {
        Self::new(self.p, self.q, self.a + da, self.b + db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductTrace {
    pub times: Vec<f64>,
    pub states: Vec<ProductSpheres>,
    pub nu_minus: Vec<Option<f64>>,
    pub failure: Option<String>,
}

/// RK4 for the product-spheres ODE.
pub fn product_flow_run(init: ProductSpheres, kind: FlowKind, dt: f64, t_final: f64) -> Result<ProductTrace> {
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(Error::InvalidInput(format!("dt {dt}, T {t_final}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let dt = t_final / steps as f64;
    let mut s = init;
    let mut trace = ProductTrace { times: vec![0.0], states: vec![s], nu_minus: vec![s.nu_minus().ok()], failure: None };
    for step in 1..=steps {
        let r = (|| -> Result<ProductSpheres> {
            let k1 = s.velocity(kind)?;
            let k2 = s.shifted(0.5 * dt * k1.0, 0.5 * dt * k1.1)?.velocity(kind)?;
            let k3 = s.shifted(0.5 * dt * k2.0, 0.5 * dt * k2.1)?.velocity(kind)?;
            let k4 = s.shifted(dt * k3.0, dt * k3.1)?.velocity(kind)?;
            s.shifted(
                dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            )
        })();
        match r {
            Ok(next) => s = next,
            Err(e) => {
                trace.failure = Some(format!("t = {}: {e}", step as f64 * dt));
                return Ok(trace);
            }
        }
        trace.times.push(step as f64 * dt);
        trace.states.push(s);
        trace.nu_minus.push(s.nu_minus().ok());
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub amplitude: f64,
    pub escape_time: Option<f64>,
    pub final_distance: f64,
    /// `nu_-(g(t)) - nu_-(g_E)` at each step.
    pub gaps: Vec<f64>,
    pub gap_strictly_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub base: ProductSpheres,
    pub direction: (f64, f64),
    pub ball_radius: f64,
    pub runs: Vec<ProbeRun>,
    /// Smaller nonzero amplitudes escape strictly later.
    pub escape_times_ordered: bool,
}

/// Perturbs an Einstein product along `direction` and records when the tau-flow leaves the
/// relative ball `max(|a/a_E - 1|, |b/b_E - 1|) < ball_radius`.
pub fn instability_probe(
    base: ProductSpheres,
    direction: (f64, f64),
    amplitudes: &[f64],
    ball_radius: f64,
    dt: f64,
    t_max: f64,
) -> Result<ProbeReport> {
    let nu_e = base.nu_minus()?;
    let dist = |s: &ProductSpheres| (s.a / base.a - 1.0).abs().max((s.b / base.b - 1.0).abs());
    let mut runs = Vec::new();
    for &amp in amplitudes {
        let init = base.shifted(amp * direction.0 * base.a, amp * direction.1 * base.b)?;
        let tr = product_flow_run(init, FlowKind::TauFlow, dt, t_max)?;
        let mut escape_time = None;
        let mut gaps = Vec::new();
        for (t, (s, nu)) in tr.times.iter().zip(tr.states.iter().zip(&tr.nu_minus)) {
            if escape_time.is_none() && dist(s) >= ball_radius {
                escape_time = Some(*t);
            }
            match nu {
                Some(v) if escape_time.is_none() => gaps.push(v - nu_e),
                _ => {}
            }
        }
        let gap_strictly_increasing = amp == 0.0 || gaps.windows(2).all(|w| w[1] > w[0]);
        runs.push(ProbeRun {
            amplitude: amp,
            escape_time,
            final_distance: dist(tr.states.last().expect("nonempty")),
            gaps,
            gap_strictly_increasing,
        });
    }
    let mut sorted: Vec<&ProbeRun> = runs.iter().filter(|r| r.amplitude != 0.0).collect();
    sorted.sort_by(|x, y| x.amplitude.abs().total_cmp(&y.amplitude.abs()));
    let escape_times_ordered = sorted.windows(2).all(|w| match (w[0].escape_time, w[1].escape_time) {
        (Some(a), Some(b)) => a > b,
        (None, _) => true,
        (Some(_), None) => false,
    });
    Ok(ProbeReport { base, direction, ball_radius, runs, escape_times_ordered })
}
