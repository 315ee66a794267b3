//! Explicit time integration of `u_t = R(u)`: classical RK4 at fixed step and
//! the Dormand–Prince 5(4) pair with error-per-step control. Both respect an
//! advective CFL cap and stop on breaking, non-finite data or step underflow.

use serde::{Deserialize, Serialize};

use crate::model::{self, ModelParams, RhsChoice};
use crate::spectral::{forward, Field, SpectralError};

/// Snapshot budget per run; past it the stride doubles and every other stored
/// snapshot is dropped.
pub const MAX_SNAPSHOTS: usize = 10_000;

/// Consecutive rejected adaptive steps tolerated before giving up.
const MAX_REJECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("non-finite values produced by the right-hand side")]
    NonFinite,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("run terminated early ({0:?}) before reaching t_end")]
    Incomplete(Termination),
}

/// A right-hand side `u ↦ R(u)`.
pub trait Rhs {
    fn eval(&self, u: &Field) -> Result<Field, StepError>;

    /// Largest advective speed for the CFL cap; `0` disables the cap.
    fn advective_speed(&self, _u: &Field) -> f64 {
        0.0
    }
}

impl<F> Rhs for F
where
    F: Fn(&Field) -> Field,
{
    fn eval(&self, u: &Field) -> Result<Field, StepError> {
        Ok(self(u))
    }
}

/// The model equation in either form.
#[derive(Clone, Copy, Debug)]
pub struct ModelRhs {
    pub params: ModelParams,
    pub choice: RhsChoice,
}

impl Rhs for ModelRhs {
    fn eval(&self, u: &Field) -> Result<Field, StepError> {
        Ok(model::rhs(u, &self.params, self.choice)?)
    }

    /// `|α/β| + |εγ/β|·max|u|`.
    fn advective_speed(&self, u: &Field) -> f64 {
        let p = &self.params;
        (p.alpha / p.beta).abs() + (p.epsilon * p.gamma / p.beta).abs() * u.max_abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    AdaptiveEmbedded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub snapshot_stride: usize,
    /// `None` selects `50·(initial max|u_x| + 1)`.
    pub slope_threshold: Option<f64>,
    /// Sobolev index of the `hs` monitor.
    pub monitor_s: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            method: Method::Rk4Fixed,
            dt: 1e-3,
            t_end: 1.0,
            atol: 1e-10,
            rtol: 1e-8,
            safety: 0.9,
            dt_min: 1e-10,
            cfl: 0.5,
            snapshot_stride: 10,
            slope_threshold: None,
            monitor_s: 2.0,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |m: String| Err(StepError::InvalidConfig(m));
        let finite = [self.dt, self.t_end, self.atol, self.rtol, self.safety, self.dt_min, self.cfl, self.monitor_s];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("stepper values must be finite".into());
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt && self.dt <= self.t_end) {
            return bad(format!(
                "need 0 < dt_min < dt <= t_end, got dt_min={}, dt={}, t_end={}",
                self.dt_min, self.dt, self.t_end
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety must lie in (0, 1], got {}", self.safety));
        }
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return bad("atol and rtol must be positive".into());
        }
        if !(self.cfl > 0.0) {
            return bad("cfl must be positive".into());
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be >= 1".into());
        }
        if let Some(th) = self.slope_threshold {
            if !(th.is_finite() && th > 0.0) {
                return bad("slope_threshold must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTEnd,
    BreakingDetected,
    NonFinite,
    StepUnderflow,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::ReachedTEnd => "reached_t_end",
            Termination::BreakingDetected => "breaking_detected",
            Termination::NonFinite => "non_finite",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub l2: f64,
    pub hs: f64,
    pub min_ux: f64,
    pub max_abs_u: f64,
    pub max_abs_ux: f64,
}

impl MonitorRecord {
    pub fn of(u: &Field, t: f64, dt: f64, s: f64) -> MonitorRecord {
        let spec = forward(u);
        let ind = model::breaking_indicator(u);
        MonitorRecord {
            t,
            dt,
            mass: u.integral(),
            l2: spec.sobolev_norm(0.0),
            hs: spec.sobolev_norm(s),
            min_ux: ind.min_ux,
            max_abs_u: ind.max_abs_u,
            max_abs_ux: ind.max_abs_ux,
        }
    }

    fn is_finite(&self) -> bool {
        [self.mass, self.l2, self.hs, self.min_ux, self.max_abs_u, self.max_abs_ux].iter().all(|v| v.is_finite())
    }
}

/// Result of [`integrate`]. `times[i]` is the time of `snapshots[i]`; the
/// first snapshot is the initial state and the last one the final state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// One record at `t = 0` followed by one per accepted step.
    pub monitors: Vec<MonitorRecord>,
    pub termination: Termination,
    pub breaking_time: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub snapshot_stride: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }
}

fn to_field(template: &Field, values: Vec<f64>) -> Result<Field, StepError> {
    Field::new(template.grid().clone(), values).map_err(|_| StepError::NonFinite)
}

fn eval_checked<R: Rhs + ?Sized>(rhs: &R, u: &Field) -> Result<Field, StepError> {
    let k = rhs.eval(u)?;
    if k.is_finite() {
        Ok(k)
    } else {
        Err(StepError::NonFinite)
    }
}

/// `u + dt·Σ w_i k_i`.
fn combine(u: &Field, dt: f64, terms: &[(f64, &Field)]) -> Result<Field, StepError> {
    let mut out = u.values().to_vec();
    for (w, k) in terms {
        if *w == 0.0 {
            continue;
        }
        for (o, kv) in out.iter_mut().zip(k.values()) {
            *o += dt * w * kv;
        }
    }
    to_field(u, out)
}

/// One classical RK4 step (four right-hand-side evaluations).
pub fn step_rk4<R: Rhs + ?Sized>(u: &Field, dt: f64, rhs: &R) -> Result<Field, StepError> {
    let k1 = eval_checked(rhs, u)?;
    let k2 = eval_checked(rhs, &combine(u, 0.5 * dt, &[(1.0, &k1)])?)?;
    let k3 = eval_checked(rhs, &combine(u, 0.5 * dt, &[(1.0, &k2)])?)?;
    let k4 = eval_checked(rhs, &combine(u, dt, &[(1.0, &k3)])?)?;
    combine(u, dt / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)])
}

// Dormand–Prince 5(4) tableau.
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const DP_E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

#[derive(Clone, Debug)]
pub struct AdaptiveStep {
    /// Fifth-order solution when accepted, the input otherwise.
    pub u_next: Field,
    pub dt_next: f64,
    pub err_est: f64,
    pub accepted: bool,
}

/// One Dormand–Prince attempt. The error estimate is the RMS of the embedded
/// difference weighted by `atol + rtol·|u|`; the step is accepted iff it is
/// at most 1, and `dt_next = dt·clamp(safety·err^{−1/5}, 0.2, 5)`.
pub fn step_adaptive<R: Rhs + ?Sized>(
    u: &Field,
    dt: f64,
    rhs: &R,
    atol: f64,
    rtol: f64,
    safety: f64,
) -> Result<AdaptiveStep, StepError> {
    let mut ks: Vec<Field> = Vec::with_capacity(7);
    ks.push(eval_checked(rhs, u)?);
    for row in DP_A.iter() {
        let terms: Vec<(f64, &Field)> = row.iter().copied().zip(ks.iter()).collect();
        let stage = combine(u, dt, &terms)?;
        ks.push(eval_checked(rhs, &stage)?);
    }
    let terms: Vec<(f64, &Field)> = DP_A[5].iter().copied().zip(ks.iter()).collect();
    let u5 = combine(u, dt, &terms)?;

    let n = u.len();
    let mut sum = 0.0;
    for j in 0..n {
        let diff: f64 = dt * DP_E.iter().zip(&ks).map(|(e, k)| e * k.values()[j]).sum::<f64>();
        let w = atol + rtol * u.values()[j].abs();
        sum += (diff / w).powi(2);
    }
    let err_est = (sum / n as f64).sqrt();
    if !err_est.is_finite() {
        return Err(StepError::NonFinite);
    }
    let factor = if err_est == 0.0 { 5.0 } else { (safety * err_est.powf(-0.2)).clamp(0.2, 5.0) };
    let accepted = err_est <= 1.0;
    Ok(AdaptiveStep { u_next: if accepted { u5 } else { u.clone() }, dt_next: dt * factor, err_est, accepted })
}

struct SnapshotBuffer {
    stride: usize,
    times: Vec<f64>,
    fields: Vec<Field>,
}

impl SnapshotBuffer {
    fn push(&mut self, step: usize, t: f64, u: &Field) {
        if !step.is_multiple_of(self.stride) {
            return;
        }
        self.times.push(t);
        self.fields.push(u.clone());
        if self.fields.len() > MAX_SNAPSHOTS {
            self.stride *= 2;
            // Keeps snapshots whose step index is a multiple of the new stride
            // (the stored ones sit at multiples of the old stride).
            let keep: Vec<bool> = (0..self.fields.len()).map(|i| i % 2 == 0).collect();
            let mut it = keep.iter();
            self.times.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            self.fields.retain(|_| *it.next().unwrap());
        }
    }

    fn finish(&mut self, t: f64, u: &Field) {
        if self.times.last().is_some_and(|&last| last == t) {
            *self.fields.last_mut().unwrap() = u.clone();
        } else {
            self.times.push(t);
            self.fields.push(u.clone());
        }
    }
}

/// Breaking fires on the first accepted step with `max|u_x|` above the
/// threshold. Grid-sampled slopes of a moving front jitter from step to step,
/// so no monotonicity over a window is required.
fn breaking_detected(monitors: &[MonitorRecord], threshold: f64) -> bool {
    monitors.last().is_some_and(|r| r.max_abs_ux > threshold)
}

/// Integrates from `u0` over `[0, cfg.t_end]`. Failures are reported through
/// [`Trajectory::termination`], never as errors; only an invalid
/// configuration returns `Err`.
pub fn integrate_with<R: Rhs + ?Sized>(u0: &Field, cfg: &StepperConfig, rhs: &R) -> Result<Trajectory, StepError> {
    cfg.validate()?;
    let h = u0.grid().spacing();
    let first = MonitorRecord::of(u0, 0.0, 0.0, cfg.monitor_s);
    let threshold = cfg.slope_threshold.unwrap_or(50.0 * (first.max_abs_ux + 1.0));
    let mut monitors = vec![first];
    let mut snaps = SnapshotBuffer { stride: cfg.snapshot_stride, times: vec![], fields: vec![] };
    snaps.push(0, 0.0, u0);

    let mut u = u0.clone();
    let mut t = 0.0;
    // Compensation term of the Kahan sum for `t`; keeps `t_end/dt` steps exact.
    let mut t_comp = 0.0;
    let mut dt_try = cfg.dt;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut consecutive_rejections = 0usize;
    let mut breaking_time = None;

    let termination = loop {
        if t >= cfg.t_end {
            break Termination::ReachedTEnd;
        }
        let speed = rhs.advective_speed(&u);
        let cap = if speed > 0.0 { cfg.cfl * h / speed } else { f64::INFINITY };
        let remaining = cfg.t_end - t;
        let mut step = dt_try.min(cap);
        let last = remaining <= step * (1.0 + 1e-9);
        if last {
            step = remaining;
        } else if step < cfg.dt_min {
            break Termination::StepUnderflow;
        }

        let next = match cfg.method {
            Method::Rk4Fixed => step_rk4(&u, step, rhs).map(Some),
            Method::AdaptiveEmbedded => step_adaptive(&u, step, rhs, cfg.atol, cfg.rtol, cfg.safety).map(|res| {
                dt_try = res.dt_next;
                res.accepted.then_some(res.u_next)
            }),
        };
        let u_next = match next {
            Ok(Some(v)) => v,
            Ok(None) => {
                rejected += 1;
                consecutive_rejections += 1;
                if dt_try < cfg.dt_min || consecutive_rejections > MAX_REJECTIONS {
                    break Termination::StepUnderflow;
                }
                continue;
            }
            Err(StepError::NonFinite) => break Termination::NonFinite,
            Err(e) => return Err(e),
        };
        consecutive_rejections = 0;
        accepted += 1;
        if last {
            t = cfg.t_end;
        } else {
            let y = step - t_comp;
            let sum = t + y;
            t_comp = (sum - t) - y;
            t = sum;
        }
        u = u_next;

        let rec = MonitorRecord::of(&u, t, step, cfg.monitor_s);
        let finite = rec.is_finite();
        monitors.push(rec);
        if !finite {
            break Termination::NonFinite;
        }
        snaps.push(accepted, t, &u);
        if breaking_detected(&monitors, threshold) {
            breaking_time = Some(t);
            break Termination::BreakingDetected;
        }
    };

    snaps.finish(t, &u);
    Ok(Trajectory {
        times: snaps.times,
        snapshots: snaps.fields,
        monitors,
        termination,
        breaking_time,
        accepted_steps: accepted,
        rejected_steps: rejected,
        snapshot_stride: snaps.stride,
    })
}

/// Integrates the model equation with the chosen right-hand side.
pub fn integrate(u0: &Field, p: &ModelParams, cfg: &StepperConfig, choice: RhsChoice) -> Result<Trajectory, StepError> {
    p.validate()?;
    integrate_with(u0, cfg, &ModelRhs { params: *p, choice })
}

/// Errors of a fixed-step study and the fitted slope of `log e` vs `log dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderStudy {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when some error is zero, i.e. the order is not measurable.
    pub slope: Option<f64>,
}

impl OrderStudy {
    pub fn is_degenerate(&self) -> bool {
        self.slope.is_none()
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn final_state_at<R: Rhs + ?Sized>(u0: &Field, cfg: &StepperConfig, dt: f64, rhs: &R) -> Result<Field, StepError> {
    let run_cfg = StepperConfig {
        method: Method::Rk4Fixed,
        dt,
        dt_min: dt.min(cfg.dt_min) * 1e-3,
        snapshot_stride: usize::MAX / 4,
        slope_threshold: Some(f64::MAX),
        ..cfg.clone()
    };
    let traj = integrate_with(u0, &run_cfg, rhs)?;
    if traj.termination != Termination::ReachedTEnd {
        return Err(StepError::Incomplete(traj.termination));
    }
    // A binding CFL cap would silently change the step size under study.
    let expected = (cfg.t_end / dt - 1e-9).ceil() as usize;
    if traj.accepted_steps != expected {
        return Err(StepError::InvalidConfig(format!(
            "step {dt} was reduced by the CFL cap; use smaller steps for order studies"
        )));
    }
    Ok(traj.final_state().clone())
}

/// Fixed-step convergence study. `dts` must hold at least three steps in
/// geometric progression. The reference is `exact` when given, otherwise a
/// run at a quarter of the smallest step.
pub fn observed_order_with<R: Rhs + ?Sized>(
    u0: &Field,
    cfg: &StepperConfig,
    rhs: &R,
    dts: &[f64],
    exact: Option<&Field>,
) -> Result<OrderStudy, StepError> {
    if cfg.method != Method::Rk4Fixed {
        return Err(StepError::InvalidConfig("order studies need the fixed-step method".into()));
    }
    if dts.len() < 3 || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(StepError::InvalidConfig("need at least three positive steps".into()));
    }
    let ratio = dts[1] / dts[0];
    if dts.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) || ratio == 1.0 {
        return Err(StepError::InvalidConfig("steps must form a geometric progression".into()));
    }
    let reference = match exact {
        Some(f) => f.clone(),
        None => {
            let dt_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
            final_state_at(u0, cfg, dt_min / 4.0, rhs)?
        }
    };
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let u = final_state_at(u0, cfg, dt, rhs)?;
        errors.push(forward(&u.sub(&reference)).sobolev_norm(0.0));
    }
    let slope = if errors.iter().all(|e| *e > 0.0) {
        let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        Some(fit_slope(&lx, &ly))
    } else {
        None
    };
    Ok(OrderStudy { dts: dts.to_vec(), errors, slope })
}

/// Self-convergence order of the model equation.
pub fn observed_order(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    choice: RhsChoice,
    dts: &[f64],
) -> Result<OrderStudy, StepError> {
    p.validate()?;
    observed_order_with(u0, cfg, &ModelRhs { params: *p, choice }, dts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{derivative, Grid};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(2.0 * PI, n).unwrap()
    }

    fn cfg(dt: f64, t_end: f64) -> StepperConfig {
        StepperConfig { dt, t_end, dt_min: dt * 1e-6, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(StepperConfig::default().validate().is_ok());
        let bad = StepperConfig { dt: 2.0, t_end: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { safety: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { dt_min: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { snapshot_stride: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { rtol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rk4_with_zero_rhs_is_identity() {
        let u = Field::from_fn(grid(16), f64::sin).unwrap();
        let zero = |w: &Field| Field::zeros(w.grid().clone());
        let next = step_rk4(&u, 0.1, &zero).unwrap();
        assert_eq!(next.values(), u.values());
    }

    #[test]
    fn rk4_on_linear_growth_matches_taylor_polynomial() {
        let u = Field::constant(grid(8), 1.0);
        let id = |w: &Field| w.clone();
        let dt = 0.1f64;
        let next = step_rk4(&u, dt, &id).unwrap();
        let m = 1.0 + dt + dt * dt / 2.0 + dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
        assert!(next.values().iter().all(|v| (v - m).abs() < 1e-15));
    }

    #[test]
    fn rk4_uses_four_evaluations() {
        use std::cell::Cell;
        let calls = Cell::new(0);
        let u = Field::constant(grid(8), 1.0);
        let counting = |w: &Field| {
            calls.set(calls.get() + 1);
            w.clone()
        };
        step_rk4(&u, 0.1, &counting).unwrap();
        assert_eq!(calls.get(), 4);
    }

    #[test]
    fn rk4_reports_non_finite() {
        let u = Field::constant(grid(8), 1.0);
        let nan = |w: &Field| w.map(|_| f64::NAN);
        assert_eq!(step_rk4(&u, 0.1, &nan).unwrap_err(), StepError::NonFinite);
        assert_eq!(step_adaptive(&u, 0.1, &nan, 1e-8, 1e-8, 0.9).unwrap_err(), StepError::NonFinite);
    }

    #[test]
    fn adaptive_zero_rhs_grows_step() {
        let u = Field::from_fn(grid(16), f64::sin).unwrap();
        let zero = |w: &Field| Field::zeros(w.grid().clone());
        let res = step_adaptive(&u, 0.01, &zero, 1e-8, 1e-8, 0.9).unwrap();
        assert!(res.accepted);
        assert_eq!(res.err_est, 0.0);
        assert!((res.dt_next - 0.05).abs() < 1e-15);
    }

    #[test]
    fn adaptive_is_fifth_order_on_linear_growth() {
        let u = Field::constant(grid(8), 1.0);
        let id = |w: &Field| w.clone();
        let res = step_adaptive(&u, 0.1, &id, 1e-3, 1e-3, 0.9).unwrap();
        assert!(res.accepted);
        assert!((res.u_next.values()[0] - 0.1f64.exp()).abs() < 1e-8);
        let rejected = step_adaptive(&u, 1.0, &id, 1e-12, 1e-12, 0.9).unwrap();
        assert!(!rejected.accepted);
        assert!(rejected.dt_next < 1.0);
        assert_eq!(rejected.u_next.values(), u.values());
    }

    #[test]
    fn transport_rotation_converges_at_fourth_order() {
        // w_t = −c w_x with u0 = sin x returns to itself after T = 2π/c.
        let c = 1.0;
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let transport = move |w: &Field| derivative(w, 1).scale(-c);
        let t_end = 2.0 * PI / c;
        let base = StepperConfig { t_end, dt: t_end / 50.0, dt_min: 1e-9, ..Default::default() };
        let dts = [t_end / 50.0, t_end / 100.0, t_end / 200.0];
        let study = observed_order_with(&u0, &base, &transport, &dts, Some(&u0)).unwrap();
        let slope = study.slope.unwrap();
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}, errors {:?}", study.errors);
    }

    #[test]
    fn zero_rhs_order_is_degenerate() {
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let zero = |w: &Field| Field::zeros(w.grid().clone());
        let study = observed_order_with(&u0, &cfg(1e-2, 1.0), &zero, &[1e-2, 5e-3, 2.5e-3], None).unwrap();
        assert!(study.errors.iter().all(|e| *e == 0.0));
        assert!(study.is_degenerate());
    }

    #[test]
    fn order_study_rejects_bad_inputs() {
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let zero = |w: &Field| Field::zeros(w.grid().clone());
        assert!(observed_order_with(&u0, &cfg(1e-2, 1.0), &zero, &[1e-2, 5e-3], None).is_err());
        assert!(observed_order_with(&u0, &cfg(1e-2, 1.0), &zero, &[1e-2, 5e-3, 1e-3], None).is_err());
        let adaptive = StepperConfig { method: Method::AdaptiveEmbedded, ..cfg(1e-2, 1.0) };
        assert!(observed_order_with(&u0, &adaptive, &zero, &[1e-2, 5e-3, 2.5e-3], None).is_err());
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let g = grid(32);
        let traj = integrate(&Field::zeros(g), &ModelParams::default(), &cfg(1e-2, 0.5), RhsChoice::Direct).unwrap();
        assert_eq!(traj.termination, Termination::ReachedTEnd);
        assert!((traj.final_time() - 0.5).abs() < 1e-12);
        assert!(traj.snapshots.iter().all(|s| s.max_abs() == 0.0));
        assert!(traj.monitors.iter().all(|m| m.l2 == 0.0 && m.mass == 0.0));
    }

    #[test]
    fn constant_state_is_stationary() {
        let g = grid(32);
        let u0 = Field::constant(g, 0.4);
        let traj = integrate(&u0, &ModelParams::default(), &cfg(1e-2, 0.3), RhsChoice::Direct).unwrap();
        assert_eq!(traj.termination, Termination::ReachedTEnd);
        let end = traj.final_state();
        assert!(end.values().iter().all(|v| (v - 0.4).abs() < 1e-13));
    }

    #[test]
    fn times_are_increasing_and_snapshots_strided() {
        let g = grid(32);
        let u0 = Field::from_fn(g, |x| 0.1 * x.sin()).unwrap();
        let c = StepperConfig { snapshot_stride: 3, ..cfg(1e-2, 0.1) };
        let traj = integrate(&u0, &ModelParams::default(), &c, RhsChoice::Direct).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.times.len(), traj.snapshots.len());
        // steps 0, 3, 6, 9 plus the final state at step 10
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.monitors.len(), traj.accepted_steps + 1);
        assert_eq!(traj.final_time(), 0.1);
    }

    #[test]
    fn snapshot_buffer_thins_when_full() {
        let g = grid(8);
        let u = Field::zeros(g);
        let mut buf = SnapshotBuffer { stride: 1, times: vec![], fields: vec![] };
        for step in 0..=MAX_SNAPSHOTS {
            buf.push(step, step as f64, &u);
        }
        assert_eq!(buf.stride, 2);
        assert!(buf.fields.len() <= MAX_SNAPSHOTS);
        assert!(buf.times.iter().all(|t| (*t as usize).is_multiple_of(2)));
    }

    #[test]
    fn adaptive_run_reaches_end() {
        let g = grid(32);
        let u0 = Field::from_fn(g, |x| 0.1 * x.sin()).unwrap();
        let c = StepperConfig { method: Method::AdaptiveEmbedded, ..cfg(1e-2, 1.0) };
        let traj = integrate(&u0, &ModelParams::default(), &c, RhsChoice::Direct).unwrap();
        assert_eq!(traj.termination, Termination::ReachedTEnd);
        assert_eq!(traj.final_time(), 1.0);
    }

    #[test]
    fn nan_rhs_terminates_as_non_finite() {
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let nan = |w: &Field| w.map(|_| f64::NAN);
        let traj = integrate_with(&u0, &cfg(1e-2, 1.0), &nan).unwrap();
        assert_eq!(traj.termination, Termination::NonFinite);
    }

    #[test]
    fn runaway_growth_is_reported_as_breaking() {
        // w_t = w: the slope grows monotonically and crosses the threshold.
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let grow = |w: &Field| w.scale(1.0);
        let c = StepperConfig { slope_threshold: Some(5.0), ..cfg(1e-2, 10.0) };
        let traj = integrate_with(&u0, &c, &grow).unwrap();
        assert_eq!(traj.termination, Termination::BreakingDetected);
        let t = traj.breaking_time.unwrap();
        assert!((t - 5f64.ln()).abs() < 0.02, "breaking at {t}");
        let tail = &traj.monitors[traj.monitors.len() - 10..];
        assert!(tail.windows(2).all(|w| w[1].max_abs_ux > w[0].max_abs_ux));
    }

    #[test]
    fn breaking_fires_strictly_above_threshold() {
        let rec = |v: f64| MonitorRecord {
            t: 0.0,
            dt: 1.0,
            mass: 0.0,
            l2: 0.0,
            hs: 0.0,
            min_ux: -v,
            max_abs_u: 0.0,
            max_abs_ux: v,
        };
        assert!(!breaking_detected(&[], 1.0));
        assert!(!breaking_detected(&[rec(10.0)], 10.0));
        assert!(breaking_detected(&[rec(1.0), rec(10.5)], 10.0));
    }

    #[test]
    fn huge_cfl_restriction_underflows() {
        let g = grid(16);
        let u0 = Field::from_fn(g, f64::sin).unwrap();
        let p = ModelParams::default();
        let c = StepperConfig { cfl: 1e-12, ..cfg(1e-2, 1.0) };
        let traj = integrate(&u0, &p, &c, RhsChoice::Direct).unwrap();
        assert_eq!(traj.termination, Termination::StepUnderflow);
    }

    #[test]
    fn fit_slope_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 1.0).collect();
        assert!((fit_slope(&x, &y) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn long_fixed_runs_take_exactly_t_end_over_dt_steps() {
        let g = grid(8);
        let u0 = Field::constant(g, 1.0);
        let zero = |u: &Field| Field::zeros(u.grid().clone());
        for (dt, t_end) in [(1e-2, 200.0), (1e-3, 10.0), (0.1, 7.0)] {
            let c = StepperConfig { dt, t_end, dt_min: dt * 1e-3, snapshot_stride: 1_000_000, ..Default::default() };
            let traj = integrate_with(&u0, &c, &zero).unwrap();
            assert_eq!(traj.accepted_steps, (t_end / dt).round() as usize);
            assert_eq!(traj.final_time(), t_end);
        }
    }
}
