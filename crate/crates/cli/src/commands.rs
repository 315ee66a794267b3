//! Command drivers. Each returns an [`Outcome`]; the caller writes `run.json`
//! last.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use wavelab_core::harness::{
    a2_operator_ratio, accretivity_pairs, b_bound_ratio, b_difference_ratio, commutator_estimate_ratio, f_bound_report,
    f_lipschitz_ratio, multiplier_report, product_estimate_ratio, random_sobolev_field, EstimateReport, HarnessError,
    NormIndex, SampleSpec,
};
use wavelab_core::model::{equivalence_residual, resolution_warning, FluxVariant};
use wavelab_core::spectral::{band_limit, forward, Field, Grid};
use wavelab_core::timestep::{integrate, observed_order, Method, StepError, StepperConfig, Termination};

use crate::config::{InitialCondition, RunConfig};
use crate::exit;
use crate::output::{cell, lemmas_jsonl, monitors_csv, write_atomic, write_snapshots, FinalNorms, Table};

/// Identity tolerance of the accretivity check.
pub const ACCRETIVITY_TOL: f64 = 1e-10;
/// Admissible observed temporal order.
pub const ORDER_WINDOW: (f64, f64) = (3.8, 4.2);
/// Maximum L² distance between the working grid and the reference grid.
pub const SPATIAL_TOL: f64 = 1e-8;
/// Maximum Rederived equivalence residual.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Result of a command, before `run.json` is written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub exit_code: i32,
    pub status: String,
    pub termination: Option<Termination>,
    pub breaking_time: Option<f64>,
    pub warnings: Vec<String>,
    pub final_norms: Option<FinalNorms>,
    /// Human-readable summary lines.
    pub messages: Vec<String>,
}

impl Outcome {
    fn ok(status: &str) -> Outcome {
        Outcome { exit_code: exit::OK, status: status.into(), ..Default::default() }
    }

    fn fail(code: i32, status: impl Into<String>) -> Outcome {
        Outcome { exit_code: code, status: status.into(), ..Default::default() }
    }
}

fn io_fail(e: std::io::Error) -> Outcome {
    Outcome::fail(exit::NUMERICAL, format!("output error: {e}"))
}

fn step_fail(e: StepError) -> Outcome {
    match e {
        StepError::InvalidConfig(m) => Outcome::fail(exit::CONFIG, format!("invalid configuration: {m}")),
        other => Outcome::fail(exit::NUMERICAL, format!("numerical failure: {other}")),
    }
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::ReachedTEnd => exit::OK,
        Termination::BreakingDetected => exit::BREAKING,
        Termination::NonFinite | Termination::StepUnderflow => exit::NUMERICAL,
    }
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Outcome {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let u0 = match cfg.initial_field(&grid) {
        Ok(u) => u,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let warnings: Vec<String> = resolution_warning(&u0).into_iter().collect();
    let traj = match integrate(&u0, &cfg.model(), &cfg.stepper_config(), cfg.rhs.choice()) {
        Ok(t) => t,
        Err(e) => return step_fail(e),
    };
    if let Err(e) = write_atomic(&out.join("monitors.csv"), monitors_csv(&traj.monitors).as_bytes()) {
        return io_fail(e);
    }
    if cfg.outputs.write_snapshots {
        if let Err(e) = write_snapshots(out, &traj) {
            return io_fail(e);
        }
    }
    let last = traj.monitors.last().expect("trajectory has an initial record");
    let mut messages = vec![format!(
        "termination {} at t = {} after {} accepted / {} rejected steps",
        traj.termination.label(),
        traj.final_time(),
        traj.accepted_steps,
        traj.rejected_steps
    )];
    if let Some(tb) = traj.breaking_time {
        messages.push(format!("breaking detected at t = {tb}"));
    }
    Outcome {
        exit_code: termination_code(traj.termination),
        status: traj.termination.label().into(),
        termination: Some(traj.termination),
        breaking_time: traj.breaking_time,
        warnings,
        final_norms: Some(FinalNorms::from(last)),
        messages,
    }
}

/// Every estimator for one `(s, radius)` in a fixed order.
fn lemma_reports(cfg: &RunConfig, grid: &Arc<Grid>, s: f64, radius: f64) -> Result<Vec<EstimateReport>, HarnessError> {
    let spec = cfg.lemma_spec(s, radius);
    let p = cfg.model();
    let mut out = vec![
        accretivity_pairs(grid, &spec, cfg.lemmas.accretivity_pairs)?.to_report(&spec, ACCRETIVITY_TOL),
        a2_operator_ratio(&spec, grid)?,
        b_bound_ratio(&spec, grid)?,
        b_difference_ratio(&spec, grid)?,
    ];
    for variant in [FluxVariant::Rederived, FluxVariant::AsPrinted] {
        out.push(f_bound_report(&spec, grid, &p, variant)?);
        out.push(f_lipschitz_ratio(&spec, grid, &p, variant, NormIndex::L2)?.report);
        out.push(f_lipschitz_ratio(&spec, grid, &p, variant, NormIndex::Sobolev)?.report);
    }
    for &t in cfg.lemmas.product_t.iter().filter(|&&t| t > -s && t <= s) {
        out.push(product_estimate_ratio(&spec, grid, t)?);
    }
    let m = s - 1.0;
    for (a, b) in [(0.0, 0.0), (0.0, m), (m, m), (-m, m), (m, -m)] {
        out.push(commutator_estimate_ratio(&spec, grid, a, b)?);
    }
    Ok(out)
}

/// Parameter pairs of the multiplier-inequality sweep.
pub fn multiplier_pairs(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> =
        [0.01, 0.05, 0.1].iter().flat_map(|&mu| [-0.5, -1.0, -2.0].into_iter().map(move |beta| (mu, beta))).collect();
    let own = (cfg.params.mu, cfg.params.beta);
    if !pairs.contains(&own) {
        pairs.push(own);
    }
    pairs
}

/// f-Lipschitz labels whose median decreases somewhere along the radius sweep.
pub fn median_monotonicity_violations(reports: &[EstimateReport]) -> Vec<String> {
    let mut keys: Vec<(String, u64)> = reports
        .iter()
        .filter(|r| r.label.starts_with("f_lipschitz"))
        .map(|r| (r.label.clone(), r.s.to_bits()))
        .collect();
    keys.dedup();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for (label, s_bits) in keys {
        let mut series: Vec<(f64, f64)> = reports
            .iter()
            .filter(|r| r.label == label && r.s.to_bits() == s_bits)
            .map(|r| (r.radius, r.median_ratio))
            .collect();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        if series.windows(2).any(|w| w[1].1 < w[0].1) {
            let meds: Vec<String> = series.iter().map(|(r, m)| format!("{r}:{m:.6}")).collect();
            out.push(format!("{label} at s = {}: medians {}", f64::from_bits(s_bits), meds.join(", ")));
        }
    }
    out
}

pub fn verify_lemmas(cfg: &RunConfig, out: &Path) -> Outcome {
    let grid = match Grid::new(cfg.lemmas.length, cfg.lemmas.n) {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, format!("lemmas: {e}")),
    };
    let items: Vec<(f64, f64)> =
        cfg.lemmas.s_values.iter().flat_map(|&s| cfg.lemmas.radii.iter().map(move |&r| (s, r))).collect();
    let batches: Result<Vec<Vec<EstimateReport>>, HarnessError> =
        items.iter().map(|&(s, r)| lemma_reports(cfg, &grid, s, r)).collect();
    let mut reports = match batches {
        Ok(b) => b.into_iter().flatten().collect::<Vec<_>>(),
        Err(HarnessError::InvalidSpec(m)) => return Outcome::fail(exit::CONFIG, format!("lemmas: {m}")),
        Err(e) => return Outcome::fail(exit::VERIFICATION, format!("estimator failed: {e}")),
    };
    for (mu, beta) in multiplier_pairs(cfg) {
        match multiplier_report(mu, beta, cfg.lemmas.multiplier_xi_max, cfg.lemmas.multiplier_samples) {
            Ok(r) => reports.push(r),
            Err(e) => return Outcome::fail(exit::CONFIG, format!("multiplier_inequality (mu={mu}, beta={beta}): {e}")),
        }
    }
    if let Err(e) = write_atomic(&out.join("lemmas.jsonl"), lemmas_jsonl(&reports).as_bytes()) {
        return io_fail(e);
    }

    let mut failures: Vec<String> = reports
        .iter()
        .filter(|r| !r.stable || !r.max_ratio.is_finite() || !r.median_ratio.is_finite())
        .map(|r| format!("{} (s = {}, radius = {})", r.label, r.s, r.radius))
        .collect();
    // B(u) − B(v) = B(u − v): the fitted bound must cover fresh differences.
    for bd in reports.iter().filter(|r| r.label == "b_remainder_lipschitz") {
        let bound = reports
            .iter()
            .find(|r| r.label == "b_remainder_bound" && r.s == bd.s && r.radius == bd.radius)
            .map(|r| r.max_ratio)
            .unwrap_or(f64::NAN);
        if !(bd.max_ratio <= bound) {
            failures.push(format!(
                "b_remainder_lipschitz (s = {}, radius = {}): {} exceeds b_remainder_bound {}",
                bd.s, bd.radius, bd.max_ratio, bound
            ));
        }
    }
    let warnings: Vec<String> = median_monotonicity_violations(&reports)
        .into_iter()
        .map(|v| format!("f-Lipschitz median not monotone in radius: {v}"))
        .collect();
    let mut outcome = if failures.is_empty() {
        Outcome::ok("all estimators stable")
    } else {
        let mut o = Outcome::fail(exit::VERIFICATION, format!("failed: {}", failures.join("; ")));
        o.messages = failures.iter().map(|f| format!("FAILED {f}")).collect();
        o
    };
    outcome.messages.push(format!("{} reports written to lemmas.jsonl", reports.len()));
    outcome.warnings = warnings;
    outcome
}

pub fn convergence(cfg: &RunConfig, out: &Path) -> Outcome {
    if cfg.stepper.method != Method::Rk4Fixed {
        return Outcome::fail(exit::CONFIG, "stepper.method: convergence needs rk4_fixed");
    }
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let u0 = match cfg.initial_field(&grid) {
        Ok(u) => u,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let warnings: Vec<String> = resolution_warning(&u0).into_iter().collect();
    let p = cfg.model();
    let conv = &cfg.convergence;
    let base = StepperConfig { t_end: conv.t_end, dt: conv.spatial_dt, ..cfg.stepper_config() };

    let study = match observed_order(&u0, &p, &base, cfg.rhs.choice(), &conv.dts) {
        Ok(s) => s,
        Err(e) => return step_fail(e),
    };

    let fine_grid = match Grid::new(cfg.grid.length, conv.reference_n) {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, format!("convergence.reference_n: {e}")),
    };
    let u0_fine = match cfg.initial_field(&fine_grid) {
        Ok(u) => u,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let runs: Vec<_> = [&u0, &u0_fine].par_iter().map(|u| integrate(u, &p, &base, cfg.rhs.choice())).collect();
    let mut finals = Vec::with_capacity(2);
    for run in runs {
        match run {
            Ok(t) if t.termination == Termination::ReachedTEnd => finals.push(t.final_state().clone()),
            Ok(t) => {
                return Outcome::fail(
                    exit::NUMERICAL,
                    format!("spatial study stopped early: {}", t.termination.label()),
                )
            }
            Err(e) => return step_fail(e),
        }
    }
    let reference = match finals[1].resample(&grid) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(exit::NUMERICAL, e.to_string()),
    };
    let spatial_error = forward(&finals[0].sub(&reference)).sobolev_norm(0.0);

    let mut table = Table::new("study,resolution,error,slope");
    let slope_cell = study.slope.map(cell).unwrap_or_else(|| "none".into());
    for (dt, e) in study.dts.iter().zip(&study.errors) {
        table.row(&["temporal".into(), cell(*dt), cell(*e), slope_cell.clone()]);
    }
    table.row(&["spatial".into(), grid.n().to_string(), cell(spatial_error), String::new()]);
    table.row(&["spatial_reference".into(), conv.reference_n.to_string(), cell(0.0), String::new()]);
    if let Err(e) = table.write(&out.join("convergence.csv")) {
        return io_fail(e);
    }

    let order_ok = study.slope.is_some_and(|s| s >= ORDER_WINDOW.0 && s <= ORDER_WINDOW.1);
    let spatial_ok = spatial_error <= SPATIAL_TOL;
    let summary = format!("temporal slope {slope_cell}, spatial error {spatial_error:.3e} (n = {})", grid.n());
    let mut outcome = if order_ok && spatial_ok {
        Outcome::ok("converged")
    } else {
        let mut why = Vec::new();
        if !order_ok {
            why.push(format!("temporal slope {slope_cell} outside [{}, {}]", ORDER_WINDOW.0, ORDER_WINDOW.1));
        }
        if !spatial_ok {
            why.push(format!("spatial error {spatial_error:.3e} > {SPATIAL_TOL:e}"));
        }
        Outcome::fail(exit::VERIFICATION, why.join("; "))
    };
    outcome.messages.push(summary);
    outcome.warnings = warnings;
    outcome
}

/// Twenty fields: five structured ones and `n_random` random ones, all band
/// limited to `n/8` so that dealiased products are exact.
pub fn equivalence_battery(cfg: &RunConfig, grid: &Arc<Grid>) -> Result<Vec<(String, Field)>, String> {
    let l = grid.length();
    let k0 = 2.0 * PI / l;
    let kmax = (grid.n() / 8) as i64;
    let from_fn = |f: &dyn Fn(f64) -> f64| Field::from_fn(grid.clone(), f).map_err(|e| e.to_string());
    let mut out = vec![
        ("zero".to_string(), Field::zeros(grid.clone())),
        ("constant".to_string(), Field::constant(grid.clone(), 0.5)),
        ("sine_k3".to_string(), from_fn(&|x| 0.5 * (3.0 * k0 * x).sin())?),
        ("two_mode".to_string(), from_fn(&|x| 0.3 * (k0 * x).cos() + 0.2 * (5.0 * k0 * x).sin())?),
    ];
    let ic = cfg.initial_field(grid).map_err(|e| e.to_string())?;
    out.push(("initial_condition".to_string(), band_limit(&ic, kmax)));
    let spec = SampleSpec {
        s: cfg.equivalence.s,
        radius: cfg.equivalence.radius,
        seed: cfg.equivalence.seed,
        ..SampleSpec::default()
    };
    for i in 0..cfg.equivalence.n_random {
        let u = band_limit(&random_sobolev_field(grid, &spec, i as u64), kmax);
        out.push((format!("random_{i:02}"), u));
    }
    Ok(out)
}

pub fn equivalence(cfg: &RunConfig, out: &Path) -> Outcome {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let battery = match equivalence_battery(cfg, &grid) {
        Ok(b) => b,
        Err(e) => return Outcome::fail(exit::CONFIG, e),
    };
    let p = cfg.model();
    let mut table = Table::new("label,variant,residual");
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (label, u) in &battery {
        for variant in [FluxVariant::Rederived, FluxVariant::AsPrinted] {
            let r = match equivalence_residual(u, &p, variant) {
                Ok(r) => r,
                Err(e) => return Outcome::fail(exit::NUMERICAL, format!("{label}: {e}")),
            };
            table.row(&[label.clone(), variant.label().into(), cell(r)]);
            if variant == FluxVariant::Rederived {
                worst = worst.max(r);
                if !(r <= EQUIVALENCE_TOL) {
                    failed.push(label.clone());
                }
            }
        }
    }
    if let Err(e) = table.write(&out.join("equivalence.csv")) {
        return io_fail(e);
    }
    let mut outcome = if failed.is_empty() {
        Outcome::ok("rederived flux equivalent")
    } else {
        Outcome::fail(
            exit::VERIFICATION,
            format!("rederived residual above {EQUIVALENCE_TOL:e} for {}", failed.join(", ")),
        )
    };
    outcome.messages.push(format!("{} fields, worst rederived residual {worst:.3e}", battery.len()));
    outcome
}

fn with_amplitude(ic: &InitialCondition, amp: f64) -> InitialCondition {
    match ic.clone() {
        InitialCondition::Gaussian { center, width, .. } => InitialCondition::Gaussian { amp, center, width },
        InitialCondition::Sech2 { center, width, .. } => InitialCondition::Sech2 { amp, center, width },
        InitialCondition::Sine { k, .. } => InitialCondition::Sine { amp, k },
        other => other,
    }
}

struct BreakingRow {
    amp: f64,
    termination: String,
    breaking_time: Option<f64>,
    min_ux_end: Option<f64>,
}

pub fn breaking_search(cfg: &RunConfig, out: &Path) -> Outcome {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return Outcome::fail(exit::CONFIG, e.to_string()),
    };
    let p = cfg.model();
    let stepper = cfg.stepper_config();
    let rows: Vec<BreakingRow> = cfg
        .breaking
        .amplitudes
        .par_iter()
        .map(|&amp| {
            let mut run_cfg = cfg.clone();
            run_cfg.ic = with_amplitude(&cfg.ic, amp);
            let u0 = match run_cfg.initial_field(&grid) {
                // Catalog entries without an amplitude are scaled instead.
                Ok(u)
                    if matches!(cfg.ic, InitialCondition::RandomSobolev { .. } | InitialCondition::FromFile { .. }) =>
                {
                    u.scale(amp)
                }
                Ok(u) => u,
                Err(e) => {
                    return BreakingRow {
                        amp,
                        termination: format!("error: {e}"),
                        breaking_time: None,
                        min_ux_end: None,
                    }
                }
            };
            match integrate(&u0, &p, &stepper, cfg.rhs.choice()) {
                Ok(t) => BreakingRow {
                    amp,
                    termination: t.termination.label().into(),
                    breaking_time: t.breaking_time,
                    min_ux_end: t.monitors.last().map(|m| m.min_ux),
                },
                Err(e) => {
                    BreakingRow { amp, termination: format!("error: {e}"), breaking_time: None, min_ux_end: None }
                }
            }
        })
        .collect();

    let mut table = Table::new("amp,termination,breaking_time,min_ux_end");
    for r in &rows {
        table.row(&[
            cell(r.amp),
            r.termination.replace(',', ";"),
            r.breaking_time.map(cell).unwrap_or_else(|| "none".into()),
            r.min_ux_end.map(cell).unwrap_or_else(|| "none".into()),
        ]);
    }
    if let Err(e) = table.write(&out.join("breaking.csv")) {
        return io_fail(e);
    }

    let mut warnings = Vec::new();
    let mut broken: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.breaking_time.map(|t| (r.amp.abs(), t))).collect();
    broken.sort_by(|a, b| a.0.total_cmp(&b.0));
    if broken.windows(2).any(|w| w[1].1 > w[0].1) {
        warnings.push("breaking time is not monotonically decreasing in amplitude".into());
    }
    let mut outcome = Outcome::ok("sweep complete");
    outcome.messages.push(format!("{} of {} amplitudes broke", broken.len(), rows.len()));
    outcome.warnings = warnings;
    outcome
}
