//! Randomized checks of the estimates behind local well-posedness: the
//! quadratic-form bound of `A(u) = (1+u)∂x`, the Lipschitz bound of `A` from
//! `H^s` to `L²`, the conjugation remainder `B(u)`, the Lipschitz bounds of
//! the nonlocal term `f`, the product and commutator estimates, and an
//! experiment on continuous dependence of solutions on their data.
//!
//! Every estimator samples fields from the `H^s` ball, evaluates a ratio
//! `lhs / rhs`, and reports its maximum and median. Sample `i` draws its
//! fields from the ChaCha stream `(seed, i·m + j)`, so results do not depend
//! on evaluation order and the first `n` samples of a `2n` run coincide with
//! an `n` run. A report is `stable` when doubling the sample count moves the
//! maximum by less than 25%.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{f_nonlocal, FluxVariant, ModelParams, RhsChoice};
use crate::spectral::{
    bessel_potential, derivative, forward, inverse_real, product, Field, Grid, SpectralError, Spectrum,
};
use crate::timestep::{integrate, StepError, StepperConfig, Termination};

/// Allowed relative drift of `max_ratio` under sample doubling.
pub const STABILITY_DRIFT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("index {index} outside the admissible range {range}")]
    InvalidIndexRange { index: f64, range: String },
    #[error("every sample was degenerate")]
    DegenerateSample,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub s: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub spectral_decay_margin: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { s: 2.0, radius: 1.0, n_samples: 200, seed: 42, spectral_decay_margin: 0.6 }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.s > 1.5) {
            return Err(HarnessError::InvalidSpec(format!("s must exceed 3/2, got {}", self.s)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(HarnessError::InvalidSpec(format!("radius must be positive, got {}", self.radius)));
        }
        if self.n_samples < 2 {
            return Err(HarnessError::InvalidSpec(format!("n_samples must be >= 2, got {}", self.n_samples)));
        }
        if !(self.spectral_decay_margin > 0.5) {
            return Err(HarnessError::InvalidSpec(format!(
                "spectral_decay_margin must exceed 1/2, got {}",
                self.spectral_decay_margin
            )));
        }
        Ok(())
    }

    pub fn with_radius(&self, radius: f64) -> SampleSpec {
        SampleSpec { radius, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub s: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub stable: bool,
    pub params_digest: String,
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs `ratio` over `2·n_samples` indices and summarizes the first half.
fn estimate<F>(label: String, spec: &SampleSpec, extra: &str, ratio: F) -> Result<EstimateReport, HarnessError>
where
    F: Fn(u64) -> Result<Option<f64>, HarnessError> + Sync,
{
    let n = spec.n_samples as u64;
    let all: Vec<Option<f64>> = (0..2 * n).into_par_iter().map(&ratio).collect::<Result<Vec<_>, _>>()?;
    let first: Vec<f64> = all[..n as usize].iter().flatten().copied().collect();
    if first.is_empty() {
        return Err(HarnessError::DegenerateSample);
    }
    let max1 = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max2 = all.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = first.clone();
    sorted.sort_by(f64::total_cmp);
    let stable = max1.is_finite() && max2.is_finite() && (max2 - max1).abs() <= STABILITY_DRIFT * max1.abs();
    let params_digest = digest(&format!(
        "{label}|s={}|radius={}|margin={}|seed={}|{extra}",
        spec.s, spec.radius, spec.spectral_decay_margin, spec.seed
    ));
    Ok(EstimateReport {
        label,
        s: spec.s,
        radius: spec.radius,
        n_samples: first.len(),
        seed: spec.seed,
        max_ratio: max1,
        median_ratio: median(&sorted),
        stable,
        params_digest,
    })
}

/// Random field with `û_k = z_k (1+ξ_k²)^{−(s+margin)/2}` for `0 < |k| ≤ n/3`
/// (real Gaussian at `k = 0`, zero above the 2/3 cutoff and at Nyquist),
/// rescaled to `‖u‖_s = radius·r` with `r` uniform in `(0, 1]`.
pub fn random_sobolev_field(grid: &Arc<Grid>, spec: &SampleSpec, index: u64) -> Field {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let n = grid.n();
    let decay = 0.5 * (spec.s + spec.spectral_decay_margin);
    let cutoff = grid.dealias_cutoff().min(n as i64 / 2 - 1);
    let mut s = Spectrum::zeros(grid.clone());
    let w0: f64 = rng.sample(StandardNormal);
    s.set_mode(0, Complex64::new(w0, 0.0));
    for k in 1..=cutoff {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let xi = grid.wavenumbers()[k as usize];
        let c = Complex64::new(re, im) * (std::f64::consts::FRAC_1_SQRT_2 * (1.0 + xi * xi).powf(-decay));
        s.set_mode(k, c);
        s.set_mode(-k, c.conj());
    }
    let r = 1.0 - rng.random::<f64>();
    let norm = s.sobolev_norm(spec.s);
    let scale = spec.radius * r / norm;
    for c in s.coeffs_mut() {
        *c *= scale;
    }
    inverse_real(&s)
}

/// Random direction with `‖u‖_s = 1`.
pub fn unit_sobolev_field(grid: &Arc<Grid>, spec: &SampleSpec, index: u64) -> Field {
    let u = random_sobolev_field(grid, spec, index);
    let norm = forward(&u).sobolev_norm(spec.s);
    u.scale(1.0 / norm)
}

/// Result of [`accretivity_lower_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccretivityReport {
    pub n_tests: usize,
    pub seed: u64,
    /// `min_w ⟨A(u)w, w⟩ / ‖w‖²`.
    pub min_quadratic_form: f64,
    /// `−½ max|u_x|`.
    pub lower_bound: f64,
    /// `max_w |⟨A(u)w,w⟩ + ½∫u_x w²| / (‖w‖²(1 + max|u_x|))`.
    pub max_identity_residual: f64,
}

impl AccretivityReport {
    pub fn bound_holds(&self, tol: f64) -> bool {
        self.min_quadratic_form >= self.lower_bound - tol
    }

    pub fn identity_holds(&self, tol: f64) -> bool {
        self.max_identity_residual <= tol
    }
}

/// `(⟨(1+u)w_x, w⟩, ½∫u_x w²)` by exact quadrature.
pub fn accretivity_terms(u: &Field, w: &Field) -> (f64, f64) {
    let wx = derivative(w, 1);
    let ux = derivative(u, 1);
    let form = wx.zip_with(u, |a, b| (1.0 + b) * a).inner(w);
    let half = 0.5 * ux.inner(&w.pointwise_mul(w));
    (form, half)
}

/// Quadratic-form lower bound `⟨A(u)w, w⟩ ≥ −½ max|u_x| ‖w‖²` over random `w`,
/// with the integration-by-parts identity `⟨(1+u)w_x, w⟩ = −½∫u_x w²` as
/// the oracle.
pub fn accretivity_lower_bound(u: &Field, n_tests: usize, seed: u64) -> AccretivityReport {
    let spec = SampleSpec { seed, ..SampleSpec::default() };
    let max_ux = derivative(u, 1).max_abs();
    let results: Vec<(f64, f64)> = (0..n_tests as u64)
        .into_par_iter()
        .map(|i| {
            let w = random_sobolev_field(u.grid(), &spec, i);
            let w2 = w.inner(&w);
            let (form, half) = accretivity_terms(u, &w);
            (form / w2, (form + half).abs() / (w2 * (1.0 + max_ux)))
        })
        .collect();
    AccretivityReport {
        n_tests,
        seed,
        min_quadratic_form: results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        lower_bound: -0.5 * max_ux,
        max_identity_residual: results.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}

/// Accretivity over independent pairs `(u_i, w_i)` drawn from streams
/// `2i, 2i+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccretivityPairs {
    pub n_pairs: usize,
    pub seed: u64,
    /// `max |⟨(1+u)w_x, w⟩ + ½∫u_x w²| / (‖w‖²(1 + max|u_x|))`.
    pub max_identity_residual: f64,
    pub median_identity_residual: f64,
    /// `min (⟨A(u)w,w⟩/‖w‖² + ½max|u_x|)`; the bound holds when `≥ −tol`.
    pub min_bound_margin: f64,
}

impl AccretivityPairs {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_identity_residual <= tol && self.min_bound_margin >= -tol
    }

    /// The ratio columns carry the normalized identity residual; `stable`
    /// records whether identity and bound both hold within `tol`.
    pub fn to_report(&self, spec: &SampleSpec, tol: f64) -> EstimateReport {
        EstimateReport {
            label: "accretivity_identity".into(),
            s: spec.s,
            radius: spec.radius,
            n_samples: self.n_pairs,
            seed: self.seed,
            max_ratio: self.max_identity_residual,
            median_ratio: self.median_identity_residual,
            stable: self.holds(tol),
            params_digest: digest(&format!(
                "accretivity|s={}|radius={}|margin={}|seed={}",
                spec.s, spec.radius, spec.spectral_decay_margin, spec.seed
            )),
        }
    }
}

pub fn accretivity_pairs(
    grid: &Arc<Grid>,
    spec: &SampleSpec,
    n_pairs: usize,
) -> Result<AccretivityPairs, HarnessError> {
    spec.validate()?;
    let results: Vec<(f64, f64)> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let u = random_sobolev_field(grid, spec, 2 * i);
            let w = random_sobolev_field(grid, spec, 2 * i + 1);
            let max_ux = derivative(&u, 1).max_abs();
            let w2 = w.inner(&w);
            let (form, half) = accretivity_terms(&u, &w);
            ((form + half).abs() / (w2 * (1.0 + max_ux)), form / w2 + 0.5 * max_ux)
        })
        .collect();
    let mut residuals: Vec<f64> = results.iter().map(|r| r.0).collect();
    residuals.sort_by(f64::total_cmp);
    Ok(AccretivityPairs {
        n_pairs,
        seed: spec.seed,
        max_identity_residual: residuals.last().copied().unwrap_or(0.0),
        median_identity_residual: if residuals.is_empty() { 0.0 } else { median(&residuals) },
        min_bound_margin: results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
    })
}

/// `‖(u−v)·∂x w‖ / (‖u−v‖·‖w‖_s)`, `None` when `‖u−v‖ < 1e−12`.
pub fn a2_ratio(u: &Field, v: &Field, w: &Field, s: f64) -> Option<f64> {
    let d = u.sub(v);
    let dn = forward(&d).sobolev_norm(0.0);
    if dn < 1e-12 {
        return None;
    }
    let lhs = forward(&product(&d, &derivative(w, 1))).sobolev_norm(0.0);
    Some(lhs / (dn * forward(w).sobolev_norm(s)))
}

/// Lipschitz bound of `A(u) = (1+u)∂x` from `H^s` into `L²`.
pub fn a2_operator_ratio(spec: &SampleSpec, grid: &Arc<Grid>) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    estimate("a_operator_lipschitz".into(), spec, "", |i| {
        let u = random_sobolev_field(grid, spec, 3 * i);
        let v = random_sobolev_field(grid, spec, 3 * i + 1);
        let w = random_sobolev_field(grid, spec, 3 * i + 2);
        Ok(a2_ratio(&u, &v, &w, spec.s))
    })
}

/// `B(u)w = Λ^s(u·∂x Λ^{−s} w) − u·∂x w`.
pub fn apply_b(u: &Field, w: &Field, s: f64) -> Field {
    let inner = derivative(&bessel_potential(w, -s), 1);
    let first = bessel_potential(&product(u, &inner), s);
    first.sub(&product(u, &derivative(w, 1)))
}

/// `‖B(u)w‖ / (‖u‖_s ‖w‖)`.
pub fn b_bound_ratio(spec: &SampleSpec, grid: &Arc<Grid>) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    estimate("b_remainder_bound".into(), spec, "", |i| {
        let u = random_sobolev_field(grid, spec, 2 * i);
        let w = random_sobolev_field(grid, spec, 2 * i + 1);
        Ok(b_ratio(&u, &w, spec.s))
    })
}

fn b_ratio(u: &Field, w: &Field, s: f64) -> Option<f64> {
    let un = forward(u).sobolev_norm(s);
    let wn = forward(w).sobolev_norm(0.0);
    if un < 1e-12 || wn < 1e-12 {
        return None;
    }
    Some(forward(&apply_b(u, w, s)).sobolev_norm(0.0) / (un * wn))
}

/// `‖(B(u) − B(v))w‖ / (‖u−v‖_s ‖w‖)`.
pub fn b_difference_ratio(spec: &SampleSpec, grid: &Arc<Grid>) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    estimate("b_remainder_lipschitz".into(), spec, "", |i| {
        let u = random_sobolev_field(grid, spec, 3 * i);
        let v = random_sobolev_field(grid, spec, 3 * i + 1);
        let w = random_sobolev_field(grid, spec, 3 * i + 2);
        Ok(b_difference(&u, &v, &w, spec.s))
    })
}

pub fn b_difference(u: &Field, v: &Field, w: &Field, s: f64) -> Option<f64> {
    let dn = forward(&u.sub(v)).sobolev_norm(s);
    let wn = forward(w).sobolev_norm(0.0);
    if dn < 1e-12 || wn < 1e-12 {
        return None;
    }
    let lhs = apply_b(u, w, s).sub(&apply_b(v, w, s));
    Some(forward(&lhs).sobolev_norm(0.0) / (dn * wn))
}

/// Norm used by [`f_lipschitz_ratio`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormIndex {
    L2,
    Sobolev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FLipschitzReport {
    pub report: EstimateReport,
    /// `max ‖f(u)‖_s` over the sampled fields.
    pub f_bound: f64,
}

/// `‖f(u) − f(v)‖ / ‖u − v‖` in `L²` or `H^s`, plus `max ‖f(u)‖_s`.
pub fn f_lipschitz_ratio(
    spec: &SampleSpec,
    grid: &Arc<Grid>,
    p: &ModelParams,
    variant: FluxVariant,
    norm: NormIndex,
) -> Result<FLipschitzReport, HarnessError> {
    spec.validate()?;
    p.validate()?;
    let sn = match norm {
        NormIndex::L2 => 0.0,
        NormIndex::Sobolev => spec.s,
    };
    let tag = match norm {
        NormIndex::L2 => "f_lipschitz_l2",
        NormIndex::Sobolev => "f_lipschitz_hs",
    };
    let extra = format!("{p:?}|{}", variant.label());
    let label = format!("{tag}_{}", variant.label());
    let bounds = std::sync::Mutex::new(0.0f64);
    let report = estimate(label, spec, &extra, |i| {
        let u = random_sobolev_field(grid, spec, 2 * i);
        let v = random_sobolev_field(grid, spec, 2 * i + 1);
        let fu = f_nonlocal(&u, p, variant)?;
        let fv = f_nonlocal(&v, p, variant)?;
        if i < spec.n_samples as u64 {
            let m = forward(&fu).sobolev_norm(spec.s).max(forward(&fv).sobolev_norm(spec.s));
            let mut b = bounds.lock().unwrap();
            *b = b.max(m);
        }
        let dn = forward(&u.sub(&v)).sobolev_norm(sn);
        if dn < 1e-12 {
            return Ok(None);
        }
        Ok(Some(forward(&fu.sub(&fv)).sobolev_norm(sn) / dn))
    })?;
    Ok(FLipschitzReport { report, f_bound: bounds.into_inner().unwrap() })
}

/// `M = max ‖f(u)‖_s` as its own report.
pub fn f_bound_report(
    spec: &SampleSpec,
    grid: &Arc<Grid>,
    p: &ModelParams,
    variant: FluxVariant,
) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    p.validate()?;
    let extra = format!("{p:?}|{}", variant.label());
    estimate(format!("f_bound_{}", variant.label()), spec, &extra, |i| {
        let u = random_sobolev_field(grid, spec, 2 * i);
        Ok(Some(forward(&f_nonlocal(&u, p, variant)?).sobolev_norm(spec.s)))
    })
}

/// `‖P(f·g)‖_t / (‖f‖_s ‖g‖_t)`, `None` if either factor vanishes.
pub fn product_ratio(f: &Field, g: &Field, s: f64, t: f64) -> Option<f64> {
    let fs = forward(f).sobolev_norm(s);
    let gt = forward(g).sobolev_norm(t);
    if fs < 1e-12 || gt < 1e-12 {
        return None;
    }
    Some(forward(&product(f, g)).sobolev_norm(t) / (fs * gt))
}

pub fn product_estimate_ratio(spec: &SampleSpec, grid: &Arc<Grid>, t: f64) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    if !(t > -spec.s && t <= spec.s) {
        return Err(HarnessError::InvalidIndexRange { index: t, range: format!("(-{0}, {0}]", spec.s) });
    }
    estimate(format!("product_estimate_t={t}"), spec, &format!("t={t}"), |i| {
        let f = random_sobolev_field(grid, spec, 2 * i);
        let g = random_sobolev_field(grid, spec, 2 * i + 1);
        Ok(product_ratio(&f, &g, spec.s, t))
    })
}

/// `Λ^{−s̃} [Λ^{s̃+t̃+1}, M_f] Λ^{−t̃} ω`.
pub fn commutator(f: &Field, omega: &Field, s_tilde: f64, t_tilde: f64) -> Field {
    let a = s_tilde + t_tilde + 1.0;
    let w = bessel_potential(omega, -t_tilde);
    let left = bessel_potential(&product(f, &w), a);
    let right = product(f, &bessel_potential(&w, a));
    bessel_potential(&left.sub(&right), -s_tilde)
}

pub fn commutator_ratio(f: &Field, omega: &Field, s: f64, s_tilde: f64, t_tilde: f64) -> Option<f64> {
    let fs = forward(f).sobolev_norm(s);
    let wn = forward(omega).sobolev_norm(0.0);
    if fs < 1e-12 || wn < 1e-12 {
        return None;
    }
    Some(forward(&commutator(f, omega, s_tilde, t_tilde)).sobolev_norm(0.0) / (fs * wn))
}

pub fn commutator_estimate_ratio(
    spec: &SampleSpec,
    grid: &Arc<Grid>,
    s_tilde: f64,
    t_tilde: f64,
) -> Result<EstimateReport, HarnessError> {
    spec.validate()?;
    let bound = spec.s - 1.0;
    for idx in [s_tilde, t_tilde] {
        if !(idx.abs() <= bound) {
            return Err(HarnessError::InvalidIndexRange { index: idx, range: format!("[-{bound}, {bound}]") });
        }
    }
    let tag = format!("s~={s_tilde},t~={t_tilde}");
    estimate(format!("commutator_estimate_{tag}"), spec, &tag, |i| {
        let f = random_sobolev_field(grid, spec, 2 * i);
        let omega = random_sobolev_field(grid, spec, 2 * i + 1);
        Ok(commutator_ratio(&f, &omega, spec.s, s_tilde, t_tilde))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityEntry {
    pub delta: f64,
    /// `sup_t ‖u − v‖_s / δ`; `None` for `δ = 0` or when a run stopped early.
    pub amplification: Option<f64>,
    pub termination: Option<Termination>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub s: f64,
    pub t_end: f64,
    pub base_termination: Termination,
    pub entries: Vec<ContinuityEntry>,
}

impl ContinuityReport {
    /// Any run (base or perturbed) that stopped before `t_end`.
    pub fn propagated_blowup(&self) -> bool {
        self.base_termination != Termination::ReachedTEnd
            || self.entries.iter().any(|e| e.termination.is_some_and(|t| t != Termination::ReachedTEnd))
    }

    /// Amplification of the entry with perturbation size `delta`.
    pub fn amplification(&self, delta: f64) -> Option<f64> {
        self.entries.iter().find(|e| e.delta == delta).and_then(|e| e.amplification)
    }

    /// All amplifications finite, neighbouring ones within `factor` of each
    /// other, and `δ·D(δ)` shrinking with `δ`.
    pub fn is_consistent(&self, factor: f64) -> bool {
        if self.propagated_blowup() {
            return false;
        }
        let mut pts: Vec<(f64, f64)> =
            self.entries.iter().filter_map(|e| e.amplification.map(|a| (e.delta, a))).collect();
        if pts.iter().any(|(_, a)| !a.is_finite()) {
            return false;
        }
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        pts.windows(2).all(|w| {
            let r = w[0].1 / w[1].1;
            r >= 1.0 / factor && r <= factor && w[1].0 * w[1].1 < w[0].0 * w[0].1
        })
    }
}

/// Perturbs `u0` by `δ·e` for a unit `H^s` direction `e`, solves both
/// problems on `[0, t_end]` with identical settings and reports the
/// amplification `D(δ) = sup_t ‖u − v‖_s / δ` over the shared output times.
pub fn continuous_dependence(
    u0: &Field,
    deltas: &[f64],
    p: &ModelParams,
    cfg: &StepperConfig,
    t_end: f64,
    s: f64,
    seed: u64,
) -> Result<ContinuityReport, HarnessError> {
    let run_cfg = StepperConfig { t_end, dt: cfg.dt.min(t_end), snapshot_stride: 1, monitor_s: s, ..cfg.clone() };
    let spec = SampleSpec { s, seed, ..SampleSpec::default() };
    let direction = unit_sobolev_field(u0.grid(), &spec, 0);
    let base = integrate(u0, p, &run_cfg, RhsChoice::Direct)?;

    let entries = deltas
        .par_iter()
        .map(|&delta| -> Result<ContinuityEntry, HarnessError> {
            if delta == 0.0 {
                return Ok(ContinuityEntry { delta, amplification: None, termination: None });
            }
            let v0 = u0.axpy(delta, &direction);
            let pert = integrate(&v0, p, &run_cfg, RhsChoice::Direct)?;
            let ok = pert.termination == Termination::ReachedTEnd && base.termination == Termination::ReachedTEnd;
            let amplification = ok.then(|| {
                let mut sup = 0.0f64;
                let mut j = 0;
                for (t, u) in base.times.iter().zip(&base.snapshots) {
                    while j < pert.times.len() && pert.times[j] < *t - 1e-12 {
                        j += 1;
                    }
                    if j < pert.times.len() && (pert.times[j] - t).abs() <= 1e-12 {
                        sup = sup.max(forward(&u.sub(&pert.snapshots[j])).sobolev_norm(s));
                    }
                }
                sup / delta.abs()
            });
            Ok(ContinuityEntry { delta, amplification, termination: Some(pert.termination) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ContinuityReport { s, t_end, base_termination: base.termination, entries })
}

/// Multiplier-inequality outcome reshaped as a report line.
pub fn multiplier_report(mu: f64, beta: f64, xi_max: f64, n_samples: usize) -> Result<EstimateReport, HarnessError> {
    let chk = crate::spectral::multiplier_inequality_check(mu, beta, xi_max, n_samples)?;
    Ok(EstimateReport {
        label: "multiplier_inequality".into(),
        s: 0.0,
        radius: xi_max,
        n_samples: chk.n_samples,
        seed: 0,
        max_ratio: chk.max_ratio,
        median_ratio: chk.median_ratio,
        stable: chk.passed(),
        params_digest: digest(&format!("mu={mu}|beta={beta}|xi_max={xi_max}")),
    })
}
