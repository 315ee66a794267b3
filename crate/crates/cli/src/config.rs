//! Run configuration: a TOML file with dotted sections such as
//! `params.beta = -1.0`. Every section is optional and falls back to the
//! library defaults; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wavelab_core::harness::{random_sobolev_field, SampleSpec};
use wavelab_core::model::{FluxVariant, ModelParams, RhsChoice};
use wavelab_core::spectral::{Field, Grid};
use wavelab_core::timestep::{Method, StepperConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { length: 40.0, n: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub iota: f64,
    pub kappa: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection::from(ModelParams::default())
    }
}

impl From<ModelParams> for ParamsSection {
    fn from(p: ModelParams) -> Self {
        ParamsSection {
            epsilon: p.epsilon,
            mu: p.mu,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
            iota: p.iota,
            kappa: p.kappa,
        }
    }
}

impl ParamsSection {
    pub fn model(&self) -> ModelParams {
        ModelParams {
            epsilon: self.epsilon,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            iota: self.iota,
            kappa: self.kappa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Gaussian { amp: f64, center: f64, width: f64 },
    Sech2 { amp: f64, center: f64, width: f64 },
    Sine { amp: f64, k: f64 },
    RandomSobolev { s: f64, radius: f64, seed: u64 },
    FromFile { path: PathBuf },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Gaussian { amp: 1.0, center: 20.0, width: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperSection {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub snapshot_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_threshold: Option<f64>,
}

impl Default for StepperSection {
    fn default() -> Self {
        let d = StepperConfig::default();
        StepperSection {
            method: d.method,
            dt: d.dt,
            t_end: d.t_end,
            atol: d.atol,
            rtol: d.rtol,
            safety: d.safety,
            dt_min: d.dt_min,
            cfl: d.cfl,
            snapshot_stride: d.snapshot_stride,
            slope_threshold: d.slope_threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    #[default]
    Direct,
    SplitAsPrinted,
    SplitRederived,
}

impl RhsKind {
    pub fn choice(self) -> RhsChoice {
        match self {
            RhsKind::Direct => RhsChoice::Direct,
            RhsKind::SplitAsPrinted => RhsChoice::Split(FluxVariant::AsPrinted),
            RhsKind::SplitRederived => RhsChoice::Split(FluxVariant::Rederived),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    pub out_dir: PathBuf,
    pub write_snapshots: bool,
    pub monitor_s: f64,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection { out_dir: PathBuf::from("wavelab_out"), write_snapshots: false, monitor_s: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmasSection {
    pub length: f64,
    pub n: usize,
    pub s_values: Vec<f64>,
    pub radii: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub spectral_decay_margin: f64,
    /// Product-estimate indices; values outside `(−s, s]` are skipped per `s`.
    pub product_t: Vec<f64>,
    pub accretivity_pairs: usize,
    pub multiplier_xi_max: f64,
    pub multiplier_samples: usize,
}

impl Default for LemmasSection {
    fn default() -> Self {
        LemmasSection {
            length: 2.0 * PI,
            n: 128,
            s_values: vec![1.6, 2.0],
            radii: vec![0.5, 1.0, 2.0],
            n_samples: 200,
            seed: 42,
            spectral_decay_margin: 0.6,
            product_t: vec![-1.0, 0.0, 1.0, 1.6, 2.0],
            accretivity_pairs: 100,
            multiplier_xi_max: 1e4,
            multiplier_samples: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub dts: Vec<f64>,
    pub t_end: f64,
    pub reference_n: usize,
    /// Step used by both runs of the spatial study.
    pub spatial_dt: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection { dts: vec![0.04, 0.02, 0.01, 0.005], t_end: 1.0, reference_n: 1024, spatial_dt: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakingSection {
    pub amplitudes: Vec<f64>,
}

impl Default for BreakingSection {
    fn default() -> Self {
        BreakingSection { amplitudes: (1..=10).map(|i| i as f64 / 10.0).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceSection {
    pub n_random: usize,
    pub seed: u64,
    pub s: f64,
    pub radius: f64,
}

impl Default for EquivalenceSection {
    fn default() -> Self {
        EquivalenceSection { n_random: 15, seed: 7, s: 2.0, radius: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rhs: RhsKind,
    pub grid: GridSection,
    pub params: ParamsSection,
    pub ic: InitialCondition,
    pub stepper: StepperSection,
    pub outputs: OutputsSection,
    pub lemmas: LemmasSection,
    pub convergence: ConvergenceSection,
    pub breaking: BreakingSection,
    pub equivalence: EquivalenceSection,
    /// Directory of the config file; `from_file` paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.to_path_buf(), message },
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::from("<config>"), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Replaces every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        self.lemmas.seed = seed;
        self.equivalence.seed = seed;
        if let InitialCondition::RandomSobolev { seed: s, .. } = &mut self.ic {
            *s = seed;
        }
    }

    pub fn model(&self) -> ModelParams {
        self.params.model()
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            method: s.method,
            dt: s.dt,
            t_end: s.t_end,
            atol: s.atol,
            rtol: s.rtol,
            safety: s.safety,
            dt_min: s.dt_min,
            cfl: s.cfl,
            snapshot_stride: s.snapshot_stride,
            slope_threshold: s.slope_threshold,
            monitor_s: self.outputs.monitor_s,
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ConfigError> {
        Grid::new(self.grid.length, self.grid.n).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn lemma_spec(&self, s: f64, radius: f64) -> SampleSpec {
        SampleSpec {
            s,
            radius,
            n_samples: self.lemmas.n_samples,
            seed: self.lemmas.seed,
            spectral_decay_margin: self.lemmas.spectral_decay_margin,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        self.model().validate().map_err(|e| invalid("params", e.to_string()))?;
        self.stepper_config().validate().map_err(|e| invalid("stepper", e.to_string()))?;
        if !(self.outputs.monitor_s.is_finite() && self.outputs.monitor_s >= 0.0) {
            return Err(invalid("outputs.monitor_s", "must be finite and >= 0"));
        }
        self.validate_ic(&grid)?;

        let l = &self.lemmas;
        Grid::new(l.length, l.n).map_err(|e| invalid("lemmas", e.to_string()))?;
        if l.s_values.is_empty() || l.radii.is_empty() {
            return Err(invalid("lemmas", "s_values and radii must be non-empty"));
        }
        for &s in &l.s_values {
            for &r in &l.radii {
                self.lemma_spec(s, r).validate().map_err(|e| invalid("lemmas", e.to_string()))?;
            }
        }
        if l.accretivity_pairs == 0 || l.multiplier_samples < 2 || !(l.multiplier_xi_max > 0.0) {
            return Err(invalid(
                "lemmas",
                "accretivity_pairs >= 1, multiplier_samples >= 2 and multiplier_xi_max > 0 required",
            ));
        }

        let c = &self.convergence;
        if c.dts.len() < 3 || c.dts.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("convergence.dts", "need at least three positive steps"));
        }
        if !(c.t_end > 0.0 && c.spatial_dt > 0.0 && c.spatial_dt <= c.t_end) {
            return Err(invalid("convergence", "need t_end > 0 and 0 < spatial_dt <= t_end"));
        }
        Grid::new(self.grid.length, c.reference_n).map_err(|e| invalid("convergence.reference_n", e.to_string()))?;
        if c.reference_n <= self.grid.n {
            return Err(invalid("convergence.reference_n", "must exceed grid.n"));
        }

        if self.breaking.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(invalid("breaking.amplitudes", "amplitudes must be finite"));
        }
        let e = &self.equivalence;
        if !(e.s > 1.5 && e.radius > 0.0 && e.radius.is_finite()) {
            return Err(invalid("equivalence", "need s > 3/2 and radius > 0"));
        }
        Ok(())
    }

    fn validate_ic(&self, grid: &Grid) -> Result<(), ConfigError> {
        match &self.ic {
            InitialCondition::Gaussian { amp, center, width } | InitialCondition::Sech2 { amp, center, width } => {
                if !amp.is_finite() || !center.is_finite() {
                    return Err(invalid("ic.amp", "amplitude and center must be finite"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(invalid("ic.width", "must be positive"));
                }
            }
            InitialCondition::Sine { amp, k } => {
                if !amp.is_finite() {
                    return Err(invalid("ic.amp", "must be finite"));
                }
                let fundamental = 2.0 * PI / grid.length();
                let m = k / fundamental;
                if !m.is_finite() || (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
                    return Err(invalid("ic.k", format!("must be an integer multiple of 2*pi/length = {fundamental}")));
                }
            }
            InitialCondition::RandomSobolev { s, radius, .. } => {
                let spec = SampleSpec { s: *s, radius: *radius, ..SampleSpec::default() };
                spec.validate().map_err(|e| invalid("ic", e.to_string()))?;
            }
            InitialCondition::FromFile { .. } => {}
        }
        Ok(())
    }

    /// Initial condition sampled on `grid`.
    pub fn initial_field(&self, grid: &Arc<Grid>) -> Result<Field, ConfigError> {
        let l = grid.length();
        let wrapped = move |x: f64, c: f64| {
            let d = (x - c).rem_euclid(l);
            if d > 0.5 * l {
                d - l
            } else {
                d
            }
        };
        let field = match &self.ic {
            InitialCondition::Gaussian { amp, center, width } => {
                Field::from_fn(grid.clone(), |x| amp * (-(wrapped(x, *center) / width).powi(2)).exp())
            }
            InitialCondition::Sech2 { amp, center, width } => {
                Field::from_fn(grid.clone(), |x| amp / (wrapped(x, *center) / width).cosh().powi(2))
            }
            InitialCondition::Sine { amp, k } => Field::from_fn(grid.clone(), |x| amp * (k * x).sin()),
            InitialCondition::RandomSobolev { s, radius, seed } => {
                let spec = SampleSpec { s: *s, radius: *radius, seed: *seed, ..SampleSpec::default() };
                return Ok(random_sobolev_field(grid, &spec, 0));
            }
            InitialCondition::FromFile { path } => return self.field_from_file(grid, path),
        };
        field.map_err(|e| invalid("ic", e.to_string()))
    }

    /// Accepts a single column of values or `x,u` rows, with an optional
    /// header line.
    fn field_from_file(&self, grid: &Arc<Grid>, path: &Path) -> Result<Field, ConfigError> {
        let full = if path.is_absolute() { path.to_path_buf() } else { self.base_dir.join(path) };
        let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io { path: full.clone(), source })?;
        let mut values = Vec::with_capacity(grid.n());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let last = line.rsplit(',').next().unwrap_or(line).trim();
            match last.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if lineno == 0 => continue,
                Err(_) => {
                    return Err(invalid(
                        "ic.path",
                        format!("{}: line {}: cannot parse `{last}`", full.display(), lineno + 1),
                    ))
                }
            }
        }
        Field::new(grid.clone(), values).map_err(|e| invalid("ic.path", format!("{}: {e}", full.display())))
    }
}
