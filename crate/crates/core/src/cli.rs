//! Batch front-end: run configuration, modes and figure datasets.
//!
//! A [`RunConfig`] is a single JSON document. Every field has a default, so a
//! config file only needs the fields it changes. Units are SI seconds and
//! rad/s throughout; field names carry the unit suffix.
//!
//! CSV outputs:
//!
//! - traces: `t_s,gamma[,stderr]`
//! - pulse-count sweeps: `n,protection_cpmg,protection_udd[,protection_ndd],blp_cpmg,blp_udd[,blp_ndd]`
//! - parameter sweeps: `<param>,blp,protection`
//! - filter tables: `omega_rad_s,filter_power,spectral_density`
//! - fitness history: `generation,best_fitness`

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{monte_carlo_trace, comb_trace, uniform_grid, DecoherenceTrace, Method, Normalization};
use crate::error::{Error, Result};
use crate::io::{self, TraceDocument};
use crate::measures::{blp_measure, entropy_trace, protection, EntropyForm, MeasureReport};
use crate::noise::EnsembleSpec;
use crate::optimizer::{
    optimize_ndd, sweep_pulse_count, ContinuumMethod, FitnessModel, GaConfig, OptimizationResult,
};
use crate::postprocess::{smooth_detailed, SmoothingConfig, SmoothingReport};
use crate::sequences::{Family, PulseSequence};
use crate::spectra::{build_noise_model, spectral_density, EnvironmentSpec, NoiseDocument, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Continuum trace (closed form at zero temperature, quadrature otherwise).
    #[default]
    Analytic,
    /// Exact comb summation.
    Comb,
    /// Finite ensemble of comb realizations, raw and smoothed.
    MonteCarlo,
    Optimize,
    Smooth,
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Comb => "comb",
            Mode::MonteCarlo => "monte_carlo",
            Mode::Optimize => "optimize",
            Mode::Smooth => "smooth",
            Mode::Sweep => "sweep",
        })
    }
}

/// Environment fields, each optional in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub s: f64,
    pub lambda: f64,
    pub omega_c_rad_s: f64,
    pub temperature_energy: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            s: 4.0,
            lambda: 10.0,
            omega_c_rad_s: crate::DEFAULT_OMEGA_C,
            temperature_energy: 0.0,
        }
    }
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<EnvironmentSpec> {
        EnvironmentSpec::new(self.s, self.lambda, self.omega_c_rad_s, self.temperature_energy)
    }
}

impl From<EnvironmentSpec> for EnvironmentConfig {
    fn from(e: EnvironmentSpec) -> Self {
        Self {
            s: e.s,
            lambda: e.lambda,
            omega_c_rad_s: e.omega_c,
            temperature_energy: e.temperature_energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub omega_b_rad_s: f64,
    #[serde(rename = "M")]
    pub harmonics: usize,
    /// Reject combs whose top harmonic lies below the cutoff.
    pub strict: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            omega_b_rad_s: crate::DEFAULT_OMEGA_B,
            harmonics: crate::DEFAULT_HARMONICS,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub num_realizations: usize,
    pub master_seed: u64,
    pub num_bins: Option<usize>,
    pub bin_size: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            num_realizations: 1000,
            master_seed: 0,
            num_bins: None,
            bin_size: None,
        }
    }
}

impl EnsembleConfig {
    pub fn build(&self) -> Result<EnsembleSpec> {
        let spec = EnsembleSpec::new(self.num_realizations, self.master_seed)?;
        match (self.num_bins, self.bin_size) {
            (None, None) => Ok(spec),
            (Some(b), None) => spec.with_binning(b, self.num_realizations / b.max(1)),
            (Some(b), Some(k)) => spec.with_binning(b, k),
            (None, Some(_)) => Err(Error::invalid("num_bins", "bin_size given without num_bins")),
        }
    }
}

/// A standard family or an explicit list of pulse times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceConfig {
    Generated {
        family: Family,
        #[serde(default)]
        n: usize,
        #[serde(default = "default_window")]
        total_time_s: f64,
    },
    Explicit(PulseSequence),
}

fn default_window() -> f64 {
    crate::DEFAULT_WINDOW
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig::Generated {
            family: Family::Free,
            n: 0,
            total_time_s: crate::DEFAULT_WINDOW,
        }
    }
}

impl SequenceConfig {
    pub fn build(&self) -> Result<PulseSequence> {
        match self {
            SequenceConfig::Generated {
                family,
                n,
                total_time_s,
            } => family.build(*total_time_s, *n),
            SequenceConfig::Explicit(seq) => Ok(seq.clone()),
        }
    }

    pub fn total_time(&self) -> f64 {
        match self {
            SequenceConfig::Generated { total_time_s, .. } => *total_time_s,
            SequenceConfig::Explicit(seq) => seq.total_time(),
        }
    }

    pub fn pulses(&self) -> usize {
        match self {
            SequenceConfig::Generated { n, .. } => *n,
            SequenceConfig::Explicit(seq) => seq.num_pulses(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub num_points: usize,
    /// Defaults to the sequence duration.
    pub t_max_s: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            num_points: crate::DEFAULT_GRID_POINTS,
            t_max_s: None,
        }
    }
}

/// Trace source for fitness and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
    Comb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[default]
    S,
    Lambda,
    Pulses,
}

impl SweepParam {
    fn column(self) -> &'static str {
        match self {
            SweepParam::S => "s",
            SweepParam::Lambda => "lambda",
            SweepParam::Pulses => "n",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(SweepParam::S),
            "lambda" => Ok(SweepParam::Lambda),
            "pulses" | "n" => Ok(SweepParam::Pulses),
            other => Err(Error::invalid("param", format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    /// Defaults to 0.25 for `s`, 10 for `lambda` and 1 for pulses.
    pub step: Option<f64>,
    /// Run the optimizer at each pulse count.
    pub include_ndd: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param: SweepParam::S,
            from: 1.0,
            to: 6.0,
            step: None,
            include_ndd: false,
        }
    }
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        let step = self.step.unwrap_or(match self.param {
            SweepParam::S => 0.25,
            SweepParam::Lambda => 10.0,
            SweepParam::Pulses => 1.0,
        });
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid("step", format!("must be > 0, got {step}")));
        }
        if !(self.from.is_finite() && self.to.is_finite() && self.from <= self.to) {
            return Err(Error::invalid(
                "to",
                format!("need from <= to, got {} and {}", self.from, self.to),
            ));
        }
        let count = ((self.to - self.from) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.from + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trace_csv: Option<PathBuf>,
    pub trace_json: Option<PathBuf>,
    pub smoothed_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub result_json: Option<PathBuf>,
    pub history_csv: Option<PathBuf>,
    pub table_csv: Option<PathBuf>,
}

impl OutputConfig {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.trace_csv,
            &self.trace_json,
            &self.smoothed_csv,
            &self.report_json,
            &self.result_json,
            &self.history_csv,
            &self.table_csv,
        ]
        .into_iter()
        .flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.paths().next().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub environment: EnvironmentConfig,
    /// Comb-normalized continuum unless stated otherwise.
    pub normalization: Option<Normalization>,
    pub noise: NoiseConfig,
    pub ensemble: EnsembleConfig,
    pub sequence: SequenceConfig,
    pub grid: GridConfig,
    pub smoothing: SmoothingConfig,
    pub ga: GaConfig,
    pub fitness: FitnessKind,
    pub sweep: SweepConfig,
    /// Trace CSV read by the smooth mode.
    pub input: Option<PathBuf>,
    /// Protection horizon; defaults to the end of the grid.
    pub horizon_s: Option<f64>,
    pub outputs: OutputConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Replace the environment (and comb, when present) from an environment file.
    pub fn load_environment(&mut self, path: &Path) -> Result<()> {
        let doc: NoiseDocument = io::read_json(path)?;
        self.environment = doc.environment.into();
        if let Some(w) = doc.omega_b {
            self.noise.omega_b_rad_s = w;
        }
        if let Some(m) = doc.num_harmonics.or(doc.amplitudes.as_ref().map(Vec::len)) {
            self.noise.harmonics = m;
        }
        Ok(())
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization.unwrap_or_else(Normalization::standard)
    }

    pub fn noise_model(&self, env: &EnvironmentSpec) -> Result<NoiseModel> {
        build_noise_model(env, self.noise.omega_b_rad_s, self.noise.harmonics, self.noise.strict)
    }

    pub fn fitness_model(&self, env: &EnvironmentSpec) -> Result<FitnessModel> {
        let method = match self.fitness {
            FitnessKind::Comb => {
                return Ok(FitnessModel::Comb {
                    model: self.noise_model(env)?,
                })
            }
            FitnessKind::Auto => ContinuumMethod::Auto,
            FitnessKind::ClosedForm => ContinuumMethod::ClosedForm,
            FitnessKind::Quadrature => ContinuumMethod::Quadrature,
        };
        Ok(FitnessModel::Continuum {
            environment: *env,
            normalization: self.normalization(),
            method,
        })
    }

    pub fn time_grid(&self, seq: &PulseSequence) -> Result<Vec<f64>> {
        let t_max = self.grid.t_max_s.unwrap_or(seq.total_time());
        if t_max > seq.total_time() {
            return Err(Error::invalid(
                "t_max_s",
                format!("{t_max} exceeds the sequence duration {}", seq.total_time()),
            ));
        }
        uniform_grid(t_max, self.grid.num_points)
    }

    /// Check every nested invariant, referenced files and output directories.
    pub fn validate(&self) -> Result<()> {
        let env = self.environment.build()?;
        if let Normalization::Comb { omega_b } = self.normalization() {
            if !(omega_b.is_finite() && omega_b > 0.0) {
                return Err(Error::invalid("omega_b_rad_s", format!("must be > 0, got {omega_b}")));
            }
        }
        if !(self.noise.omega_b_rad_s.is_finite() && self.noise.omega_b_rad_s > 0.0) {
            return Err(Error::invalid(
                "omega_b_rad_s",
                format!("must be > 0, got {}", self.noise.omega_b_rad_s),
            ));
        }
        if self.noise.harmonics == 0 {
            return Err(Error::invalid("M", "at least one harmonic is required"));
        }
        if self.noise.strict {
            self.noise_model(&env)?;
        }
        self.ensemble.build()?;
        self.smoothing.validate()?;
        if let Some(h) = self.horizon_s {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid("horizon_s", format!("must be > 0, got {h}")));
            }
        }
        match self.mode {
            Mode::Smooth => match &self.input {
                None => return Err(Error::invalid("input", "smooth mode needs an input trace")),
                Some(p) if !p.is_file() => {
                    return Err(Error::invalid("input", format!("{} does not exist", p.display())))
                }
                _ => {}
            },
            Mode::Optimize => {
                if self.sequence.pulses() == 0 {
                    return Err(Error::invalid("n", "optimization needs at least one pulse"));
                }
                self.ga.validate(self.sequence.total_time(), self.sequence.pulses())?;
            }
            Mode::Sweep => {
                self.sweep.values()?;
            }
            _ => {
                let seq = self.sequence.build()?;
                self.time_grid(&seq)?;
            }
        }
        if !matches!(self.mode, Mode::Smooth | Mode::Sweep) {
            self.sequence.build()?;
        }
        for p in self.outputs.paths() {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty());
            if let Some(d) = dir {
                if !d.is_dir() {
                    return Err(Error::invalid(
                        "outputs",
                        format!("directory {} does not exist", d.display()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub blp: Option<f64>,
    pub protection: Option<f64>,
    pub runtime_s: f64,
    pub seed: Option<u64>,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        write!(
            f,
            "mode={} blp={} protection={} runtime_s={:.3} seed={}",
            self.mode,
            opt(self.blp),
            opt(self.protection),
            self.runtime_s,
            self.seed.map_or("-".to_string(), |s| s.to_string())
        )
    }
}

/// Report of the Monte Carlo mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub raw: MeasureReport,
    pub smoothed: MeasureReport,
    pub smoothing: SmoothingReport,
    pub num_realizations: usize,
    pub master_seed: u64,
}

/// Report of the smooth mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothSummary {
    pub blp_before: f64,
    pub blp_after: f64,
    pub protection_before: f64,
    pub protection_after: f64,
    pub smoothing: SmoothingReport,
}

struct Outcome {
    blp: Option<f64>,
    protection: Option<f64>,
    seed: Option<u64>,
    files: Vec<PathBuf>,
}

/// Execute `cfg.mode`, writing the configured outputs.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    cfg.validate()?;
    let out = match cfg.mode {
        Mode::Analytic | Mode::Comb => run_deterministic(cfg)?,
        Mode::MonteCarlo => run_monte_carlo(cfg)?,
        Mode::Optimize => run_optimize(cfg)?,
        Mode::Smooth => run_smooth(cfg)?,
        Mode::Sweep => run_sweep(cfg)?,
    };
    Ok(RunSummary {
        mode: cfg.mode,
        blp: out.blp,
        protection: out.protection,
        runtime_s: start.elapsed().as_secs_f64(),
        seed: out.seed,
        files: out.files,
    })
}

fn write_trace_outputs(
    cfg: &RunConfig,
    trace: &DecoherenceTrace,
    seq: &PulseSequence,
    env: &EnvironmentSpec,
    model: Option<&NoiseModel>,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    if let Some(p) = &cfg.outputs.trace_csv {
        io::write_trace_file(p, trace)?;
        files.push(p.clone());
    }
    if let Some(p) = &cfg.outputs.trace_json {
        let mut doc = TraceDocument::new(trace.clone(), seq.clone());
        doc.environment = Some(*env);
        doc.normalization = cfg.normalization.or(match trace.method() {
            Method::Continuum | Method::ClosedForm => Some(cfg.normalization()),
            _ => None,
        });
        doc.noise = model.cloned();
        io::write_json(p, &doc)?;
        files.push(p.clone());
    }
    Ok(())
}

fn write_report<T: Serialize>(cfg: &RunConfig, report: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(p) = &cfg.outputs.report_json {
        io::write_json(p, report)?;
        files.push(p.clone());
    }
    Ok(())
}

fn run_deterministic(cfg: &RunConfig) -> Result<Outcome> {
    let env = cfg.environment.build()?;
    let seq = cfg.sequence.build()?;
    let grid = cfg.time_grid(&seq)?;
    let (trace, model) = if cfg.mode == Mode::Comb {
        let model = cfg.noise_model(&env)?;
        (comb_trace(&model, &seq, &grid)?, Some(model))
    } else {
        let fm = FitnessModel::Continuum {
            environment: env,
            normalization: cfg.normalization(),
            method: match cfg.fitness {
                FitnessKind::ClosedForm => ContinuumMethod::ClosedForm,
                FitnessKind::Quadrature => ContinuumMethod::Quadrature,
                _ => ContinuumMethod::Auto,
            },
        };
        (fm.trace(&seq, &grid)?, None)
    };
    let report = MeasureReport::compute(&trace, cfg.horizon_s, false, None)?;
    let mut files = Vec::new();
    write_trace_outputs(cfg, &trace, &seq, &env, model.as_ref(), &mut files)?;
    write_report(cfg, &report, &mut files)?;
    Ok(Outcome {
        blp: Some(report.blp),
        protection: Some(report.protection),
        seed: None,
        files,
    })
}

fn run_monte_carlo(cfg: &RunConfig) -> Result<Outcome> {
    let env = cfg.environment.build()?;
    let seq = cfg.sequence.build()?;
    let grid = cfg.time_grid(&seq)?;
    let model = cfg.noise_model(&env)?;
    let ensemble = cfg.ensemble.build()?;
    let raw = monte_carlo_trace(&model, &seq, &grid, &ensemble)?;
    let (smoothed, smoothing) = smooth_detailed(&raw, &cfg.smoothing)?;
    let report = EnsembleReport {
        raw: MeasureReport::compute(&raw, cfg.horizon_s, false, None)?,
        smoothed: MeasureReport::compute(&smoothed, cfg.horizon_s, true, None)?,
        smoothing,
        num_realizations: ensemble.num_realizations,
        master_seed: ensemble.master_seed,
    };
    let mut files = Vec::new();
    write_trace_outputs(cfg, &raw, &seq, &env, Some(&model), &mut files)?;
    if let Some(p) = &cfg.outputs.smoothed_csv {
        io::write_trace_file(p, &smoothed)?;
        files.push(p.clone());
    }
    write_report(cfg, &report, &mut files)?;
    Ok(Outcome {
        blp: Some(report.smoothed.blp),
        protection: Some(report.smoothed.protection),
        seed: Some(ensemble.master_seed),
        files,
    })
}

fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = history
        .iter()
        .enumerate()
        .map(|(g, f)| vec![g as f64, *f])
        .collect();
    io::write_table_file(path, &["generation", "best_fitness"], &rows)
}

fn run_optimize(cfg: &RunConfig) -> Result<Outcome> {
    let env = cfg.environment.build()?;
    let model = cfg.fitness_model(&env)?;
    let total = cfg.sequence.total_time();
    let result = optimize_ndd(&model, total, cfg.sequence.pulses(), &cfg.ga)?;
    let grid = uniform_grid(total, cfg.grid.num_points)?;
    let trace = model.trace(&result.best_sequence, &grid)?;
    let mut files = Vec::new();
    if let Some(p) = &cfg.outputs.result_json {
        io::write_json(p, &result)?;
        files.push(p.clone());
    }
    if let Some(p) = &cfg.outputs.history_csv {
        write_history(p, &result.fitness_history)?;
        files.push(p.clone());
    }
    write_trace_outputs(cfg, &trace, &result.best_sequence, &env, None, &mut files)?;
    write_report(cfg, &result, &mut files)?;
    Ok(Outcome {
        blp: Some(blp_measure(&trace)),
        protection: Some(result.best_fitness),
        seed: Some(cfg.ga.seed),
        files,
    })
}

fn run_smooth(cfg: &RunConfig) -> Result<Outcome> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::invalid("input", "smooth mode needs an input trace"))?;
    let raw = io::read_trace_file(input, Method::MonteCarlo)?;
    let summary = smooth_summary(&raw, &cfg.smoothing, cfg.horizon_s)?;
    let (smoothed, _) = smooth_detailed(&raw, &cfg.smoothing)?;
    let mut files = Vec::new();
    for p in cfg.outputs.smoothed_csv.iter().chain(&cfg.outputs.trace_csv) {
        io::write_trace_file(p, &smoothed)?;
        files.push(p.clone());
    }
    write_report(cfg, &summary, &mut files)?;
    Ok(Outcome {
        blp: Some(summary.blp_after),
        protection: Some(summary.protection_after),
        seed: None,
        files,
    })
}

/// Smooth `raw` and compare the measures before and after.
pub fn smooth_summary(
    raw: &DecoherenceTrace,
    cfg: &SmoothingConfig,
    horizon: Option<f64>,
) -> Result<SmoothSummary> {
    let (smoothed, report) = smooth_detailed(raw, cfg)?;
    let before = MeasureReport::compute(raw, horizon, false, None)?;
    let after = MeasureReport::compute(&smoothed, horizon, true, None)?;
    Ok(SmoothSummary {
        blp_before: before.blp,
        blp_after: after.blp,
        protection_before: before.protection,
        protection_after: after.protection,
        smoothing: report,
    })
}

/// `(value, 𝒩, 𝒫)` rows of an `s` or `λ` sweep under `cfg.sequence`.
pub fn parameter_sweep(cfg: &RunConfig) -> Result<Vec<[f64; 3]>> {
    let seq = cfg.sequence.build()?;
    let grid = cfg.time_grid(&seq)?;
    let horizon = cfg.horizon_s.unwrap_or(grid[grid.len() - 1]);
    cfg.sweep
        .values()?
        .into_iter()
        .map(|v| {
            let mut env = cfg.environment;
            match cfg.sweep.param {
                SweepParam::S => env.s = v,
                SweepParam::Lambda => env.lambda = v,
                SweepParam::Pulses => unreachable!("pulse sweeps use sweep_pulse_count"),
            }
            let env = env.build()?;
            let tr = cfg.fitness_model(&env)?.trace(&seq, &grid)?;
            Ok([v, blp_measure(&tr), protection(&tr, horizon)?])
        })
        .collect()
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let (header, rows): (Vec<&str>, Vec<Vec<f64>>) = if cfg.sweep.param == SweepParam::Pulses {
        let env = cfg.environment.build()?;
        let counts: Vec<usize> = cfg
            .sweep
            .values()?
            .into_iter()
            .map(|v| v.round() as usize)
            .filter(|&n| n > 0)
            .collect();
        if counts.is_empty() {
            return Err(Error::invalid("from", "pulse sweep needs counts >= 1"));
        }
        let ga = cfg.sweep.include_ndd.then_some(&cfg.ga);
        let table = sweep_pulse_count(
            &cfg.fitness_model(&env)?,
            cfg.sequence.total_time(),
            &counts,
            cfg.grid.num_points,
            ga,
        )?;
        pulse_table(&table, ga.is_some())
    } else {
        let rows = parameter_sweep(cfg)?.into_iter().map(Vec::from).collect();
        (vec![cfg.sweep.param.column(), "blp", "protection"], rows)
    };
    let mut files = Vec::new();
    match &cfg.outputs.table_csv {
        Some(p) => {
            io::write_table_file(p, &header, &rows)?;
            files.push(p.clone());
        }
        None => io::write_table(std::io::stdout().lock(), &header, &rows)?,
    }
    // headline: the row with the largest 𝒩
    let blp_col = header.iter().position(|h| h.starts_with("blp")).unwrap_or(1);
    let prot_col = header.iter().position(|h| h.starts_with("protection")).unwrap_or(2);
    let best = rows
        .iter()
        .max_by(|a, b| a[blp_col].total_cmp(&b[blp_col]));
    Ok(Outcome {
        blp: best.map(|r| r[blp_col]),
        protection: best.map(|r| r[prot_col]),
        seed: cfg.sweep.include_ndd.then_some(cfg.ga.seed),
        files,
    })
}

fn pulse_table(rows: &[crate::optimizer::SweepRow], ndd: bool) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let header = if ndd {
        vec![
            "n",
            "protection_cpmg",
            "protection_udd",
            "protection_ndd",
            "blp_cpmg",
            "blp_udd",
            "blp_ndd",
        ]
    } else {
        vec!["n", "protection_cpmg", "protection_udd", "blp_cpmg", "blp_udd"]
    };
    let body = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.n as f64, r.protection_cpmg, r.protection_udd];
            v.extend(r.protection_ndd);
            v.extend([r.blp_cpmg, r.blp_udd]);
            v.extend(r.blp_ndd);
            v
        })
        .collect();
    (header, body)
}

/// `(ω, |F(ω, t)|², J(ω))` on `points` uniform frequencies in `[0, omega_max]`.
pub fn filter_table(
    seq: &PulseSequence,
    env: &EnvironmentSpec,
    t: f64,
    omega_max: f64,
    points: usize,
) -> Result<Vec<Vec<f64>>> {
    if points < 2 {
        return Err(Error::invalid("points", "need at least two frequencies"));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::invalid("omega_max_rad_s", format!("must be > 0, got {omega_max}")));
    }
    (0..points)
        .map(|i| {
            let w = omega_max * i as f64 / (points - 1) as f64;
            Ok(vec![w, seq.filter_power(w, t)?, spectral_density(env, w)?])
        })
        .collect()
}

// ---------------------------------------------------------------------------
// figure datasets

pub const FIGURES: [&str; 7] = ["fig2a", "fig2b", "fig2c", "fig2d", "fig3ab", "fig4a", "fig5"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    /// Small ensembles and short optimizer runs, for smoke tests.
    pub quick: bool,
    pub seed: u64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self { quick: false, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub name: String,
    pub columns: Vec<String>,
}

/// Everything needed to regenerate a figure dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureManifest {
    pub figure: String,
    pub version: String,
    pub quick: bool,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub files: Vec<DatasetFile>,
}

struct Scale {
    realizations: usize,
    bins: (usize, usize),
    sweep_realizations: usize,
    ga: GaConfig,
    counts: Vec<usize>,
}

impl Scale {
    fn new(opts: &ReproduceOptions) -> Self {
        if opts.quick {
            Scale {
                realizations: 200,
                bins: (10, 20),
                sweep_realizations: 50,
                ga: GaConfig {
                    population_size: 16,
                    max_generations: 15,
                    stall_generations: 10,
                    grid_points: 100,
                    seed: opts.seed,
                    ..GaConfig::default()
                },
                counts: vec![2, 6, 10],
            }
        } else {
            Scale {
                realizations: 9000,
                bins: (10, 900),
                sweep_realizations: 1000,
                ga: GaConfig {
                    seed: opts.seed,
                    ..GaConfig::default()
                },
                counts: (1..=20).collect(),
            }
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<DatasetFile>,
}

impl Writer<'_> {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        io::write_table_file(&self.dir.join(name), header, rows)?;
        self.files.push(DatasetFile {
            name: name.to_string(),
            columns: header.iter().map(|s| s.to_string()).collect(),
        });
        Ok(())
    }

    /// Columns of equal length, written side by side.
    fn columns(&mut self, name: &str, cols: &[(&str, &[f64])]) -> Result<()> {
        let n = cols.first().map_or(0, |c| c.1.len());
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c.1[i]).collect()).collect();
        let header: Vec<&str> = cols.iter().map(|c| c.0).collect();
        self.table(name, &header, &rows)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.dir.join(name), value)?;
        self.files.push(DatasetFile {
            name: name.to_string(),
            columns: Vec::new(),
        });
        Ok(())
    }
}

fn reference_env(s: f64, lambda: f64) -> Result<EnvironmentSpec> {
    EnvironmentSpec::standard(s, lambda)
}

fn continuum(env: &EnvironmentSpec) -> FitnessModel {
    FitnessModel::continuum(*env, Normalization::standard())
}

fn comb_model(env: &EnvironmentSpec) -> Result<NoiseModel> {
    build_noise_model(env, crate::DEFAULT_OMEGA_B, crate::DEFAULT_HARMONICS, false)
}

fn window_grid() -> Result<Vec<f64>> {
    uniform_grid(crate::DEFAULT_WINDOW, crate::DEFAULT_GRID_POINTS)
}

/// Raw and smoothed Monte Carlo traces for `seq` under `env`.
fn ensemble_pair(
    env: &EnvironmentSpec,
    seq: &PulseSequence,
    grid: &[f64],
    spec: &EnsembleSpec,
) -> Result<(DecoherenceTrace, DecoherenceTrace)> {
    let raw = monte_carlo_trace(&comb_model(env)?, seq, grid, spec)?;
    let smoothed = smooth_detailed(&raw, &SmoothingConfig::default())?.0;
    Ok((raw, smoothed))
}

/// Write the datasets of `figure` into `out_dir` and return their manifest,
/// which is also written as `<figure>_manifest.json`.
pub fn reproduce_figure(figure: &str, out_dir: &Path, opts: &ReproduceOptions) -> Result<FigureManifest> {
    if !FIGURES.contains(&figure) {
        return Err(Error::invalid(
            "figure",
            format!("unknown figure {figure:?}; expected one of {}", FIGURES.join(", ")),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let scale = Scale::new(opts);
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    let common = serde_json::json!({
        "omega_c_rad_s": crate::DEFAULT_OMEGA_C,
        "omega_b_rad_s": crate::DEFAULT_OMEGA_B,
        "M": crate::DEFAULT_HARMONICS,
        "temperature_energy": 0.0,
        "window_s": crate::DEFAULT_WINDOW,
        "grid_points": crate::DEFAULT_GRID_POINTS,
        "normalization": Normalization::standard(),
        "smoothing": SmoothingConfig::default(),
    });
    let specific = match figure {
        "fig2a" => fig2a(&mut w, &scale, opts)?,
        "fig2b" => fig_sweep(&mut w, &scale, opts, SweepParam::S)?,
        "fig2c" => fig_sweep(&mut w, &scale, opts, SweepParam::Lambda)?,
        "fig2d" => fig2d(&mut w)?,
        "fig3ab" => fig3ab(&mut w, &scale)?,
        "fig4a" => fig4a(&mut w, &scale, opts)?,
        _ => fig5(&mut w, &scale)?,
    };
    let mut parameters = common;
    if let (Some(p), serde_json::Value::Object(extra)) = (parameters.as_object_mut(), specific) {
        p.extend(extra);
    }
    let manifest = FigureManifest {
        figure: figure.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        quick: opts.quick,
        seed: opts.seed,
        parameters,
        files: w.files,
    };
    io::write_json(&out_dir.join(format!("{figure}_manifest.json")), &manifest)?;
    Ok(manifest)
}

fn fig2a(w: &mut Writer, scale: &Scale, opts: &ReproduceOptions) -> Result<serde_json::Value> {
    let grid = window_grid()?;
    let seq = PulseSequence::free(crate::DEFAULT_WINDOW)?;
    let spec = EnsembleSpec::new(scale.realizations, opts.seed)?.with_binning(scale.bins.0, scale.bins.1)?;
    for s in [1.0, 4.0] {
        let env = reference_env(s, 10.0)?;
        let exact = continuum(&env).trace(&seq, &grid)?;
        let (raw, smoothed) = ensemble_pair(&env, &seq, &grid, &spec)?;
        let zeros = vec![0.0; grid.len()];
        let stderr = raw.stderr().unwrap_or(&zeros);
        let stddev = raw
            .ensemble()
            .and_then(|e| e.bins.as_ref())
            .map_or(&zeros[..], |b| &b.stddev[..]);
        w.columns(
            &format!("fig2a_s{s}.csv"),
            &[
                ("t_s", &grid),
                ("gamma_continuum", exact.values()),
                ("gamma_mc", raw.values()),
                ("gamma_mc_stderr", stderr),
                ("gamma_mc_bin_stddev", stddev),
                ("gamma_mc_smoothed", smoothed.values()),
            ],
        )?;
    }
    Ok(serde_json::json!({
        "s": [1.0, 4.0],
        "lambda": 10.0,
        "sequence": "free",
        "num_realizations": scale.realizations,
        "binning": [scale.bins.0, scale.bins.1],
    }))
}

fn fig_sweep(
    w: &mut Writer,
    scale: &Scale,
    opts: &ReproduceOptions,
    param: SweepParam,
) -> Result<serde_json::Value> {
    let grid = window_grid()?;
    let seq = PulseSequence::free(crate::DEFAULT_WINDOW)?;
    let spec = EnsembleSpec::new(scale.sweep_realizations, opts.seed)?;
    let values: Vec<f64> = match param {
        SweepParam::S => (0..=20).map(|i| 1.0 + 0.25 * i as f64).collect(),
        _ => (1..=10).map(|i| 10.0 * i as f64).collect(),
    };
    let mut rows = Vec::new();
    for &v in &values {
        let env = match param {
            SweepParam::S => reference_env(v, 10.0)?,
            _ => reference_env(4.0, v)?,
        };
        let exact = continuum(&env).trace(&seq, &grid)?;
        let (raw, smoothed) = ensemble_pair(&env, &seq, &grid, &spec)?;
        rows.push(vec![v, blp_measure(&exact), blp_measure(&raw), blp_measure(&smoothed)]);
    }
    let (name, col) = match param {
        SweepParam::S => ("fig2b.csv", "s"),
        _ => ("fig2c.csv", "lambda"),
    };
    w.table(name, &[col, "blp_continuum", "blp_mc_raw", "blp_mc_smoothed"], &rows)?;
    Ok(match param {
        SweepParam::S => serde_json::json!({ "s": values, "lambda": 10.0, "sequence": "free",
            "num_realizations": scale.sweep_realizations }),
        _ => serde_json::json!({ "s": 4.0, "lambda": values, "sequence": "free",
            "num_realizations": scale.sweep_realizations }),
    })
}

fn fig2d(w: &mut Writer) -> Result<serde_json::Value> {
    let grid = window_grid()?;
    let seq = PulseSequence::free(crate::DEFAULT_WINDOW)?;
    let mut cols: Vec<(String, Vec<f64>)> = vec![("t_s".into(), grid.clone())];
    for s in [1.0, 4.0] {
        let tr = continuum(&reference_env(s, 10.0)?).trace(&seq, &grid)?;
        cols.push((format!("entropy_exact_s{s}"), entropy_trace(&tr, 1.0, EntropyForm::Exact)?));
        cols.push((
            format!("entropy_leading_order_s{s}"),
            entropy_trace(&tr, 1.0, EntropyForm::LeadingOrder)?,
        ));
    }
    let view: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), &v[..])).collect();
    w.columns("fig2d.csv", &view)?;
    Ok(serde_json::json!({ "s": [1.0, 4.0], "lambda": 10.0, "epsilon": 1.0, "sequence": "free" }))
}

/// Free, PDD, CPMG, UDD and optimized sequences with `n` pulses over the window.
fn family_set(model: &FitnessModel, n: usize, ga: &GaConfig) -> Result<(Vec<PulseSequence>, OptimizationResult)> {
    let t = crate::DEFAULT_WINDOW;
    let ndd = optimize_ndd(model, t, n, ga)?;
    let seqs = vec![
        PulseSequence::free(t)?,
        Family::Pdd.build(t, n)?,
        Family::Cpmg.build(t, n)?,
        Family::Udd.build(t, n)?,
        ndd.best_sequence.clone().with_label("ndd"),
    ];
    Ok((seqs, ndd))
}

const FAMILY_NAMES: [&str; 5] = ["free", "pdd", "cpmg", "udd", "ndd"];

fn fig3ab(w: &mut Writer, scale: &Scale) -> Result<serde_json::Value> {
    let env = reference_env(4.0, 10.0)?;
    let model = continuum(&env);
    let (seqs, ndd) = family_set(&model, 10, &scale.ga)?;
    let t = crate::DEFAULT_WINDOW;

    let points = 801;
    let omega_max = 8.0 * env.omega_c;
    let omega: Vec<f64> = (0..points)
        .map(|i| omega_max * i as f64 / (points - 1) as f64)
        .collect();
    let density: Vec<f64> = omega
        .iter()
        .map(|&x| spectral_density(&env, x))
        .collect::<Result<_>>()?;
    let filters: Vec<Vec<f64>> = seqs
        .iter()
        .map(|q| omega.iter().map(|&x| q.filter_power(x, t)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let names: Vec<String> = FAMILY_NAMES.iter().map(|n| format!("filter_{n}")).collect();
    let mut cols: Vec<(&str, &[f64])> = vec![("omega_rad_s", &omega), ("spectral_density", &density)];
    cols.extend(names.iter().map(String::as_str).zip(filters.iter().map(Vec::as_slice)));
    w.columns("fig3a.csv", &cols)?;

    let grid = window_grid()?;
    let traces: Vec<DecoherenceTrace> = seqs
        .iter()
        .map(|q| model.trace(q, &grid))
        .collect::<Result<_>>()?;
    let names: Vec<String> = FAMILY_NAMES.iter().map(|n| format!("gamma_{n}")).collect();
    let mut cols: Vec<(&str, &[f64])> = vec![("t_s", &grid)];
    cols.extend(names.iter().map(String::as_str).zip(traces.iter().map(|t| t.values())));
    w.columns("fig3b.csv", &cols)?;
    w.json("fig3_ndd.json", &ndd)?;
    Ok(serde_json::json!({ "s": 4.0, "lambda": 10.0, "pulses": 10, "ga": scale.ga,
        "filter_points": points, "omega_max_rad_s": omega_max }))
}

fn fig4a(w: &mut Writer, scale: &Scale, opts: &ReproduceOptions) -> Result<serde_json::Value> {
    let env = reference_env(4.0, 10.0)?;
    let model = continuum(&env);
    let grid = window_grid()?;
    let t = crate::DEFAULT_WINDOW;
    let ndd = optimize_ndd(&model, t, 10, &scale.ga)?;
    let seqs = [
        PulseSequence::free(t)?,
        Family::Cpmg.build(t, 10)?,
        ndd.best_sequence.clone(),
    ];
    let spec = EnsembleSpec::new(scale.sweep_realizations, opts.seed)?;
    let mut cols: Vec<(String, Vec<f64>)> = vec![("t_s".into(), grid.clone())];
    for (name, q) in ["free", "cpmg", "ndd"].iter().zip(&seqs) {
        cols.push((format!("{name}_continuum"), model.trace(q, &grid)?.values().to_vec()));
        let (raw, smoothed) = ensemble_pair(&env, q, &grid, &spec)?;
        cols.push((format!("{name}_mc"), raw.values().to_vec()));
        cols.push((format!("{name}_mc_smoothed"), smoothed.values().to_vec()));
    }
    let view: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), &v[..])).collect();
    w.columns("fig4a.csv", &view)?;
    w.json("fig4a_ndd.json", &ndd)?;
    Ok(serde_json::json!({ "s": 4.0, "lambda": 10.0, "pulses": 10, "ga": scale.ga,
        "num_realizations": scale.sweep_realizations }))
}

fn fig5(w: &mut Writer, scale: &Scale) -> Result<serde_json::Value> {
    let t = crate::DEFAULT_WINDOW;
    for s in [1.0, 4.0] {
        let model = continuum(&reference_env(s, 10.0)?);
        let rows = sweep_pulse_count(&model, t, &scale.counts, crate::DEFAULT_GRID_POINTS, Some(&scale.ga))?;
        let (header, body) = pulse_table(&rows, true);
        w.table(&format!("fig5_pulses_s{s}.csv"), &header, &body)?;
    }
    let grid = window_grid()?;
    let s_values: Vec<f64> = (0..=10).map(|i| 1.0 + 0.5 * i as f64).collect();
    let mut rows = Vec::new();
    for &s in &s_values {
        let model = continuum(&reference_env(s, 10.0)?);
        let ndd = optimize_ndd(&model, t, 10, &scale.ga)?.best_sequence;
        let mut row = vec![s];
        let traces = [PulseSequence::free(t)?, Family::Cpmg.build(t, 10)?, ndd]
            .iter()
            .map(|q| model.trace(q, &grid))
            .collect::<Result<Vec<_>>>()?;
        for tr in &traces {
            row.push(protection(tr, t)?);
        }
        row.extend(traces.iter().map(blp_measure));
        rows.push(row);
    }
    w.table(
        "fig5_s.csv",
        &[
            "s",
            "protection_free",
            "protection_cpmg",
            "protection_ndd",
            "blp_free",
            "blp_cpmg",
            "blp_ndd",
        ],
        &rows,
    )?;
    Ok(serde_json::json!({ "s_pulses": [1.0, 4.0], "lambda": 10.0, "counts": scale.counts,
        "s_sweep": s_values, "s_sweep_pulses": 10, "ga": scale.ga }))
}
