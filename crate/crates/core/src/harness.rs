//! Run configuration, the canned experiments and the validation suite behind
//! the `kse` command-line tool.
//!
//! Configuration files are flat `key = value` text; `#` starts a comment.
//!
//! ```text
//! model = scalar
//! lambda = 8.1
//! n = 128
//! h = 2e-4
//! t_final = 3
//! save_every = 5
//! init = kkp
//! output_dir = runs/kkp
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;

use crate::convergence::{fitted_order, linear_fit};
use crate::criteria::{criterion_check, default_monitors, TheoremId};
use crate::diagnostics::{self, monitors_for, DiagnosticsCsv, LP_EXPONENTS};
use crate::error::{KseError, Result};
use crate::etd;
use crate::field::{coefficient_energy, Grid, SpectralField, VectorField};
use crate::helmholtz::{drift_quantities, leray_project, DriftCsv, DriftQuantities};
use crate::model::{
    initial_data_on, simulate_from, unstable_mode_count, write_checkpoint, InitialData, ModelConfig, ModelFields,
    ModelKind, Observer, RunStatus, SimulationOutcome, SimulationState, DEFAULT_RANDOM_BAND,
};

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "KSE_OUTPUT_DIR";

/// Resolution margin allowed relative to the largest shell amplitude.
pub const RESOLUTION_TOLERANCE: f64 = 1e-15;

/// Relative size above the first nonzero drift sample that opens the fit window.
pub const DRIFT_WINDOW_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Plain,
    Drift,
    Scaling,
    Galerkin,
    Figures,
}

impl FromStr for Experiment {
    type Err = KseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Experiment::Plain),
            "drift" => Ok(Experiment::Drift),
            "scaling" => Ok(Experiment::Scaling),
            "galerkin" => Ok(Experiment::Galerkin),
            "figures" => Ok(Experiment::Figures),
            other => Err(KseError::config("experiment", format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub output_dir: PathBuf,
    pub experiment: Experiment,
    /// Write a CSV row every `csv_stride` samples.
    pub csv_stride: u64,
    /// Write a checkpoint every `checkpoint_stride` samples; `0` keeps only
    /// the initial and final states.
    pub checkpoint_stride: u64,
    /// Dilation factor for the scaling experiment.
    pub beta: u32,
    /// Truncation radii for the Galerkin experiment.
    pub galerkin_levels: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            output_dir: PathBuf::from("kse_output"),
            experiment: Experiment::Plain,
            csv_stride: 1,
            checkpoint_stride: 0,
            beta: 2,
            galerkin_levels: vec![2.0, 3.0, 4.0, 6.0, 8.0, 12.0],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| KseError::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(KseError::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut init = "kkp".to_string();
        let (mut seed, mut band, mut amplitude) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                KseError::InvalidArgument(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "model" => cfg.model.model = value.parse().map_err(|_| KseError::config("model", format!("unknown model `{value}`")))?,
                "lambda" => cfg.model.lambda = parse_value(key, value)?,
                "n" => cfg.model.n = parse_value(key, value)?,
                "h" => cfg.model.h = parse_value(key, value)?,
                "t_final" => cfg.model.t_final = parse_value(key, value)?,
                "save_every" => cfg.model.save_every = parse_value(key, value)?,
                "galerkin_n" => {
                    cfg.model.galerkin_n = match value {
                        "none" | "" => None,
                        v => Some(parse_value(key, v)?),
                    }
                }
                "init" => init = value.to_string(),
                "seed" => seed = Some(parse_value::<u64>(key, value)?),
                "band" => band = Some(parse_value::<f64>(key, value)?),
                "amplitude" => amplitude = Some(parse_value::<f64>(key, value)?),
                "mean_subtraction" => cfg.model.mean_subtraction = parse_bool(key, value)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "experiment" => cfg.experiment = value.parse()?,
                "csv_stride" => cfg.csv_stride = parse_value(key, value)?,
                "checkpoint_stride" => cfg.checkpoint_stride = parse_value(key, value)?,
                "beta" => cfg.beta = parse_value(key, value)?,
                "galerkin_levels" => {
                    cfg.galerkin_levels = value
                        .split(',')
                        .map(|v| parse_value(key, v.trim()))
                        .collect::<Result<_>>()?
                }
                other => return Err(KseError::config(other, "unknown key")),
            }
        }
        cfg.model.init = match init.as_str() {
            "kkp" => InitialData::Kkp,
            "curl_kkp" => InitialData::CurlKkp,
            "random" => InitialData::Random {
                seed: seed.unwrap_or(0),
                band: band.unwrap_or(DEFAULT_RANDOM_BAND),
                amplitude: amplitude.unwrap_or_else(crate::model::default_random_amplitude),
            },
            other => match other.strip_prefix("file:") {
                Some(path) => InitialData::File(PathBuf::from(path.trim())),
                None => return Err(KseError::config("init", format!("unknown initial data `{other}`"))),
            },
        };
        if !matches!(cfg.model.init, InitialData::Random { .. }) {
            for (name, given) in [("seed", seed.is_some()), ("band", band.is_some()), ("amplitude", amplitude.is_some())] {
                if given {
                    return Err(KseError::config(name, "only applies to init = random"));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse `path`, then apply the output-directory override.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::parse(&text)?.with_env_override())
    }

    pub fn with_env_override(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.csv_stride == 0 {
            return Err(KseError::config("csv_stride", "must be at least 1"));
        }
        match self.experiment {
            Experiment::Drift if self.model.model != ModelKind::Vector => {
                Err(KseError::config("model", "the drift experiment requires model = vector"))
            }
            Experiment::Scaling if self.model.lambda != 0.0 => {
                Err(KseError::config("lambda", "the scaling experiment requires lambda = 0"))
            }
            Experiment::Scaling if self.beta == 0 => Err(KseError::config("beta", "must be a positive integer")),
            _ => Ok(()),
        }
    }
}

fn create_output(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Shell spectrum used for the spectrum CSV: `φ`, or the componentwise
/// maximum for a vector field.
pub fn state_spectrum(fields: &ModelFields) -> Vec<f64> {
    match fields {
        ModelFields::Scalar(phi) => phi.shell_spectrum().amplitudes,
        ModelFields::Vector(u) => {
            let a = u.component(0).shell_spectrum().amplitudes;
            let b = u.component(1).shell_spectrum().amplitudes;
            a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()
        }
    }
}

/// Observer that writes every output file of a run.
struct Recorder {
    config: ModelConfig,
    dir: PathBuf,
    csv_stride: u64,
    checkpoint_stride: u64,
    samples: u64,
    rows: u64,
    unresolved: u64,
    diagnostics: DiagnosticsCsv<BufWriter<File>>,
    spectrum: BufWriter<File>,
    drift: Option<DriftCsv<BufWriter<File>>>,
    checkpoints: Vec<PathBuf>,
    last_checkpoint: Option<u64>,
}

impl Recorder {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.output_dir.clone();
        let kind = cfg.model.model;
        let monitors = monitors_for(kind, &default_monitors(2));
        let diagnostics = DiagnosticsCsv::new(create_output(&dir, "diagnostics.csv")?, kind, monitors)?;
        let mut spectrum = create_output(&dir, "spectrum.csv")?;
        writeln!(spectrum, "t,shell,amplitude")?;
        let drift = match kind {
            ModelKind::Vector => Some(DriftCsv::new(create_output(&dir, "drift.csv")?)?),
            ModelKind::Scalar => None,
        };
        Ok(Recorder {
            config: cfg.model.clone(),
            dir,
            csv_stride: cfg.csv_stride,
            checkpoint_stride: cfg.checkpoint_stride,
            samples: 0,
            rows: 0,
            unresolved: 0,
            diagnostics,
            spectrum,
            drift,
            checkpoints: Vec::new(),
            last_checkpoint: None,
        })
    }

    fn checkpoint(&mut self, state: &SimulationState) -> Result<()> {
        if self.last_checkpoint != Some(state.step_count) {
            self.checkpoints.push(write_checkpoint(&self.dir, state, &self.config)?);
            self.last_checkpoint = Some(state.step_count);
        }
        Ok(())
    }

    fn finish(&mut self, final_state: &SimulationState) -> Result<()> {
        self.checkpoint(final_state)?;
        self.diagnostics.flush()?;
        self.spectrum.flush()?;
        if let Some(d) = self.drift.as_mut() {
            d.flush()?;
        }
        Ok(())
    }
}

impl Observer for Recorder {
    fn observe(&mut self, state: &SimulationState) -> Result<()> {
        let index = self.samples;
        self.samples += 1;
        if index == 0 || (self.checkpoint_stride > 0 && index % self.checkpoint_stride == 0) {
            self.checkpoint(state)?;
        }
        if index % self.csv_stride != 0 {
            return Ok(());
        }
        self.rows += 1;
        let rec = self.diagnostics.record(state)?;
        if rec.resolution_margin > RESOLUTION_TOLERANCE * rec.max_shell_amplitude {
            if self.unresolved == 0 {
                warn!(
                    "under-resolved at t={:.4}: amplitude {:.3e} beyond the dealias cutoff (max {:.3e})",
                    state.t, rec.resolution_margin, rec.max_shell_amplitude
                );
            }
            self.unresolved += 1;
        }
        for (shell, a) in state_spectrum(&state.fields).iter().enumerate() {
            writeln!(self.spectrum, "{:e},{shell},{a:e}", state.t)?;
        }
        if let (Some(csv), ModelFields::Vector(u)) = (self.drift.as_mut(), &state.fields) {
            csv.record(state.t, &drift_quantities(u))?;
        }
        Ok(())
    }
}

/// Summary of a plain run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub samples: u64,
    pub rows: u64,
    /// Samples whose resolution margin exceeded [`RESOLUTION_TOLERANCE`].
    pub unresolved_samples: u64,
    pub cfl_warnings: u64,
    pub checkpoints: Vec<PathBuf>,
    pub final_state: SimulationState,
}

/// Simulate and write `diagnostics.csv`, `spectrum.csv`, checkpoints and,
/// for the vector model, `drift.csv` into `output_dir`.
pub fn run_plain(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.model.n)?;
    let initial = initial_data_on(&cfg.model, &grid)?;
    let mut recorder = Recorder::new(cfg)?;
    let outcome = simulate_from(&cfg.model, initial, &mut [&mut recorder])?;
    recorder.finish(&outcome.state)?;
    if let RunStatus::Diverged { step, time } = outcome.status {
        warn!("diverged at step {step} (t={time:.6})");
    }
    Ok(RunReport {
        status: outcome.status,
        samples: recorder.samples,
        rows: recorder.rows,
        unresolved_samples: recorder.unresolved,
        cfl_warnings: outcome.cfl_warnings,
        checkpoints: recorder.checkpoints,
        final_state: outcome.state,
    })
}

/// Drift of a vector run off the gradient manifold.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub status: RunStatus,
    pub series: Vec<(f64, DriftQuantities)>,
    /// First sample with `‖P_σu‖ > 0`.
    pub first_nonzero: Option<(f64, f64)>,
    /// Largest `‖P_σu‖` over all samples divided by the first nonzero value.
    pub growth: f64,
    /// Least-squares slope of `ln‖P_σu‖` over the fit window.
    pub rate: Option<f64>,
    /// Number of samples in the fit window.
    pub window: usize,
}

/// Fit `ln‖P_σu‖` against `t` over the samples exceeding
/// [`DRIFT_WINDOW_FACTOR`] times the first nonzero value.
pub fn fit_drift(series: &[(f64, f64)]) -> (Option<(f64, f64)>, f64, Option<f64>, usize) {
    let first = series.iter().copied().find(|&(_, v)| v > 0.0);
    let Some((_, v0)) = first else {
        return (None, 0.0, None, 0);
    };
    let peak = series.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    let window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(_, v)| v > DRIFT_WINDOW_FACTOR * v0)
        .collect();
    let t: Vec<f64> = window.iter().map(|w| w.0).collect();
    let y: Vec<f64> = window.iter().map(|w| w.1.ln()).collect();
    let rate = linear_fit(&t, &y).map(|(s, _)| s);
    (first, peak / v0, rate, window.len())
}

/// Run the vector model, recording the drift quantities at every sample, and
/// fit the exponential growth rate of `‖P_σu‖`.
pub fn drift_experiment(cfg: &RunConfig) -> Result<DriftReport> {
    let mut cfg = cfg.clone();
    cfg.experiment = Experiment::Drift;
    cfg.validate()?;
    let grid = Grid::new(cfg.model.n)?;
    let initial = initial_data_on(&cfg.model, &grid)?;
    let mut csv = DriftCsv::new(create_output(&cfg.output_dir, "drift.csv")?)?;
    let mut series = Vec::new();
    let mut count = 0u64;
    let stride = cfg.csv_stride;
    let mut observer = |state: &SimulationState| -> Result<()> {
        let ModelFields::Vector(u) = &state.fields else { unreachable!("validated vector model") };
        let q = drift_quantities(u);
        series.push((state.t, q));
        if count % stride == 0 {
            csv.record(state.t, &q)?;
        }
        count += 1;
        Ok(())
    };
    let outcome = simulate_from(&cfg.model, initial, &mut [&mut observer])?;
    csv.flush()?;
    let norms: Vec<(f64, f64)> = series.iter().map(|(t, q)| (*t, q.norm_pu)).collect();
    let (first_nonzero, growth, rate, window) = fit_drift(&norms);
    match rate {
        Some(r) => info!("drift growth {growth:.3e}, fitted rate {r:.4} over {window} samples"),
        None => warn!("degenerate drift fit: ‖P_σu‖ never exceeded {DRIFT_WINDOW_FACTOR:e} times its first nonzero value"),
    }
    let mut summary = create_output(&cfg.output_dir, "drift_fit.txt")?;
    writeln!(summary, "growth={growth:e}")?;
    writeln!(summary, "rate={}", rate.map(|r| format!("{r:e}")).unwrap_or_else(|| "none".into()))?;
    writeln!(summary, "window_samples={window}")?;
    summary.flush()?;
    Ok(DriftReport { status: outcome.status, series, first_nonzero, growth, rate, window })
}

/// Exponent `a` in `β^a f(β⁴t, βx)` for each model.
fn scaling_power(kind: ModelKind) -> i32 {
    match kind {
        ModelKind::Scalar => 2,
        ModelKind::Vector => 3,
    }
}

/// Coefficients of `factor·f(β·)`: mode `βk` receives `factor·f̂(k)`.
/// Modes whose image falls outside the grid are dropped.
pub fn dilate(f: &SpectralField, beta: u32, factor: f64) -> SpectralField {
    let grid = Arc::clone(f.grid());
    let coeffs = f.coeffs();
    let mut out = vec![Complex64::default(); grid.len()];
    let b = beta as i64;
    for (idx, c) in coeffs.iter().enumerate() {
        let (k1, k2) = grid.mode(idx);
        if let Some(j) = grid.mode_index(b * k1, b * k2) {
            if !grid.is_nyquist(b * k1) && !grid.is_nyquist(b * k2) {
                out[j] = c * factor;
            }
        }
    }
    SpectralField::from_spectral(grid, out).expect("layout preserved")
}

fn dilate_fields(fields: &ModelFields, beta: u32) -> ModelFields {
    let factor = (beta as f64).powi(scaling_power(fields.kind()));
    match fields {
        ModelFields::Scalar(phi) => ModelFields::Scalar(dilate(phi, beta, factor)),
        ModelFields::Vector(u) => ModelFields::Vector(u.map(|c| dilate(c, beta, factor))),
    }
}

/// Largest `|k|` carrying a coefficient above `1e−14` of the maximum.
fn spectral_extent(fields: &ModelFields) -> f64 {
    let grid = fields.grid();
    let coeffs = fields.to_coeffs();
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 1e-14 * max)
        .map(|(i, _)| grid.k_squared(i % grid.len()).sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub beta: u32,
    /// Largest relative `L²` difference between `w(t/β⁴)` and `β^a u(t, β·)`.
    pub discrepancy: f64,
    pub comparisons: usize,
}

/// Compare a run from `u⁰` with a run from its dilation `β^a u⁰(β·)` over
/// `t_final/β⁴`, with `a = 3` for the vector model and `a = 2` for the
/// scalar one. The equation is invariant only for `λ = 0`; other values give
/// a control.
pub fn scaling_symmetry_test(config: &ModelConfig, beta: u32) -> Result<ScalingReport> {
    config.validate()?;
    if beta == 0 {
        return Err(KseError::InvalidArgument("beta must be a positive integer".into()));
    }
    if beta as f64 >= config.n as f64 / 6.0 {
        return Err(KseError::InvalidArgument(format!(
            "beta = {beta} leaves no band-limited data at n = {} (need beta < n/6)",
            config.n
        )));
    }
    let grid = Grid::new(config.n)?;
    let mut initial = initial_data_on(config, &grid)?;
    if config.mean_subtraction {
        initial.fields = ModelFields::from_coeffs(config.model, &grid, {
            let mut c = initial.fields.to_coeffs();
            for block in c.chunks_mut(grid.len()) {
                block[0] = Complex64::default();
            }
            c
        });
    }
    let extent = spectral_extent(&initial.fields);
    if beta as f64 * extent >= grid.dealias_radius() {
        return Err(KseError::InvalidArgument(format!(
            "initial data reaches |k| = {extent:.3}; dilation by {beta} leaves the dealiased band"
        )));
    }
    let b4 = (beta as f64).powi(4);
    let scaled_config = ModelConfig { h: config.h / b4, t_final: config.t_final / b4, ..config.clone() };
    let scaled_initial = SimulationState { t: 0.0, step_count: 0, fields: dilate_fields(&initial.fields, beta) };

    let mut base = Vec::new();
    let mut scaled = Vec::new();
    let (a, b) = std::thread::scope(|s| {
        let base_run = s.spawn(|| {
            let mut obs = |st: &SimulationState| -> Result<()> {
                base.push(dilate_fields(&st.fields, beta).to_coeffs());
                Ok(())
            };
            simulate_from(config, initial, &mut [&mut obs])
        });
        let scaled_run = s.spawn(|| {
            let mut obs = |st: &SimulationState| -> Result<()> {
                scaled.push(st.fields.to_coeffs());
                Ok(())
            };
            simulate_from(&scaled_config, scaled_initial, &mut [&mut obs])
        });
        (base_run.join().expect("base run panicked"), scaled_run.join().expect("scaled run panicked"))
    });
    for outcome in [a?, b?] {
        if let RunStatus::Diverged { step, time } = outcome.status {
            return Err(KseError::Diverged { step, time });
        }
    }
    let mut discrepancy = 0.0f64;
    for (x, y) in base.iter().zip(&scaled) {
        let diff: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let denom = coefficient_energy(x).sqrt();
        let rel = coefficient_energy(&diff).sqrt() / if denom > 0.0 { denom } else { 1.0 };
        discrepancy = discrepancy.max(rel);
    }
    Ok(ScalingReport { beta, discrepancy, comparisons: base.len().min(scaled.len()) })
}

/// Relative `L²` distance between the final states of Galerkin-truncated
/// runs and the untruncated run. A truncation that diverges reports `inf`.
#[derive(Debug, Clone)]
pub struct GalerkinReport {
    pub levels: Vec<(f64, f64)>,
}

pub fn galerkin_experiment(cfg: &RunConfig) -> Result<GalerkinReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.model.n)?;
    let run = |g: Option<f64>| -> Result<SimulationOutcome> {
        let model = ModelConfig { galerkin_n: g, ..cfg.model.clone() };
        simulate_from(&model, initial_data_on(&model, &grid)?, &mut [])
    };
    let results: Vec<Result<SimulationOutcome>> = std::thread::scope(|s| {
        let mut handles = vec![s.spawn(|| run(None))];
        for &g in &cfg.galerkin_levels {
            handles.push(s.spawn(move || run(Some(g))));
        }
        handles.into_iter().map(|h| h.join().expect("galerkin run panicked")).collect()
    });
    let mut results = results.into_iter();
    let reference = results.next().expect("reference run")?;
    if let RunStatus::Diverged { step, time } = reference.status {
        return Err(KseError::Diverged { step, time });
    }
    let reference = reference.state.fields.to_coeffs();
    let norm = coefficient_energy(&reference).sqrt();
    let mut levels = Vec::new();
    for (&g, r) in cfg.galerkin_levels.iter().zip(results) {
        let r = r?;
        if let RunStatus::Diverged { time, .. } = r.status {
            warn!("galerkin truncation at {g} diverged at t = {time}");
            levels.push((g, f64::INFINITY));
            continue;
        }
        let c = r.state.fields.to_coeffs();
        let diff: Vec<Complex64> = c.iter().zip(&reference).map(|(a, b)| a - b).collect();
        levels.push((g, coefficient_energy(&diff).sqrt() / norm));
    }
    let mut out = create_output(&cfg.output_dir, "galerkin.csv")?;
    writeln!(out, "galerkin_n,rel_l2_error")?;
    for (g, e) in &levels {
        writeln!(out, "{g},{e:e}")?;
    }
    out.flush()?;
    Ok(GalerkinReport { levels })
}

/// Everything the figure scripts read: a plain run plus, for the scalar
/// model, a companion vector run from `∇φ⁰` that writes `drift.csv`.
pub fn figures_experiment(cfg: &RunConfig) -> Result<RunReport> {
    let report = run_plain(cfg)?;
    if cfg.model.model == ModelKind::Scalar {
        let mut vector = cfg.clone();
        vector.model.model = ModelKind::Vector;
        vector.experiment = Experiment::Drift;
        drift_experiment(&vector)?;
    }
    Ok(report)
}

/// Run the experiment named in `cfg`, returning the final run status.
pub fn execute(cfg: &RunConfig) -> Result<RunStatus> {
    match cfg.experiment {
        Experiment::Plain => Ok(run_plain(cfg)?.status),
        Experiment::Figures => Ok(figures_experiment(cfg)?.status),
        Experiment::Drift => Ok(drift_experiment(cfg)?.status),
        Experiment::Galerkin => galerkin_experiment(cfg).map(|_| RunStatus::Completed),
        Experiment::Scaling => {
            let report = scaling_symmetry_test(&cfg.model, cfg.beta)?;
            fs::create_dir_all(&cfg.output_dir)?;
            fs::write(
                cfg.output_dir.join("scaling.txt"),
                format!("beta={}\ndiscrepancy={:e}\ncomparisons={}\n", report.beta, report.discrepancy, report.comparisons),
            )?;
            info!("scaling discrepancy {:e} over {} samples", report.discrepancy, report.comparisons);
            Ok(RunStatus::Completed)
        }
    }
}

/// `0` on completion, `2` on divergence, `1` for every other error.
pub fn exit_code(result: &Result<RunStatus>) -> i32 {
    match result {
        Ok(RunStatus::Completed) => 0,
        Ok(RunStatus::Diverged { .. }) | Err(KseError::Diverged { .. }) => 2,
        Err(_) => 1,
    }
}

/// Deliberate defects for exercising the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Dealias radius pushed past the grid so nothing is filtered.
    DealiasMask,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn sample_field(grid: &Arc<Grid>, seed: u64, band: f64) -> SpectralField {
    let cfg = ModelConfig {
        n: grid.n(),
        init: InitialData::Random { seed, band, amplitude: 1.0 },
        ..ModelConfig::default()
    };
    match initial_data_on(&cfg, grid).expect("valid random data").fields {
        ModelFields::Scalar(f) => f,
        ModelFields::Vector(_) => unreachable!(),
    }
}

/// Error of the scalar model at `t_final` against a run with step
/// `min(hs)/ref_divisor`, and the fitted order.
pub fn order_study(n: usize, lambda: f64, t_final: f64, hs: &[f64], ref_divisor: f64) -> Result<(f64, Vec<f64>)> {
    let base = ModelConfig { n, lambda, t_final, save_every: u64::MAX, ..ModelConfig::default() };
    let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut runs: Vec<f64> = hs.to_vec();
    runs.push(h_min / ref_divisor);
    let finals: Vec<Result<Vec<Complex64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|&h| {
                let cfg = ModelConfig { h, ..base.clone() };
                s.spawn(move || {
                    let out = crate::model::simulate(&cfg, &mut [])?;
                    if let RunStatus::Diverged { step, time } = out.status {
                        return Err(KseError::Diverged { step, time });
                    }
                    Ok(out.state.fields.to_coeffs())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("order run panicked")).collect()
    });
    let mut finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = finals.pop().expect("reference run");
    let errors: Vec<f64> = finals
        .iter()
        .map(|c| {
            let d: Vec<Complex64> = c.iter().zip(&reference).map(|(a, b)| a - b).collect();
            coefficient_energy(&d).sqrt()
        })
        .collect();
    Ok((fitted_order(hs, &errors), errors))
}

/// Short scalar run from the three-sine profile; returns the worst ratio of resolution margin to the
/// largest shell amplitude over all samples.
fn resolution_probe(grid: &Arc<Grid>) -> Result<f64> {
    let cfg = ModelConfig { n: grid.n(), lambda: 8.1, h: 1e-3, t_final: 0.5, save_every: 10, ..ModelConfig::default() };
    let initial = initial_data_on(&cfg, grid)?;
    let mut worst = 0.0f64;
    let mut obs = |st: &SimulationState| -> Result<()> {
        let ModelFields::Scalar(phi) = &st.fields else { unreachable!() };
        let s = phi.shell_spectrum();
        worst = worst.max(s.resolution_margin / s.max_amplitude());
        Ok(())
    };
    let out = simulate_from(&cfg, initial, &mut [&mut obs])?;
    if !out.status.is_completed() {
        return Ok(f64::INFINITY);
    }
    Ok(worst)
}

/// `(theorem, N, m, p, r, admissible)` rows checked by [`validate`].
const TRUTH_TABLE: [(TheoremId, usize, f64, f64, f64, bool); 12] = [
    (TheoremId::GradU, 2, 0.0, f64::INFINITY, 1.0, true),
    (TheoremId::GradU, 2, 0.0, 1.0, 2.0, true),
    (TheoremId::GradU, 2, 0.0, 2.0, 4.0 / 3.0, true),
    (TheoremId::U, 2, 0.0, 1.0, 4.0, false),
    (TheoremId::U, 2, 0.0, f64::INFINITY, 4.0 / 3.0, true),
    (TheoremId::U, 2, 0.0, 2.0, 2.0, true),
    (TheoremId::U, 3, 0.0, 3.0, 2.0, true),
    (TheoremId::Phi, 2, 0.0, 1.0, 2.0, false),
    (TheoremId::Phi, 2, 0.0, f64::INFINITY, 2.0, true),
    (TheoremId::D2U2, 2, 0.0, 1.0, 1.0, false),
    (TheoremId::D2U2, 2, 0.0, 2.0, 4.0 / 3.0, true),
    (TheoremId::U1U2, 3, 0.0, 3.0, 2.0, true),
];

/// Run the built-in invariant checks.
pub fn validate(fault: Option<Fault>) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let g16 = Grid::new(16).expect("valid grid");
    let fields: Vec<SpectralField> = (0..20).map(|s| sample_field(&g16, s, 5.0)).collect();

    let round_trip = fields
        .iter()
        .map(|f| {
            let back = g16.inverse(&g16.forward(&f.values()));
            back.iter().zip(f.values().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    results.push(check("transform_round_trip", round_trip < 1e-13, format!("max error {round_trip:.2e}")));

    let deriv = {
        let f = SpectralField::from_fn(&g16, |x, y| (2.0 * x).sin() * y.cos());
        let d = f.derive((1, 1));
        let want = g16.sample(|x, y| -2.0 * (2.0 * x).cos() * y.sin());
        let lap = f.laplacian();
        let want_lap = g16.sample(|x, y| -5.0 * (2.0 * x).sin() * y.cos());
        d.values().iter().zip(&want).chain(lap.values().iter().zip(&want_lap)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    results.push(check("derivative_identities", deriv < 1e-12, format!("max error {deriv:.2e}")));

    let parseval = fields
        .iter()
        .map(|f| {
            let phys = f.values().iter().map(|v| v * v).sum::<f64>() / g16.len() as f64;
            let spec = coefficient_energy(&f.coeffs());
            (phys - spec).abs() / spec
        })
        .fold(0.0, f64::max);
    results.push(check("parseval", parseval < 1e-12, format!("max relative error {parseval:.2e}")));

    let interp = fields.iter().all(|f| {
        let h1 = diagnostics::sobolev_norm(f, 1.0, true);
        let h2 = diagnostics::sobolev_norm(f, 2.0, true);
        let h3 = diagnostics::sobolev_norm(f, 3.0, true);
        h2 * h2 <= h3 * h1 * (1.0 + 1e-13)
    });
    results.push(check("interpolation_inequality", interp, format!("{} fields", fields.len())));

    let (mut idem, mut ortho) = (0.0f64, 0.0f64);
    for pair in fields.chunks(2) {
        let u = VectorField::new(pair[0].clone(), pair[1].clone()).expect("same grid");
        let d = leray_project(&u);
        let again = leray_project(&d.v);
        let l2 = |w: &VectorField| (diagnostics::l2_squared(w.component(0)) + diagnostics::l2_squared(w.component(1))).sqrt();
        idem = idem.max(l2(&(&again.v - &d.v)) / l2(&d.v));
        let ip = diagnostics::inner_product(d.v.component(0), d.grad_q.component(0))
            + diagnostics::inner_product(d.v.component(1), d.grad_q.component(1));
        ortho = ortho.max(ip.abs() / (l2(&d.v) * l2(&d.grad_q)));
    }
    results.push(check("leray_idempotence", idem < 1e-12, format!("max relative change {idem:.2e}")));
    results.push(check("leray_orthogonality", ortho < 1e-12, format!("max normalized inner product {ortho:.2e}")));

    let h = 0.1;
    let limits = etd::precompute_coefficients(&[0.0], h).map(|c| {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        [rel(c.e[0], 1.0), rel(c.e2[0], 1.0), rel(c.q[0], h / 2.0), rel(c.f1[0], h / 6.0), rel(c.f2[0], h / 6.0), rel(c.f3[0], h / 6.0)]
            .into_iter()
            .fold(0.0, f64::max)
    });
    let limits = limits.unwrap_or(f64::INFINITY);
    results.push(check("etd_limits", limits < 1e-10, format!("max relative error {limits:.2e}")));

    match order_study(32, 4.0, 0.1, &[0.005, 0.0025, 0.00125, 0.000625], 16.0) {
        Ok((slope, _)) => results.push(check("etd_order", (slope - 4.0).abs() <= 0.3, format!("fitted order {slope:.3}"))),
        Err(e) => results.push(check("etd_order", false, e.to_string())),
    }

    let counts = [(0.5, 0), (8.1, 24), (29.1, 96)];
    let bad: Vec<String> = counts
        .iter()
        .filter(|&&(l, c)| unstable_mode_count(l, 2) != c)
        .map(|&(l, c)| format!("λ={l}: {} ≠ {c}", unstable_mode_count(l, 2)))
        .collect();
    results.push(check("unstable_mode_counts", bad.is_empty(), bad.join("; ")));

    let wrong: Vec<String> = TRUTH_TABLE
        .iter()
        .filter(|&&(t, d, m, p, r, want)| criterion_check(t, d, m, p, r).admissible != want)
        .map(|&(t, d, m, p, r, _)| format!("({t}, {d}, {m}, {p}, {r})"))
        .collect();
    results.push(check("criterion_truth_table", wrong.is_empty(), wrong.join("; ")));

    let lp_ok = fields.iter().all(|f| {
        let v = f.values();
        let norms: Vec<f64> = LP_EXPONENTS.iter().map(|&p| diagnostics::lp_of_samples(&v, p, true)).collect();
        norms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-13))
    });
    results.push(check("lp_monotonicity", lp_ok, format!("{} fields", fields.len())));

    let grid = match fault {
        Some(Fault::DealiasMask) => Grid::with_dealias_radius(16, 16.0),
        None => Grid::new(16),
    }
    .expect("valid grid");
    match resolution_probe(&grid) {
        Ok(ratio) => results.push(check(
            "resolution_margin",
            ratio < RESOLUTION_TOLERANCE,
            format!("margin / max amplitude = {ratio:.2e}"),
        )),
        Err(e) => results.push(check("resolution_margin", false, e.to_string())),
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_full_config() {
        let text = "
            # comment
            model = vector
            lambda = 8.1
            n = 64
            h = 1e-3
            t_final = 0.5
            save_every = 10
            galerkin_n = 12
            init = random
            seed = 7
            band = 4
            mean_subtraction = false
            output_dir = out
            experiment = drift
            csv_stride = 2
            checkpoint_stride = 5
        ";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.model.model, ModelKind::Vector);
        assert_eq!(cfg.model.n, 64);
        assert_eq!(cfg.model.galerkin_n, Some(12.0));
        assert!(matches!(cfg.model.init, InitialData::Random { seed: 7, band, .. } if band == 4.0));
        assert!(!cfg.model.mean_subtraction);
        assert_eq!(cfg.experiment, Experiment::Drift);
        assert_eq!(cfg.csv_stride, 2);
        assert_eq!(cfg.checkpoint_stride, 5);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = RunConfig::parse("n = 31").unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
        let err = RunConfig::parse("colour = red").unwrap_err().to_string();
        assert!(err.contains("`colour`"), "{err}");
        let err = RunConfig::parse("h = fast").unwrap_err().to_string();
        assert!(err.contains("`h`"), "{err}");
        let err = RunConfig::parse("experiment = drift").unwrap_err().to_string();
        assert!(err.contains("`model`"), "{err}");
        let err = RunConfig::parse("experiment = scaling").unwrap_err().to_string();
        assert!(err.contains("`lambda`"), "{err}");
        let err = RunConfig::parse("seed = 3").unwrap_err().to_string();
        assert!(err.contains("`seed`"), "{err}");
        assert!(RunConfig::parse("just words").is_err());
    }

    #[test]
    fn file_init() {
        let cfg = RunConfig::parse("init = file: data/phi.bin").unwrap();
        assert_eq!(cfg.model.init, InitialData::File(PathBuf::from("data/phi.bin")));
    }

    #[test]
    fn drift_fit_window() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, if i == 0 { 0.0 } else { 1e-16 * (2.0 * i as f64).exp() })).collect();
        let (first, growth, rate, window) = fit_drift(&series);
        assert_eq!(first.unwrap().0, 0.1);
        assert!((rate.unwrap() - 20.0).abs() < 1e-9);
        assert!(window > 2);
        assert!((growth - (2.0f64 * 18.0).exp()).abs() / growth < 1e-9);
        let (_, _, rate, _) = fit_drift(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!(rate.is_none());
    }

    #[test]
    fn dilation_moves_modes() {
        let g = Grid::new(32).unwrap();
        let f = SpectralField::from_fn(&g, |x, y| x.sin() + (x + y).cos());
        let d = dilate(&f, 2, 8.0);
        let want = g.sample(|x, y| 8.0 * ((2.0 * x).sin() + (2.0 * x + 2.0 * y).cos()));
        let err = d.values().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn scaling_identity_and_rejections() {
        let cfg = ModelConfig { model: ModelKind::Vector, lambda: 0.0, n: 32, h: 1e-4, t_final: 2e-3, save_every: 5, ..ModelConfig::default() };
        let r = scaling_symmetry_test(&cfg, 1).unwrap();
        assert!(r.discrepancy < 1e-13, "{}", r.discrepancy);
        assert!(scaling_symmetry_test(&cfg, 6).is_err());
        assert!(scaling_symmetry_test(&cfg, 0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(RunStatus::Completed)), 0);
        assert_eq!(exit_code(&Ok(RunStatus::Diverged { step: 1, time: 0.1 })), 2);
        assert_eq!(exit_code(&Err(KseError::config("n", "bad"))), 1);
    }

    #[test]
    fn validation_detects_fault() {
        let ok = validate(None);
        let failed: Vec<_> = ok.iter().filter(|c| !c.passed).map(|c| (c.name, c.detail.clone())).collect();
        assert!(failed.is_empty(), "{failed:?}");
        let faulty = validate(Some(Fault::DealiasMask));
        let failed: Vec<_> = faulty.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(failed, vec!["resolution_margin"]);
    }
}
