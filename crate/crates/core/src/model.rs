//! Scalar and vector Kuramoto–Sivashinsky models and the time-stepping driver.
//!
//! Scalar form: `∂ₜφ + ½|∇φ|² + λΔφ + Δ²φ = 0`.
//! Vector form: `∂ₜu + (u·∇)u + λΔu + Δ²u = 0`.
//!
//! In Fourier space both have the diagonal linear symbol `λ|k|² − |k|⁴`,
//! integrated exactly by ETD-RK4; the quadratic term is formed in physical
//! space and dealiased.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KseError, Result};
use crate::etd::{self, EtdCoefficients};
use crate::field::{coefficient_energy, Grid, SpectralField, VectorField};
use crate::snapshot::{read_snapshots, write_snapshots, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Scalar,
    Vector,
}

impl FromStr for ModelKind {
    type Err = KseError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(ModelKind::Scalar),
            "vector" => Ok(ModelKind::Vector),
            _ => Err(KseError::config("model", format!("expected scalar|vector, got `{s}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Scalar => "scalar",
            ModelKind::Vector => "vector",
        })
    }
}

/// Initial condition selector.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `φ = sin(x+y) + sin x + sin y`; the vector model starts from `∇φ`.
    Kkp,
    /// `(-∂₂ψ, ∂₁ψ)` with `ψ` the three-sine profile (vector model only).
    CurlKkp,
    /// Random Fourier amplitudes on `0 < |k| ≤ band`, normalized `L²` size
    /// `amplitude`. The vector model uses the gradient of such a potential.
    Random { seed: u64, band: f64, amplitude: f64 },
    /// Snapshot file: one record for the scalar model, two for the vector.
    File(PathBuf),
}

pub const DEFAULT_RANDOM_BAND: f64 = 8.0;

/// Normalized `L²` norm of the three-sine profile, `√(3/2)`.
pub fn default_random_amplitude() -> f64 {
    1.5f64.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub lambda: f64,
    pub n: usize,
    pub h: f64,
    pub t_final: f64,
    pub save_every: u64,
    pub galerkin_n: Option<f64>,
    pub init: InitialData,
    pub mean_subtraction: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::Scalar,
            lambda: 8.1,
            n: 128,
            h: 2e-4,
            t_final: 3.0,
            save_every: 5,
            galerkin_n: None,
            init: InitialData::Kkp,
            mean_subtraction: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || self.n % 2 != 0 {
            return Err(KseError::config("n", format!("must be even and at least 8, got {}", self.n)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(KseError::config("h", format!("must be positive, got {}", self.h)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(KseError::config("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(KseError::config("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        if self.save_every == 0 {
            return Err(KseError::config("save_every", "must be at least 1"));
        }
        if let Some(g) = self.galerkin_n {
            if !(g >= 0.0) {
                return Err(KseError::config("galerkin_n", format!("must be non-negative, got {g}")));
            }
        }
        match &self.init {
            InitialData::CurlKkp if self.model == ModelKind::Scalar => {
                return Err(KseError::config("init", "curl_kkp requires model=vector"));
            }
            InitialData::Random { band, amplitude, .. } => {
                if !(*band >= 1.0 && *band < self.n as f64 / 3.0) {
                    return Err(KseError::config(
                        "band",
                        format!("must lie in [1, n/3) = [1, {:.3}), got {band}", self.n as f64 / 3.0),
                    ));
                }
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(KseError::config("amplitude", "must be non-negative"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_final`.
    pub fn total_steps(&self) -> u64 {
        (self.t_final / self.h).round().max(1.0) as u64
    }

    pub fn seed(&self) -> Option<u64> {
        match self.init {
            InitialData::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

/// Fourier symbol of the linear part, `λ|k|² − |k|⁴`.
pub fn linear_symbol(k: (i64, i64), lambda: f64) -> f64 {
    let k2 = (k.0 * k.0 + k.1 * k.1) as f64;
    lambda * k2 - k2 * k2
}

/// Number of nonzero `k ∈ ℤᴺ` with `|k|² < λ`.
pub fn unstable_mode_count(lambda: f64, dim: usize) -> usize {
    if !(lambda > 0.0) || dim == 0 {
        return 0;
    }
    let reach = lambda.sqrt().ceil() as i64;
    let span = (2 * reach + 1) as usize;
    let total = span.pow(dim as u32);
    (0..total)
        .filter(|&code| {
            let mut c = code;
            let mut k2 = 0i64;
            for _ in 0..dim {
                let k = (c % span) as i64 - reach;
                c /= span;
                k2 += k * k;
            }
            k2 > 0 && (k2 as f64) < lambda
        })
        .count()
}

/// Zero every coefficient with `|k| > n_modes`.
pub fn galerkin_truncate(f: &SpectralField, n_modes: f64) -> Result<SpectralField> {
    if !(n_modes >= 0.0) {
        return Err(KseError::InvalidArgument(format!("n_modes must be non-negative, got {n_modes}")));
    }
    let grid = Arc::clone(f.grid());
    let r2 = n_modes * n_modes;
    Ok(f.map_modes(|idx, c| if grid.k_squared(idx) > r2 { Complex64::default() } else { c }))
}

/// Per-grid tables for the quadratic terms.
#[derive(Debug, Clone)]
pub struct NonlinearOperator {
    grid: Arc<Grid>,
    ik1: Vec<Complex64>,
    ik2: Vec<Complex64>,
    keep: Vec<bool>,
}

impl NonlinearOperator {
    /// Dealiasing mask plus an optional Galerkin radius.
    pub fn new(grid: &Arc<Grid>, galerkin_n: Option<f64>) -> Self {
        let len = grid.len();
        let mut ik1 = Vec::with_capacity(len);
        let mut ik2 = Vec::with_capacity(len);
        let mut keep = Vec::with_capacity(len);
        let dealias2 = grid.dealias_radius().powi(2);
        let galerkin2 = galerkin_n.map(|g| g * g).unwrap_or(f64::INFINITY);
        for idx in 0..len {
            let (k1, k2) = grid.mode(idx);
            ik1.push(Complex64::new(0.0, grid.derivative_wavenumber(k1)));
            ik2.push(Complex64::new(0.0, grid.derivative_wavenumber(k2)));
            let ksq = grid.k_squared(idx);
            keep.push(ksq < dealias2 && ksq <= galerkin2);
        }
        NonlinearOperator {
            grid: Arc::clone(grid),
            ik1,
            ik2,
            keep,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn project(&self, coeffs: &mut [Complex64]) {
        for (c, &k) in coeffs.iter_mut().zip(&self.keep) {
            if !k {
                *c = Complex64::default();
            }
        }
    }

    fn gradient(&self, f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            f.iter().zip(&self.ik1).map(|(a, b)| a * b).collect(),
            f.iter().zip(&self.ik2).map(|(a, b)| a * b).collect(),
        )
    }

    /// `−½|∇φ|²`, dealiased, for scalar coefficients `phi`.
    pub fn scalar(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let (d1, d2) = self.gradient(phi);
        let (g1, g2) = self.grid.inverse_pair(&d1, &d2);
        let w: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| -0.5 * (a * a + b * b)).collect();
        let mut out = self.grid.forward(&w);
        self.project(&mut out);
        out
    }

    /// `−(u·∇)u`, dealiased, for `u` stored as `[û₁ | û₂]`.
    pub fn vector(&self, u: &[Complex64]) -> Vec<Complex64> {
        let len = self.grid.len();
        let (u1h, u2h) = u.split_at(len);
        let (a1, b1) = self.gradient(u1h);
        let (a2, b2) = self.gradient(u2h);
        let (u1, u2) = self.grid.inverse_pair(u1h, u2h);
        let (d1u1, d2u1) = self.grid.inverse_pair(&a1, &b1);
        let (d1u2, d2u2) = self.grid.inverse_pair(&a2, &b2);
        let mut n1 = Vec::with_capacity(len);
        let mut n2 = Vec::with_capacity(len);
        for i in 0..len {
            n1.push(-(u1[i] * d1u1[i] + u2[i] * d2u1[i]));
            n2.push(-(u1[i] * d1u2[i] + u2[i] * d2u2[i]));
        }
        let (mut h1, mut h2) = self.grid.forward_pair(&n1, &n2);
        self.project(&mut h1);
        self.project(&mut h2);
        h1.extend_from_slice(&h2);
        h1
    }
}

/// `dealias(−½|∇φ|²)`.
pub fn scalar_nonlinearity(phi: &SpectralField) -> SpectralField {
    let op = NonlinearOperator::new(phi.grid(), None);
    SpectralField::from_spectral(Arc::clone(phi.grid()), op.scalar(&phi.coeffs()))
        .expect("layout preserved")
}

/// Componentwise `dealias(−(u·∇)uⱼ)`.
pub fn vector_nonlinearity(u: &VectorField) -> VectorField {
    let grid = u.grid();
    let op = NonlinearOperator::new(grid, None);
    let out = op.vector(&stack(u));
    unstack(grid, out)
}

fn stack(u: &VectorField) -> Vec<Complex64> {
    let mut v = u.component(0).coeffs().into_owned();
    v.extend_from_slice(&u.component(1).coeffs());
    v
}

fn unstack(grid: &Arc<Grid>, mut coeffs: Vec<Complex64>) -> VectorField {
    let second = coeffs.split_off(grid.len());
    VectorField::new(
        SpectralField::from_spectral(Arc::clone(grid), coeffs).expect("layout preserved"),
        SpectralField::from_spectral(Arc::clone(grid), second).expect("layout preserved"),
    )
    .expect("shared grid")
}

/// Fields of a running simulation.
#[derive(Debug, Clone)]
pub enum ModelFields {
    Scalar(SpectralField),
    Vector(VectorField),
}

impl ModelFields {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            ModelFields::Scalar(f) => f.grid(),
            ModelFields::Vector(u) => u.grid(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelFields::Scalar(_) => ModelKind::Scalar,
            ModelFields::Vector(_) => ModelKind::Vector,
        }
    }

    /// Spectral coefficients, stacked `[û₁ | û₂]` for the vector model.
    pub fn to_coeffs(&self) -> Vec<Complex64> {
        match self {
            ModelFields::Scalar(f) => f.coeffs().into_owned(),
            ModelFields::Vector(u) => stack(u),
        }
    }

    /// Inverse of [`ModelFields::to_coeffs`].
    pub fn from_coeffs(kind: ModelKind, grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Self {
        match kind {
            ModelKind::Scalar => ModelFields::Scalar(
                SpectralField::from_spectral(Arc::clone(grid), coeffs).expect("layout preserved"),
            ),
            ModelKind::Vector => ModelFields::Vector(unstack(grid, coeffs)),
        }
    }

    /// Spatial means of each component.
    pub fn means(&self) -> Vec<f64> {
        match self {
            ModelFields::Scalar(f) => vec![f.mean()],
            ModelFields::Vector(u) => vec![u.component(0).mean(), u.component(1).mean()],
        }
    }

    /// Velocity-like field: `∇φ` for the scalar model, `u` for the vector model.
    pub fn velocity(&self) -> VectorField {
        match self {
            ModelFields::Scalar(f) => VectorField::gradient(f),
            ModelFields::Vector(u) => u.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub step_count: u64,
    pub fields: ModelFields,
}

fn kkp(grid: &Arc<Grid>) -> SpectralField {
    SpectralField::from_fn(grid, |x, y| (x + y).sin() + x.sin() + y.sin())
}

fn random_potential(grid: &Arc<Grid>, seed: u64, band: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let band2 = band * band;
    let mut raw = vec![Complex64::default(); len];
    for (idx, c) in raw.iter_mut().enumerate() {
        let k2 = grid.k_squared(idx);
        if k2 > 0.0 && k2 <= band2 {
            // Uniform on the unit disk.
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            *c = Complex64::from_polar(r, theta);
        }
    }
    let n = grid.n();
    let mut sym = vec![Complex64::default(); len];
    for i1 in 0..n {
        for i2 in 0..n {
            let j = ((n - i1) % n) * n + (n - i2) % n;
            sym[i1 * n + i2] = (raw[i1 * n + i2] + raw[j].conj()) * 0.5;
        }
    }
    SpectralField::from_spectral(Arc::clone(grid), sym).expect("layout preserved")
}

fn rescale_to(f: &SpectralField, amplitude: f64, current: f64) -> SpectralField {
    if current == 0.0 {
        f.clone()
    } else {
        f * (amplitude / current)
    }
}

/// Build the initial state described by `config`.
pub fn initial_data(config: &ModelConfig) -> Result<SimulationState> {
    config.validate()?;
    let grid = Grid::new(config.n)?;
    initial_data_on(config, &grid)
}

pub fn initial_data_on(config: &ModelConfig, grid: &Arc<Grid>) -> Result<SimulationState> {
    let fields = match (&config.init, config.model) {
        (InitialData::Kkp, ModelKind::Scalar) => ModelFields::Scalar(kkp(grid)),
        (InitialData::Kkp, ModelKind::Vector) => ModelFields::Vector(VectorField::gradient(&kkp(grid))),
        (InitialData::CurlKkp, ModelKind::Vector) => {
            ModelFields::Vector(VectorField::perp_gradient(&kkp(grid)))
        }
        (InitialData::CurlKkp, ModelKind::Scalar) => {
            return Err(KseError::config("init", "curl_kkp requires model=vector"))
        }
        (InitialData::Random { seed, band, amplitude }, kind) => {
            let phi = random_potential(grid, *seed, *band);
            match kind {
                ModelKind::Scalar => {
                    let norm = coefficient_energy(&phi.coeffs()).sqrt();
                    ModelFields::Scalar(rescale_to(&phi, *amplitude, norm))
                }
                ModelKind::Vector => {
                    let u = VectorField::gradient(&phi);
                    let norm = (coefficient_energy(&u.component(0).coeffs())
                        + coefficient_energy(&u.component(1).coeffs()))
                    .sqrt();
                    let s = if norm == 0.0 { 1.0 } else { amplitude / norm };
                    ModelFields::Vector(&u * s)
                }
            }
        }
        (InitialData::File(path), kind) => {
            let records = read_snapshots(path)?;
            let needed = if kind == ModelKind::Scalar { 1 } else { 2 };
            if records.len() < needed {
                return Err(KseError::CorruptSnapshot {
                    path: path.clone(),
                    reason: format!("expected {needed} record(s), found {}", records.len()),
                });
            }
            let fields: Vec<SpectralField> = records[..needed]
                .iter()
                .map(|r| r.to_field(grid))
                .collect::<Result<_>>()?;
            let mut it = fields.into_iter();
            match kind {
                ModelKind::Scalar => ModelFields::Scalar(it.next().unwrap()),
                ModelKind::Vector => {
                    ModelFields::Vector(VectorField::new(it.next().unwrap(), it.next().unwrap())?)
                }
            }
        }
    };
    Ok(SimulationState {
        t: 0.0,
        step_count: 0,
        fields,
    })
}

/// Callback invoked on sampled states.
pub trait Observer {
    fn observe(&mut self, state: &SimulationState) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&SimulationState) -> Result<()>,
{
    fn observe(&mut self, state: &SimulationState) -> Result<()> {
        self(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { step: u64, time: f64 },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub state: SimulationState,
    pub status: RunStatus,
    /// Samples at which the advective CFL advisory was violated.
    pub cfl_warnings: u64,
}

/// Time stepper with cached ETD weights for one `(grid, λ, h)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: ModelKind,
    op: NonlinearOperator,
    coeffs: EtdCoefficients,
    mean_subtraction: bool,
}

impl Stepper {
    pub fn new(config: &ModelConfig, grid: &Arc<Grid>) -> Result<Self> {
        let linear: Vec<f64> = (0..grid.len())
            .map(|idx| linear_symbol(grid.mode(idx), config.lambda))
            .collect();
        Ok(Stepper {
            kind: config.model,
            op: NonlinearOperator::new(grid, config.galerkin_n),
            coeffs: etd::precompute_coefficients(&linear, config.h)?,
            mean_subtraction: config.mean_subtraction,
        })
    }

    pub fn coefficients(&self) -> &EtdCoefficients {
        &self.coeffs
    }

    /// Advance stacked coefficients by one step.
    pub fn advance(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut next = match self.kind {
            ModelKind::Scalar => etd::step(state, |s| self.op.scalar(s), &self.coeffs)?,
            ModelKind::Vector => etd::step(state, |s| self.op.vector(s), &self.coeffs)?,
        };
        if self.mean_subtraction {
            for block in next.chunks_mut(self.coeffs.len()) {
                block[0] = Complex64::default();
            }
        }
        Ok(next)
    }

    /// Restrict initial coefficients to the Galerkin subspace, if any.
    fn prepare(&self, coeffs: &mut [Complex64], galerkin_n: Option<f64>) {
        if let Some(g) = galerkin_n {
            let grid = self.op.grid();
            let r2 = g * g;
            for block in coeffs.chunks_mut(grid.len()) {
                for (idx, c) in block.iter_mut().enumerate() {
                    if grid.k_squared(idx) > r2 {
                        *c = Complex64::default();
                    }
                }
            }
        }
        if self.mean_subtraction {
            for block in coeffs.chunks_mut(self.coeffs.len()) {
                block[0] = Complex64::default();
            }
        }
    }
}

/// Advective CFL bound `Δx / (½‖v‖_∞)` for the velocity-like field.
pub fn cfl_limit(fields: &ModelFields) -> f64 {
    let v = fields.velocity();
    let a = v.component(0).values();
    let b = v.component(1).values();
    let vmax = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| x.hypot(*y))
        .fold(0.0, f64::max);
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        fields.grid().spacing() / (0.5 * vmax)
    }
}

/// Run `config` from its own initial data.
pub fn simulate(config: &ModelConfig, observers: &mut [&mut dyn Observer]) -> Result<SimulationOutcome> {
    let initial = initial_data(config)?;
    simulate_from(config, initial, observers)
}

/// Run `config` from an explicit initial state.
pub fn simulate_from(
    config: &ModelConfig,
    initial: SimulationState,
    observers: &mut [&mut dyn Observer],
) -> Result<SimulationOutcome> {
    config.validate()?;
    if initial.fields.kind() != config.model {
        return Err(KseError::config("model", "initial state does not match the configured model"));
    }
    let grid = Arc::clone(initial.fields.grid());
    if grid.n() != config.n {
        return Err(KseError::GridMismatch(config.n, grid.n()));
    }
    let stepper = Stepper::new(config, &grid)?;
    let mut coeffs = initial.fields.to_coeffs();
    stepper.prepare(&mut coeffs, config.galerkin_n);

    let total = config.total_steps();
    let mut state = SimulationState {
        t: initial.t,
        step_count: initial.step_count,
        fields: ModelFields::from_coeffs(config.model, &grid, coeffs.clone()),
    };
    let t0 = initial.t;
    let start = initial.step_count;
    let mut cfl_warnings = 0;

    let sample = |state: &SimulationState, cfl_warnings: &mut u64, observers: &mut [&mut dyn Observer]| -> Result<()> {
        let limit = cfl_limit(&state.fields);
        if config.h >= limit {
            if *cfl_warnings == 0 {
                warn!(
                    "time step {} exceeds advective CFL bound {:.3e} at t={:.4}",
                    config.h, limit, state.t
                );
            }
            *cfl_warnings += 1;
        }
        for obs in observers.iter_mut() {
            obs.observe(state)?;
        }
        Ok(())
    };

    sample(&state, &mut cfl_warnings, observers)?;
    for i in 1..=total {
        let step_count = start + i;
        let time = t0 + i as f64 * config.h;
        coeffs = match stepper.advance(&coeffs) {
            Ok(c) => c,
            Err(KseError::Diverged { .. }) => {
                return Ok(SimulationOutcome {
                    state,
                    status: RunStatus::Diverged { step: step_count, time },
                    cfl_warnings,
                })
            }
            Err(e) => return Err(e),
        };
        if i % config.save_every == 0 || i == total {
            state = SimulationState {
                t: time,
                step_count,
                fields: ModelFields::from_coeffs(config.model, &grid, coeffs.clone()),
            };
            if i % config.save_every == 0 {
                sample(&state, &mut cfl_warnings, observers)?;
            }
        }
    }
    Ok(SimulationOutcome {
        state,
        status: RunStatus::Completed,
        cfl_warnings,
    })
}

/// Write `checkpoint_<step>.bin` plus its `.meta` sidecar into `dir`.
pub fn write_checkpoint(dir: &Path, state: &SimulationState, config: &ModelConfig) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = format!("checkpoint_{:08}", state.step_count);
    let path = dir.join(format!("{stem}.bin"));
    let records = match &state.fields {
        ModelFields::Scalar(phi) => vec![Snapshot::new(phi, state.t, config.lambda, "phi")],
        ModelFields::Vector(u) => vec![
            Snapshot::new(u.component(0), state.t, config.lambda, "u1"),
            Snapshot::new(u.component(1), state.t, config.lambda, "u2"),
        ],
    };
    write_snapshots(&path, &records)?;
    let seed = config.seed().map(|s| s.to_string()).unwrap_or_else(|| "none".into());
    let meta = format!(
        "model={}\nlambda={}\nh={}\nstep_count={}\nseed={}\n",
        config.model, config.lambda, config.h, state.step_count, seed
    );
    fs::write(dir.join(format!("{stem}.meta")), meta)?;
    Ok(path)
}
