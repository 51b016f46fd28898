//! Norms, energy-estimate inner products and the per-sample diagnostics row.
//!
//! `L^p` norms are Riemann sums over the grid; the normalized variant
//! divides by the area `4π²` so that `‖f‖_{L^p} ≤ ‖f‖_{L^∞}`. Sobolev norms
//! are exact lattice sums over the Fourier coefficients. Inner products in
//! [`DiagnosticsRecord`] are plain (un-normalized) integrals over the torus.

use std::f64::consts::PI;
use std::io::Write;

use crate::criteria::{CriterionSpec, RunningIntegral, TheoremId};
use crate::error::{KseError, Result};
use crate::field::{coefficient_energy, SpectralField, VectorField};
use crate::model::{ModelFields, ModelKind, SimulationState};

/// Exponents sampled for every monitored field.
pub const LP_EXPONENTS: [f64; 8] = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, f64::INFINITY];

pub const SCALAR_FIELDS: [&str; 7] = ["phi", "phi_1", "phi_2", "phi_11", "phi_12", "phi_22", "lap_phi"];
pub const VECTOR_FIELDS: [&str; 7] = ["u1", "u2", "d1u1", "d2u1", "d1u2", "d2u2", "div_u"];

const AREA: f64 = 4.0 * PI * PI;

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(KseError::InvalidArgument(format!("L^p exponent must be ≥ 1, got {p}")))
    }
}

/// Norm of raw grid samples. `p = ∞` is the grid maximum.
pub fn lp_of_samples(values: &[f64], p: f64, normalized: bool) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if p == 1.5 {
        values.iter().map(|v| v.abs() * v.abs().sqrt()).sum()
    } else if p.fract() == 0.0 && p <= 16.0 {
        let k = p as i32;
        values.iter().map(|v| v.abs().powi(k)).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    let mean = sum / values.len() as f64;
    let integral = if normalized { mean } else { mean * AREA };
    if p == 2.0 {
        integral.sqrt()
    } else {
        integral.powf(1.0 / p)
    }
}

/// `‖f‖_{L^p}`, optionally divided by the domain area.
pub fn lp_norm(f: &SpectralField, p: f64, normalized: bool) -> Result<f64> {
    check_p(p)?;
    Ok(lp_of_samples(&f.values(), p, normalized))
}

/// `L^p` norm of the pointwise Euclidean magnitude of several fields.
pub fn lp_norm_magnitude(fields: &[&SpectralField], p: f64, normalized: bool) -> Result<f64> {
    check_p(p)?;
    let len = fields[0].grid().len();
    let mut mag = vec![0.0f64; len];
    for f in fields {
        for (m, v) in mag.iter_mut().zip(f.values().iter()) {
            *m += v * v;
        }
    }
    mag.iter_mut().for_each(|m| *m = m.sqrt());
    Ok(lp_of_samples(&mag, p, normalized))
}

/// `‖f‖_{Ḣ^s} = (Σ|k|^{2s}|f̂|²)^{½}` or `‖f‖_{H^s} = (Σ(1+|k|^{2s})|f̂|²)^{½}`.
pub fn sobolev_norm(f: &SpectralField, s: f64, homogeneous: bool) -> f64 {
    let grid = f.grid();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k2 = grid.k_squared(idx);
            let w = if k2 == 0.0 && s > 0.0 { 0.0 } else { k2.powf(s) };
            let w = if homogeneous { w } else { 1.0 + w };
            w * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Bessel potential `(1−Δ)^{m/2} f`.
pub fn bessel_potential(f: &SpectralField, m: f64) -> SpectralField {
    let grid = f.grid().clone();
    f.map_modes(|idx, c| c * (1.0 + grid.k_squared(idx)).powf(m / 2.0))
}

fn check_m(m: f64) -> Result<()> {
    if (0.0..1.0).contains(&m) {
        Ok(())
    } else {
        Err(KseError::InvalidArgument(format!("smoothness m must lie in [0, 1), got {m}")))
    }
}

/// Normalized `W^{m,p}` norm realized as `‖(1−Δ)^{m/2} f‖_{L^p}`.
pub fn wmp_norm(f: &SpectralField, m: f64, p: f64) -> Result<f64> {
    check_m(m)?;
    if m == 0.0 {
        return lp_norm(f, p, true);
    }
    lp_norm(&bessel_potential(f, m), p, true)
}

/// `W^{m,p}` norm of the magnitude of a vector field.
pub fn wmp_norm_vector(u: &VectorField, m: f64, p: f64) -> Result<f64> {
    check_m(m)?;
    let g = u.map(|c| if m == 0.0 { c.clone() } else { bessel_potential(c, m) });
    lp_norm_magnitude(&[g.component(0), g.component(1)], p, true)
}

/// Un-normalized `∫ f g` over the torus.
pub fn inner_product(f: &SpectralField, g: &SpectralField) -> f64 {
    let dx = f.grid().spacing();
    let (a, b) = (f.values(), g.values());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() * dx * dx
}

/// Un-normalized `‖f‖²_{L²}` via Parseval.
pub fn l2_squared(f: &SpectralField) -> f64 {
    AREA * coefficient_energy(&f.coeffs())
}

/// `(u·∇u, u) = ∫ Σⱼ (u·∇uⱼ) uⱼ`.
pub fn advection_inner(u: &VectorField) -> f64 {
    let u1 = u.component(0).values().into_owned();
    let u2 = u.component(1).values().into_owned();
    let mut total = 0.0;
    for (j, uj) in [&u1, &u2].into_iter().enumerate() {
        let c = u.component(j);
        let d1 = c.derive((1, 0)).values().into_owned();
        let d2 = c.derive((0, 1)).values().into_owned();
        for i in 0..u1.len() {
            total += (u1[i] * d1[i] + u2[i] * d2[i]) * uj[i];
        }
    }
    let dx = u.grid().spacing();
    total * dx * dx
}

/// `−½((∇·u), |u|²)`, equal to [`advection_inner`] after integration by parts.
pub fn divergence_form(u: &VectorField) -> f64 {
    let div = u.divergence().values().into_owned();
    let u1 = u.component(0).values();
    let u2 = u.component(1).values();
    let dx = u.grid().spacing();
    -0.5 * div
        .iter()
        .zip(u1.iter().zip(u2.iter()))
        .map(|(d, (a, b))| d * (a * a + b * b))
        .sum::<f64>()
        * dx
        * dx
}

/// One sampled time's norms and energy-estimate quantities.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub model: ModelKind,
    /// Normalized `L^p` norms, one array per field in [`SCALAR_FIELDS`] or
    /// [`VECTOR_FIELDS`] order, exponents in [`LP_EXPONENTS`] order.
    pub lp: Vec<[f64; 8]>,
    /// Normalized `‖φ‖_{L²}` (or `‖u‖`).
    pub energy: f64,
    /// Normalized `‖∇φ‖_{L²}` (or `‖∇u‖`).
    pub enstrophy: f64,
    /// Normalized `‖Δφ‖_{L²}` (or `‖Δu‖`).
    pub palenstrophy: f64,
    /// `½(φ, |∇φ|²)`; NaN for the vector model.
    pub half_phi_gradsq: f64,
    /// `(φ, |∇φ|²) + ‖Δφ‖²`; NaN for the vector model.
    pub phi_gradsq_plus_lap: f64,
    /// `(u·∇u, u)`, with `u = ∇φ` for the scalar model.
    pub advection: f64,
    /// `2(u·∇u, u) + ‖Δu‖²`.
    pub advection_plus_lap: f64,
    pub max_shell_amplitude: f64,
    pub resolution_margin: f64,
}

impl DiagnosticsRecord {
    pub fn field_names(model: ModelKind) -> [&'static str; 7] {
        match model {
            ModelKind::Scalar => SCALAR_FIELDS,
            ModelKind::Vector => VECTOR_FIELDS,
        }
    }
}

fn lp_row(f: &SpectralField) -> [f64; 8] {
    let values = f.values();
    LP_EXPONENTS.map(|p| lp_of_samples(&values, p, true))
}

fn normalized_l2(fields: &[SpectralField]) -> f64 {
    (fields.iter().map(|f| coefficient_energy(&f.coeffs())).sum::<f64>()).sqrt()
}

/// Every field of [`DiagnosticsRecord`] for one state.
pub fn energy_record(state: &SimulationState) -> DiagnosticsRecord {
    match &state.fields {
        ModelFields::Scalar(phi) => scalar_record(state.t, phi),
        ModelFields::Vector(u) => vector_record(state.t, u),
    }
}

fn scalar_record(t: f64, phi: &SpectralField) -> DiagnosticsRecord {
    let phi = phi.transform(crate::field::Direction::Inverse);
    let p1 = phi.derive((1, 0));
    let p2 = phi.derive((0, 1));
    let p11 = phi.derive((2, 0));
    let p12 = phi.derive((1, 1));
    let p22 = phi.derive((0, 2));
    let lap = phi.laplacian();
    let lap1 = lap.derive((1, 0));
    let lap2 = lap.derive((0, 1));

    let fields = [&phi, &p1, &p2, &p11, &p12, &p22, &lap];
    let lp = fields.iter().map(|f| lp_row(f)).collect();

    let gradsq = &p1.product(&p1) + &p2.product(&p2);
    let phi_gradsq = inner_product(&phi, &gradsq);
    let lap_sq = l2_squared(&lap);
    let advection = -0.5 * inner_product(&lap, &gradsq);
    let grad_lap_sq = l2_squared(&lap1) + l2_squared(&lap2);
    let spectrum = phi.shell_spectrum();

    DiagnosticsRecord {
        t,
        model: ModelKind::Scalar,
        lp,
        energy: normalized_l2(std::slice::from_ref(&phi)),
        enstrophy: normalized_l2(&[p1, p2]),
        palenstrophy: normalized_l2(std::slice::from_ref(&lap)),
        half_phi_gradsq: 0.5 * phi_gradsq,
        phi_gradsq_plus_lap: phi_gradsq + lap_sq,
        advection,
        advection_plus_lap: 2.0 * advection + grad_lap_sq,
        max_shell_amplitude: spectrum.max_amplitude(),
        resolution_margin: spectrum.resolution_margin,
    }
}

fn vector_record(t: f64, u: &VectorField) -> DiagnosticsRecord {
    let u1 = u.component(0);
    let u2 = u.component(1);
    let d1u1 = u1.derive((1, 0));
    let d2u1 = u1.derive((0, 1));
    let d1u2 = u2.derive((1, 0));
    let d2u2 = u2.derive((0, 1));
    let div = &d1u1 + &d2u2;
    let fields = [u1, u2, &d1u1, &d2u1, &d1u2, &d2u2, &div];
    let lp = fields.iter().map(|f| lp_row(f)).collect();
    let lap1 = u1.laplacian();
    let lap2 = u2.laplacian();
    let advection = advection_inner(u);
    let s1 = u1.shell_spectrum();
    let s2 = u2.shell_spectrum();
    DiagnosticsRecord {
        t,
        model: ModelKind::Vector,
        lp,
        energy: normalized_l2(&[u1.clone(), u2.clone()]),
        enstrophy: normalized_l2(&[d1u1, d2u1, d1u2, d2u2]),
        palenstrophy: normalized_l2(&[lap1.clone(), lap2.clone()]),
        half_phi_gradsq: f64::NAN,
        phi_gradsq_plus_lap: f64::NAN,
        advection,
        advection_plus_lap: 2.0 * advection + l2_squared(&lap1) + l2_squared(&lap2),
        max_shell_amplitude: s1.max_amplitude().max(s2.max_amplitude()),
        resolution_margin: s1.resolution_margin.max(s2.resolution_margin),
    }
}

/// Value of the norm a criterion constrains, for the given state.
///
/// Returns `None` when the criterion's quantity is not defined for the
/// state's model (e.g. `φ` criteria on a vector run) or for 3D-only theorems.
pub fn criterion_norm(spec: &CriterionSpec, fields: &ModelFields) -> Result<Option<f64>> {
    let u = fields.velocity();
    let (u1, u2) = (u.component(0), u.component(1));
    let value = match spec.theorem {
        TheoremId::U => wmp_norm_vector(&u, spec.m, spec.p)?,
        TheoremId::U1 => wmp_norm(u1, spec.m, spec.p)?,
        TheoremId::U1U2 => return Ok(None),
        TheoremId::GradU => {
            let parts = [u1.derive((1, 0)), u1.derive((0, 1)), u2.derive((1, 0)), u2.derive((0, 1))];
            lp_norm_magnitude(&parts.iter().collect::<Vec<_>>(), spec.p, true)?
        }
        TheoremId::Div => lp_norm(&u.divergence(), spec.p, true)?,
        TheoremId::D2U2 => lp_norm(&u2.derive((0, 1)), spec.p, true)?,
        TheoremId::Phi => match fields {
            ModelFields::Scalar(phi) => wmp_norm(phi, spec.m, spec.p)?,
            ModelFields::Vector(_) => return Ok(None),
        },
        TheoremId::D12Phi => match fields {
            ModelFields::Scalar(phi) => lp_norm(&phi.derive((1, 1)), spec.p, true)?,
            ModelFields::Vector(_) => return Ok(None),
        },
    };
    Ok(Some(value))
}

/// Running `∫‖·‖^r dt` for one criterion along a trajectory.
#[derive(Debug, Clone)]
pub struct CriterionMonitor {
    pub spec: CriterionSpec,
    integral: RunningIntegral,
}

impl CriterionMonitor {
    pub fn new(spec: CriterionSpec) -> Self {
        let integral = RunningIntegral::new(spec.r);
        CriterionMonitor { spec, integral }
    }

    pub fn update(&mut self, state: &SimulationState) -> Result<Option<f64>> {
        Ok(criterion_norm(&self.spec, &state.fields)?.map(|v| self.integral.push(state.t, v)))
    }

    pub fn value(&self) -> f64 {
        self.integral.value()
    }
}

/// Criteria whose quantity exists for `model`.
pub fn monitors_for(model: ModelKind, specs: &[CriterionSpec]) -> Vec<CriterionMonitor> {
    specs
        .iter()
        .filter(|s| {
            !(model == ModelKind::Vector && matches!(s.theorem, TheoremId::Phi | TheoremId::D12Phi))
                && s.theorem != TheoremId::U1U2
        })
        .cloned()
        .map(CriterionMonitor::new)
        .collect()
}

/// Writer for `diagnostics.csv`.
pub struct DiagnosticsCsv<W: Write> {
    out: W,
    model: ModelKind,
    monitors: Vec<CriterionMonitor>,
}

pub fn csv_header(model: ModelKind, monitors: &[CriterionMonitor]) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for name in DiagnosticsRecord::field_names(model) {
        for p in LP_EXPONENTS {
            cols.push(format!("lp_{name}_{}", crate::criteria::format_exponent(p)));
        }
    }
    cols.extend(
        [
            "energy",
            "enstrophy",
            "palenstrophy",
            "half_phi_gradsq",
            "phi_gradsq_plus_lap",
            "ugradu_u",
            "two_ugradu_u_plus_lap_u",
            "max_shell_amplitude",
            "resolution_margin",
        ]
        .map(String::from),
    );
    cols.extend(monitors.iter().map(|m| m.spec.column_name()));
    cols
}

impl<W: Write> DiagnosticsCsv<W> {
    pub fn new(mut out: W, model: ModelKind, monitors: Vec<CriterionMonitor>) -> Result<Self> {
        writeln!(out, "{}", csv_header(model, &monitors).join(","))?;
        Ok(DiagnosticsCsv { out, model, monitors })
    }

    /// Compute the record for `state`, update the running criterion
    /// integrals and append one row.
    pub fn record(&mut self, state: &SimulationState) -> Result<DiagnosticsRecord> {
        debug_assert_eq!(state.fields.kind(), self.model);
        let rec = energy_record(state);
        let mut row: Vec<String> = vec![format!("{:e}", rec.t)];
        for fieldrow in &rec.lp {
            row.extend(fieldrow.iter().map(|v| format!("{v:e}")));
        }
        row.extend(
            [
                rec.energy,
                rec.enstrophy,
                rec.palenstrophy,
                rec.half_phi_gradsq,
                rec.phi_gradsq_plus_lap,
                rec.advection,
                rec.advection_plus_lap,
                rec.max_shell_amplitude,
                rec.resolution_margin,
            ]
            .iter()
            .map(|v| format!("{v:e}")),
        );
        for m in &mut self.monitors {
            m.update(state)?;
            row.push(format!("{:e}", m.value()));
        }
        writeln!(self.out, "{}", row.join(","))?;
        Ok(rec)
    }

    pub fn monitors(&self) -> &[CriterionMonitor] {
        &self.monitors
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
