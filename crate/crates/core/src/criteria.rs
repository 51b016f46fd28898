//! Registry of the regularity criteria and their admissible exponents.
//!
//! Each criterion asks that some quantity lie in `L_T^r W_x^{m,p}` (or
//! `L_T^r L_x^p`) with `(m, p, r)` inside a stated window and satisfying an
//! exponent relation `lhs = rhs`. Window endpoints are enforced exactly; the
//! relation is accepted within [`RELATION_TOLERANCE`].

use std::fmt;
use std::str::FromStr;

use crate::error::{KseError, Result};

pub const RELATION_TOLERANCE: f64 = 1e-12;

/// Which quantity a criterion constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoremId {
    /// `u ∈ L^r W^{m,p}`, N ∈ {2, 3}.
    U,
    /// `u₁ ∈ L^r W^{m,p}`, N = 2.
    U1,
    /// `u₁, u₂ ∈ L^r W^{m,p}`, N = 3.
    U1U2,
    /// `∇u ∈ L^r L^p`, N ∈ {2, 3}.
    GradU,
    /// `∇·u ∈ L^r L^p`, N ∈ {2, 3}.
    Div,
    /// `∂₂u₂ ∈ L^r L^p`, N = 2.
    D2U2,
    /// `φ ∈ L^r W^{m,p}`, N ∈ {2, 3}.
    Phi,
    /// `∂₁₂φ ∈ L^r L^p`, N = 2.
    D12Phi,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::U,
        TheoremId::U1,
        TheoremId::U1U2,
        TheoremId::GradU,
        TheoremId::Div,
        TheoremId::D2U2,
        TheoremId::Phi,
        TheoremId::D12Phi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::U => "U",
            TheoremId::U1 => "U1",
            TheoremId::U1U2 => "U1U2",
            TheoremId::GradU => "GRADU",
            TheoremId::Div => "DIV",
            TheoremId::D2U2 => "D2U2",
            TheoremId::Phi => "PHI",
            TheoremId::D12Phi => "D12PHI",
        }
    }

    /// Whether the criterion is stated for a fractional space `W^{m,p}`
    /// (as opposed to plain `L^p`).
    pub fn is_fractional(self) -> bool {
        matches!(self, TheoremId::U | TheoremId::U1 | TheoremId::U1U2 | TheoremId::Phi)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = KseError;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| KseError::UnknownTheorem(s.to_string()))
    }
}

/// Result of checking one `(theorem, N, m, p, r)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSpec {
    pub theorem: TheoremId,
    pub dim: usize,
    pub m: f64,
    pub p: f64,
    pub r: f64,
    pub admissible: bool,
    pub relation_lhs: f64,
    pub relation_rhs: f64,
}

impl CriterionSpec {
    /// CSV column label, e.g. `crit_GRADU_p2_r1.3333`.
    pub fn column_name(&self) -> String {
        let m = if self.m != 0.0 {
            format!("_m{}", format_exponent(self.m))
        } else {
            String::new()
        };
        format!(
            "crit_{}{m}_p{}_r{}",
            self.theorem,
            format_exponent(self.p),
            format_exponent(self.r)
        )
    }
}

/// `inf`, integers without a fraction, otherwise at most four decimals.
pub fn format_exponent(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').to_string()
    }
}

#[derive(Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

fn closed(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi, lo_closed: true, hi_closed: true }
}

fn open(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi, lo_closed: false, hi_closed: false }
}

fn closed_open(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi, lo_closed: true, hi_closed: false }
}

fn open_closed(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi, lo_closed: false, hi_closed: true }
}

impl Interval {
    fn contains(self, x: f64) -> bool {
        if x.is_nan() {
            return false;
        }
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

const INF: f64 = f64::INFINITY;

/// `(p window, r window)` for each theorem, or `None` when the theorem says
/// nothing about this `(N, m)`.
fn windows(theorem: TheoremId, dim: usize, m: f64) -> Option<(Interval, Interval)> {
    let nf = dim as f64;
    let fractional = m > 0.0;
    match theorem {
        TheoremId::U => match (dim, fractional) {
            (2, true) => Some((closed_open(1.0, 2.0 / m), open_closed(4.0 / 3.0, 4.0 / (1.0 + m)))),
            (3, true) => Some((closed_open(3.0 / (m + 2.0), 3.0 / m), open_closed(4.0 / 3.0, 4.0))),
            (2, false) => Some((open_closed(1.0, INF), closed_open(4.0 / 3.0, 4.0))),
            (3, false) => Some((closed(1.5, INF), closed(4.0 / 3.0, 4.0))),
            _ => None,
        },
        TheoremId::U1 => match (dim, fractional) {
            (2, true) => Some((closed_open(1.0, 2.0 / m), open_closed(4.0 / 3.0, 4.0 / (1.0 + m)))),
            (2, false) => Some((open_closed(1.0, INF), closed_open(4.0 / 3.0, 4.0))),
            _ => None,
        },
        TheoremId::U1U2 => match (dim, fractional) {
            (3, true) => Some((closed_open(3.0 / (m + 2.0), 3.0 / m), open_closed(4.0 / 3.0, 4.0))),
            (3, false) => Some((closed(1.5, INF), closed(4.0 / 3.0, 4.0))),
            _ => None,
        },
        TheoremId::GradU | TheoremId::Div => match (dim, fractional) {
            (2 | 3, false) => Some((closed(1.0, INF), closed(1.0, 4.0 / (4.0 - nf)))),
            _ => None,
        },
        TheoremId::D2U2 | TheoremId::D12Phi => match (dim, fractional) {
            (2, false) => Some((closed(1.0, INF), closed(1.0, 2.0))),
            _ => None,
        },
        TheoremId::Phi => match (dim, fractional) {
            (2, true) => Some((closed_open(1.0, 2.0 / m), open_closed(2.0, 4.0 / m))),
            (3, true) => Some((open(3.0 / (m + 2.0), 3.0 / m), open(2.0, INF))),
            (2 | 3, false) => Some((open_closed(nf / 2.0, INF), closed_open(2.0, INF))),
            _ => None,
        },
    }
}

/// `(lhs, rhs)` of the exponent relation.
fn relation(theorem: TheoremId, dim: usize, m: f64, p: f64, r: f64) -> (f64, f64) {
    let nf = dim as f64;
    let inv_p = 1.0 / p;
    let inv_r = 1.0 / r;
    match theorem {
        TheoremId::U => (nf * inv_p + 2.0 * inv_r, (3.0 + m) / 2.0 + nf * inv_p / 2.0),
        TheoremId::U1 => (2.0 * inv_p + 2.0 * inv_r, inv_p + (3.0 + m) / 2.0),
        TheoremId::U1U2 => (3.0 * inv_p + 2.0 * inv_r, 1.5 * inv_p + (3.0 + m) / 2.0),
        TheoremId::GradU | TheoremId::Div => (nf * inv_p + 2.0 * inv_r, 2.0 + nf * inv_p / 2.0),
        TheoremId::D2U2 | TheoremId::D12Phi => (2.0 * inv_p + 2.0 * inv_r, 2.0 + inv_p),
        TheoremId::Phi => (nf * inv_p + 2.0 * inv_r, (2.0 + m) / 2.0 + nf * inv_p / 2.0),
    }
}

/// Classify `(theorem, N, m, p, r)`.
pub fn criterion_check(theorem: TheoremId, dim: usize, m: f64, p: f64, r: f64) -> CriterionSpec {
    let (relation_lhs, relation_rhs) = relation(theorem, dim, m, p, r);
    let in_window = (0.0..1.0).contains(&m)
        && windows(theorem, dim, m)
            .map(|(pw, rw)| pw.contains(p) && rw.contains(r))
            .unwrap_or(false);
    let admissible = in_window && (relation_lhs - relation_rhs).abs() <= RELATION_TOLERANCE;
    CriterionSpec {
        theorem,
        dim,
        m,
        p,
        r,
        admissible,
        relation_lhs,
        relation_rhs,
    }
}

/// [`criterion_check`] with the theorem given by name.
pub fn criterion_check_named(id: &str, dim: usize, m: f64, p: f64, r: f64) -> Result<CriterionSpec> {
    Ok(criterion_check(id.parse()?, dim, m, p, r))
}

/// Trapezoidal `∫ value(t)^r dt`; `r = ∞` returns the largest value.
pub fn criterion_integral(series: &[(f64, f64)], r: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(KseError::InvalidArgument("empty series".into()));
    }
    if !(r >= 1.0) {
        return Err(KseError::InvalidArgument(format!("exponent r must be ≥ 1, got {r}")));
    }
    if series.iter().any(|&(_, v)| !(v >= 0.0)) {
        return Err(KseError::InvalidArgument("norm values must be non-negative".into()));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(KseError::InvalidArgument("times must be strictly increasing".into()));
    }
    if r.is_infinite() {
        return Ok(series.iter().map(|&(_, v)| v).fold(0.0, f64::max));
    }
    Ok(series
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powf(r) + w[1].1.powf(r)))
        .sum())
}

/// Incrementally accumulated trapezoid, matching [`criterion_integral`].
#[derive(Debug, Clone)]
pub struct RunningIntegral {
    r: f64,
    last: Option<(f64, f64)>,
    value: f64,
}

impl RunningIntegral {
    pub fn new(r: f64) -> Self {
        RunningIntegral { r, last: None, value: 0.0 }
    }

    pub fn push(&mut self, t: f64, norm: f64) -> f64 {
        if self.r.is_infinite() {
            self.value = if self.last.is_none() { norm } else { self.value.max(norm) };
            self.last = Some((t, norm));
            return self.value;
        }
        let powered = norm.powf(self.r);
        if let Some((t0, p0)) = self.last {
            self.value += 0.5 * (t - t0) * (p0 + powered);
        }
        self.last = Some((t, powered));
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Admissible 2D criteria monitored during scalar-model runs.
pub fn default_monitors(dim: usize) -> Vec<CriterionSpec> {
    let tuples: [(TheoremId, f64, f64, f64); 12] = [
        (TheoremId::U, 0.0, INF, 4.0 / 3.0),
        (TheoremId::U, 0.0, 4.0, 1.6),
        (TheoremId::U1, 0.0, INF, 4.0 / 3.0),
        (TheoremId::GradU, 0.0, 2.0, 4.0 / 3.0),
        (TheoremId::GradU, 0.0, INF, 1.0),
        (TheoremId::Div, 0.0, 2.0, 4.0 / 3.0),
        (TheoremId::Div, 0.0, INF, 1.0),
        (TheoremId::D2U2, 0.0, INF, 1.0),
        (TheoremId::Phi, 0.0, INF, 2.0),
        (TheoremId::Phi, 0.0, 2.0, 4.0),
        (TheoremId::D12Phi, 0.0, INF, 1.0),
        (TheoremId::D12Phi, 0.0, 2.0, 4.0 / 3.0),
    ];
    tuples
        .iter()
        .map(|&(t, m, p, r)| criterion_check(t, dim, m, p, r))
        .filter(|c| c.admissible)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let a = criterion_check(TheoremId::GradU, 2, 0.0, INF, 1.0);
        assert!(a.admissible);
        let b = criterion_check(TheoremId::GradU, 2, 0.0, 1.0, 2.0);
        assert!(b.admissible);
        assert!((b.relation_rhs - 3.0).abs() < 1e-15);
        for r in [1.0, 4.0 / 3.0, 2.0, 3.0] {
            assert!(!criterion_check(TheoremId::U, 2, 0.0, 1.0, r).admissible);
        }
    }

    #[test]
    fn unknown_theorem() {
        assert!(matches!(
            criterion_check_named("NSE", 2, 0.0, 2.0, 2.0),
            Err(KseError::UnknownTheorem(_))
        ));
        assert!(criterion_check_named("gradu", 2, 0.0, INF, 1.0).unwrap().admissible);
    }

    #[test]
    fn default_monitors_all_admissible() {
        assert_eq!(default_monitors(2).len(), 12);
        assert!(default_monitors(2).iter().all(|c| c.admissible));
    }

    #[test]
    fn column_names() {
        let c = criterion_check(TheoremId::GradU, 2, 0.0, 2.0, 4.0 / 3.0);
        assert_eq!(c.column_name(), "crit_GRADU_p2_r1.3333");
        let c = criterion_check(TheoremId::D12Phi, 2, 0.0, INF, 1.0);
        assert_eq!(c.column_name(), "crit_D12PHI_pinf_r1");
        let c = criterion_check(TheoremId::U, 2, 0.5, 2.0, 2.0);
        assert_eq!(c.column_name(), "crit_U_m0.5_p2_r2");
    }

    #[test]
    fn integral_examples() {
        let series: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 0.3, 2.0)).collect();
        assert!((criterion_integral(&series, 3.0).unwrap() - 8.0 * 3.0).abs() < 1e-12);
        assert_eq!(criterion_integral(&[(0.5, 4.0)], 2.0).unwrap(), 0.0);
        let m = 10_000;
        let ramp: Vec<(f64, f64)> = (0..m).map(|i| {
            let t = i as f64 / (m - 1) as f64;
            (t, t)
        }).collect();
        assert!((criterion_integral(&ramp, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(criterion_integral(&ramp, INF).unwrap(), 1.0);
        assert!(criterion_integral(&[], 2.0).is_err());
        assert!(criterion_integral(&[(0.0, 1.0), (0.0, 1.0)], 2.0).is_err());
        assert!(criterion_integral(&[(0.0, -1.0)], 2.0).is_err());
    }

    #[test]
    fn running_integral_matches_batch() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = i as f64 * 0.01 + (i as f64 * 0.37).sin().abs() * 1e-3;
            (t, 1.0 + (3.0 * t).cos())
        }).collect();
        for r in [1.0, 4.0 / 3.0, 2.0, INF] {
            let mut acc = RunningIntegral::new(r);
            for &(t, v) in &series {
                acc.push(t, v);
            }
            let batch = criterion_integral(&series, r).unwrap();
            assert!((acc.value() - batch).abs() < 1e-12 * batch.max(1.0));
        }
    }
}
