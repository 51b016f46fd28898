//! Fourth-order exponential time differencing Runge–Kutta (ETD-RK4) for
//! systems whose stiff linear part is diagonal per Fourier mode.
//!
//! The coefficient functions have removable singularities at `hL = 0`. They
//! are evaluated as means over a circle of radius one around each `z = hL`;
//! for real `z` the circle is sampled at 32 points in the upper half plane
//! and the real part of the mean stands in for the full 64-point average.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{KseError, Result};

/// Number of contour nodes, counting conjugate pairs.
pub const CONTOUR_NODES: usize = 64;

/// Magnitude beyond which a step is reported as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

/// Per-mode ETD-RK4 weights for a fixed step `h`.
#[derive(Debug, Clone)]
pub struct EtdCoefficients {
    pub h: f64,
    /// `e^{hL}`
    pub e: Vec<f64>,
    /// `e^{hL/2}`
    pub e2: Vec<f64>,
    pub q: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f3: Vec<f64>,
}

impl EtdCoefficients {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

/// Contour-averaged coefficients `(Q, f1, f2, f3)` for a single `z = hL`,
/// before scaling by `h`.
fn contour_weights(z: f64) -> (f64, f64, f64, f64) {
    let half = CONTOUR_NODES / 2;
    let mut acc = [Complex64::default(); 4];
    for j in 0..half {
        let theta = PI * (j as f64 + 0.5) / half as f64;
        let zc = Complex64::new(z, 0.0) + Complex64::from_polar(1.0, theta);
        let ez = zc.exp();
        let z3 = zc * zc * zc;
        acc[0] += ((zc * 0.5).exp() - 1.0) / zc;
        acc[1] += (-4.0 - zc + ez * (4.0 - 3.0 * zc + zc * zc)) / z3;
        acc[2] += (2.0 + zc + ez * (zc - 2.0)) / z3;
        acc[3] += (-4.0 - 3.0 * zc - zc * zc + ez * (4.0 - zc)) / z3;
    }
    let m = half as f64;
    (acc[0].re / m, acc[1].re / m, acc[2].re / m, acc[3].re / m)
}

/// Precompute the ETD-RK4 weights for linear symbol `linear` and step `h`.
pub fn precompute_coefficients(linear: &[f64], h: f64) -> Result<EtdCoefficients> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(KseError::InvalidArgument(format!("time step must be positive, got {h}")));
    }
    let len = linear.len();
    let mut c = EtdCoefficients {
        h,
        e: Vec::with_capacity(len),
        e2: Vec::with_capacity(len),
        q: Vec::with_capacity(len),
        f1: Vec::with_capacity(len),
        f2: Vec::with_capacity(len),
        f3: Vec::with_capacity(len),
    };
    for &l in linear {
        let z = h * l;
        let (q, f1, f2, f3) = contour_weights(z);
        c.e.push(z.exp());
        c.e2.push((z / 2.0).exp());
        c.q.push(h * q);
        c.f1.push(h * f1);
        c.f2.push(h * f2);
        c.f3.push(h * f3);
    }
    Ok(c)
}

/// One ETD-RK4 step.
///
/// `state` may hold several components laid out back to back; each block of
/// `coeffs.len()` modes shares the same weights. `nonlin` maps a state to its
/// (already dealiased) nonlinear term in the same layout.
pub fn step<F>(state: &[Complex64], mut nonlin: F, coeffs: &EtdCoefficients) -> Result<Vec<Complex64>>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let modes = coeffs.len();
    assert!(
        modes > 0 && state.len() % modes == 0,
        "state length {} is not a multiple of {modes} modes",
        state.len()
    );
    let idx = |i: usize| i % modes;

    let nu = nonlin(state);
    let a: Vec<Complex64> = (0..state.len())
        .map(|i| coeffs.e2[idx(i)] * state[i] + coeffs.q[idx(i)] * nu[i])
        .collect();
    let na = nonlin(&a);
    let b: Vec<Complex64> = (0..state.len())
        .map(|i| coeffs.e2[idx(i)] * state[i] + coeffs.q[idx(i)] * na[i])
        .collect();
    let nb = nonlin(&b);
    let c: Vec<Complex64> = (0..state.len())
        .map(|i| coeffs.e2[idx(i)] * a[i] + coeffs.q[idx(i)] * (2.0 * nb[i] - nu[i]))
        .collect();
    let nc = nonlin(&c);

    let mut out = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let m = idx(i);
        let v = coeffs.e[m] * state[i]
            + coeffs.f1[m] * nu[i]
            + 2.0 * coeffs.f2[m] * (na[i] + nb[i])
            + coeffs.f3[m] * nc[i];
        if !v.re.is_finite() || !v.im.is_finite() || v.norm() > DIVERGENCE_THRESHOLD {
            return Err(KseError::Diverged { step: 0, time: 0.0 });
        }
        out.push(v);
    }
    Ok(out)
}
