//! Helmholtz–Hodge decomposition `u = ∇q + v` with `∇·v = 0`, and the
//! quantities that track how far a vector solution drifts off the gradient
//! manifold.
//!
//! Norms here are plain `L²(𝕋²)` norms, not area-normalized, so they enter
//! the energy identity for `v` without extra factors:
//!
//! ```text
//! ½ d/dt ‖v‖² + ‖Δv‖² = λ‖∇v‖² − 2(∇q·S, v),   S = ½(∇v − (∇v)ᵀ)
//! ```

use std::io::Write;

use num_complex::Complex64;

use crate::diagnostics::{inner_product, l2_squared};
use crate::field::{SpectralField, VectorField};

/// `u = grad_q + v`.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    /// Divergence-free part.
    pub v: VectorField,
    /// Gradient part `∇q`.
    pub grad_q: VectorField,
    /// Mean-zero potential.
    pub q: SpectralField,
}

/// Split `u` into its divergence-free and gradient parts.
///
/// The `k = 0` mode of `u` is constant and belongs to `v`. The derivative
/// wavenumbers (Nyquist zeroed) are used throughout so that `∇·v` vanishes
/// exactly under the same spectral derivative used everywhere else.
pub fn leray_project(u: &VectorField) -> HodgeDecomposition {
    let grid = u.grid().clone();
    let a = u.component(0).coeffs();
    let b = u.component(1).coeffs();
    let len = grid.len();
    let mut v1 = vec![Complex64::default(); len];
    let mut v2 = vec![Complex64::default(); len];
    let mut g1 = vec![Complex64::default(); len];
    let mut g2 = vec![Complex64::default(); len];
    let mut q = vec![Complex64::default(); len];
    for idx in 0..len {
        let (k1, k2) = grid.mode(idx);
        let d1 = grid.derivative_wavenumber(k1);
        let d2 = grid.derivative_wavenumber(k2);
        let kk = d1 * d1 + d2 * d2;
        if kk == 0.0 {
            v1[idx] = a[idx];
            v2[idx] = b[idx];
            continue;
        }
        let dot = d1 * a[idx] + d2 * b[idx];
        g1[idx] = d1 * dot / kk;
        g2[idx] = d2 * dot / kk;
        v1[idx] = a[idx] - g1[idx];
        v2[idx] = b[idx] - g2[idx];
        q[idx] = Complex64::new(0.0, -1.0) * dot / kk;
    }
    let field = |c: Vec<Complex64>| SpectralField::from_spectral(grid.clone(), c).expect("grid length");
    HodgeDecomposition {
        v: VectorField::new(field(v1), field(v2)).expect("same grid"),
        grad_q: VectorField::new(field(g1), field(g2)).expect("same grid"),
        q: field(q),
    }
}

/// Terms of the energy identity for the divergence-free part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftQuantities {
    /// `‖P_σu‖_{L²}`
    pub norm_pu: f64,
    /// `‖∇v‖_{L²}`
    pub norm_grad_v: f64,
    /// `‖Δv‖_{L²}`
    pub norm_lap_v: f64,
    /// `2(∇q·S, v)`
    pub coupling: f64,
}

/// `2(∇q·S, v) = 2 Σᵢⱼ ∫ ∂ᵢq Sᵢⱼ vⱼ` with `Sᵢⱼ = ½(∂ᵢvⱼ − ∂ⱼvᵢ)`.
pub fn coupling_term(decomp: &HodgeDecomposition) -> f64 {
    let v = &decomp.v;
    let dv = |i: usize, j: usize| {
        let order = if i == 0 { (1, 0) } else { (0, 1) };
        v.component(j).derive(order)
    };
    let mut total = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if i == j {
                continue;
            }
            let s = &(&dv(i, j) - &dv(j, i)) * 0.5;
            total += inner_product(&decomp.grad_q.component(i).product(&s), v.component(j));
        }
    }
    2.0 * total
}

pub fn drift_quantities(u: &VectorField) -> DriftQuantities {
    let d = leray_project(u);
    let (v1, v2) = (d.v.component(0), d.v.component(1));
    let grad_sq: f64 = [v1.derive((1, 0)), v1.derive((0, 1)), v2.derive((1, 0)), v2.derive((0, 1))]
        .iter()
        .map(l2_squared)
        .sum();
    DriftQuantities {
        norm_pu: (l2_squared(v1) + l2_squared(v2)).sqrt(),
        norm_grad_v: grad_sq.sqrt(),
        norm_lap_v: (l2_squared(&v1.laplacian()) + l2_squared(&v2.laplacian())).sqrt(),
        coupling: coupling_term(&d),
    }
}

pub const DRIFT_HEADER: &str = "t,norm_Pu_L2,norm_grad_v_L2,norm_lap_v_L2,coupling_term";

/// Writer for `drift.csv`.
pub struct DriftCsv<W: Write> {
    out: W,
}

impl<W: Write> DriftCsv<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{DRIFT_HEADER}")?;
        Ok(DriftCsv { out })
    }

    pub fn record(&mut self, t: f64, q: &DriftQuantities) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{:e},{:e},{:e},{:e},{:e}",
            t, q.norm_pu, q.norm_grad_v, q.norm_lap_v, q.coupling
        )
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn l2(u: &VectorField) -> f64 {
        (l2_squared(u.component(0)) + l2_squared(u.component(1))).sqrt()
    }

    fn random_vector(g: &Arc<Grid>, band: i64, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comp = || {
            let mut terms = Vec::new();
            for k1 in -band..=band {
                for k2 in 0..=band {
                    if k2 == 0 && k1 < 0 {
                        continue;
                    }
                    terms.push((k1 as f64, k2 as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                }
            }
            SpectralField::from_fn(g, move |x, y| {
                terms.iter().map(|&(a, b, c, s)| c * (a * x + b * y).cos() + s * (a * x + b * y).sin()).sum()
            })
        };
        let a = comp();
        let b = comp();
        VectorField::new(a, b).unwrap()
    }

    #[test]
    fn pure_gradient() {
        let g = Grid::new(32).unwrap();
        let phi = SpectralField::from_fn(&g, |x, y| x.sin() + y.sin());
        let u = VectorField::gradient(&phi);
        let d = leray_project(&u);
        assert!(l2(&d.v) < 1e-13);
        assert!(l2(&(&d.grad_q - &u)) < 1e-13);
        let dq = drift_quantities(&u);
        assert!(dq.norm_pu < 1e-12 && dq.norm_grad_v < 1e-12 && dq.coupling.abs() < 1e-12);
    }

    #[test]
    fn pure_curl() {
        let g = Grid::new(32).unwrap();
        let psi = SpectralField::from_fn(&g, |x, y| x.sin() * y.sin());
        let u = VectorField::perp_gradient(&psi);
        let d = leray_project(&u);
        assert!(l2(&(&d.v - &u)) < 1e-13);
        assert!(l2(&d.grad_q) < 1e-13);
        assert!(drift_quantities(&u).coupling.abs() < 1e-12);
        assert!((drift_quantities(&u).norm_pu - l2(&u)).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_divergence_free() {
        let g = Grid::new(16).unwrap();
        let u = VectorField::new(SpectralField::from_fn(&g, |_, _| 2.0), SpectralField::from_fn(&g, |_, _| -1.0)).unwrap();
        let d = leray_project(&u);
        assert!(l2(&(&d.v - &u)) < 1e-13);
        assert!(d.q.mean().abs() < 1e-15);
    }

    /// Solve the normal equations `min ‖u − ∇q‖²` over the truncated Fourier
    /// basis of real cosines and sines, with derivatives taken on the grid.
    #[test]
    fn matches_least_squares_oracle() {
        let g = Grid::new(16).unwrap();
        let u = random_vector(&g, 4, 3);
        let n = g.n();
        let h = 7; // |k_i| ≤ 7 keeps every basis function away from Nyquist.
        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for k1 in -h..=h {
            for k2 in 0..=h {
                if (k2 == 0 && k1 <= 0) || k1 * k1 + k2 * k2 == 0 {
                    continue;
                }
                let (a, b) = (k1 as f64, k2 as f64);
                // ∇cos(k·x) and ∇sin(k·x) sampled on the grid.
                let mut gc = (Vec::new(), Vec::new());
                let mut gs = (Vec::new(), Vec::new());
                for j1 in 0..n {
                    for j2 in 0..n {
                        let th = a * g.node(j1) + b * g.node(j2);
                        gc.0.push(-a * th.sin());
                        gc.1.push(-b * th.sin());
                        gs.0.push(a * th.cos());
                        gs.1.push(b * th.cos());
                    }
                }
                basis.push(gc);
                basis.push(gs);
            }
        }
        let m = basis.len();
        let dot = |a: &(Vec<f64>, Vec<f64>), b: (&[f64], &[f64])| -> f64 {
            a.0.iter().zip(b.0).map(|(x, y)| x * y).sum::<f64>() + a.1.iter().zip(b.1).map(|(x, y)| x * y).sum::<f64>()
        };
        let mut mat = vec![vec![0.0; m + 1]; m];
        let (u1, u2) = (u.component(0).values().into_owned(), u.component(1).values().into_owned());
        for i in 0..m {
            for j in 0..m {
                mat[i][j] = dot(&basis[i], (&basis[j].0, &basis[j].1));
            }
            mat[i][m] = dot(&basis[i], (&u1, &u2));
        }
        // Gaussian elimination with partial pivoting.
        for c in 0..m {
            let p = (c..m).max_by(|&a, &b| mat[a][c].abs().total_cmp(&mat[b][c].abs())).unwrap();
            mat.swap(c, p);
            for r in 0..m {
                if r != c {
                    let f = mat[r][c] / mat[c][c];
                    for k in c..=m {
                        mat[r][k] -= f * mat[c][k];
                    }
                }
            }
        }
        let len = g.len();
        let mut gq = (vec![0.0; len], vec![0.0; len]);
        for i in 0..m {
            let coef = mat[i][m] / mat[i][i];
            for p in 0..len {
                gq.0[p] += coef * basis[i].0[p];
                gq.1[p] += coef * basis[i].1[p];
            }
        }
        let d = leray_project(&u);
        let got = (d.grad_q.component(0).values(), d.grad_q.component(1).values());
        let err = got.0.iter().zip(&gq.0).chain(got.1.iter().zip(&gq.1)).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn drift_quantities_match_quadrature() {
        // u = ∇q + v with q = cos(x₁+2x₂), v = ∇^⊥ψ, ψ = sin(x₁)cos(x₂).
        let g = Grid::new(16).unwrap();
        let qx = |x: f64, y: f64| -(x + 2.0 * y).sin();
        let qy = |x: f64, y: f64| -2.0 * (x + 2.0 * y).sin();
        // v = (−∂₂ψ, ∂₁ψ) = (sin x sin y, cos x cos y)
        let v1 = |x: f64, y: f64| x.sin() * y.sin();
        let v2 = |x: f64, y: f64| x.cos() * y.cos();
        // ω = ∂₁v₂ − ∂₂v₁ = −2 sin x cos y
        let s12 = |x: f64, y: f64| -(x.sin() * y.cos());
        let u = VectorField::new(
            SpectralField::from_fn(&g, |x, y| qx(x, y) + v1(x, y)),
            SpectralField::from_fn(&g, |x, y| qy(x, y) + v2(x, y)),
        )
        .unwrap();
        let n = g.n();
        let w = g.spacing() * g.spacing();
        let (mut vv, mut coup) = (0.0, 0.0);
        for j1 in 0..n {
            for j2 in 0..n {
                let (x, y) = (g.node(j1), g.node(j2));
                vv += v1(x, y).powi(2) + v2(x, y).powi(2);
                // (∇q·S)_j = Σᵢ ∂ᵢq Sᵢⱼ, S₁₂ = −S₂₁ = s12.
                let a1 = -qy(x, y) * s12(x, y);
                let a2 = qx(x, y) * s12(x, y);
                coup += a1 * v1(x, y) + a2 * v2(x, y);
            }
        }
        let dq = drift_quantities(&u);
        assert!((dq.norm_pu - (vv * w).sqrt()).abs() < 1e-10);
        assert!((dq.coupling - 2.0 * coup * w).abs() < 1e-10);
        // ‖v‖² = 2π², ‖∇v‖² = 4π², ‖Δv‖² = 4‖v‖².
        assert!((dq.norm_grad_v - 2.0 * PI).abs() < 1e-10);
        assert!((dq.norm_lap_v - (8.0 * PI * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn drift_csv_format() {
        let mut buf = Vec::new();
        {
            let mut w = DriftCsv::new(&mut buf).unwrap();
            w.record(0.5, &DriftQuantities { norm_pu: 1.0, norm_grad_v: 2.0, norm_lap_v: 3.0, coupling: -4.0 }).unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DRIFT_HEADER);
        assert_eq!(lines[1].split(',').count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn idempotent_and_orthogonal(seed in any::<u64>()) {
            let g = Grid::new(16).unwrap();
            let u = random_vector(&g, 5, seed);
            let d = leray_project(&u);
            prop_assert!(l2(&(&(&d.v + &d.grad_q) - &u)) <= 1e-12 * l2(&u));
            let again = leray_project(&d.v);
            prop_assert!(l2(&(&again.v - &d.v)) <= 1e-12 * l2(&d.v).max(1.0));
            prop_assert!(l2(&again.grad_q) <= 1e-12 * l2(&d.v).max(1.0));
            let ip = inner_product(d.v.component(0), d.grad_q.component(0))
                + inner_product(d.v.component(1), d.grad_q.component(1));
            prop_assert!(ip.abs() <= 1e-12 * l2(&d.v) * l2(&d.grad_q));
            let div = d.v.divergence();
            let h1 = |f: &SpectralField| crate::diagnostics::sobolev_norm(f, 1.0, false).powi(2);
            let v_h1 = 2.0 * PI * (h1(d.v.component(0)) + h1(d.v.component(1))).sqrt();
            prop_assert!(l2_squared(&div).sqrt() <= 1e-12 * v_h1);
            prop_assert!(d.q.mean().abs() < 1e-15);
        }
    }
}
