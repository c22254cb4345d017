//! Transform-space solves on the periodic grid.
//!
//! The centered difference acts on the mode `exp(2πi m·x / L)` as multiplication
//! by `i s_k / h` with `s_k = sin(2π m_k / n)`. The symbol is set to exactly zero
//! at `m_k = 0` and `m_k = n/2` and is exactly odd in `m_k`, so real fields map
//! to real fields.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Grid, ScalarField, VectorField};

fn fft_nd(grid: &Grid, buf: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        for start in 0..grid.num_nodes() {
            if (start / stride) % n != 0 {
                continue;
            }
            for (i, z) in line.iter_mut().enumerate() {
                *z = buf[start + i * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, z) in line.iter().enumerate() {
                buf[start + i * stride] = *z;
            }
        }
    }
    if inverse {
        let scale = 1.0 / grid.num_nodes() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

fn forward(f: &ScalarField) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = f.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(f.grid(), &mut buf, false);
    buf
}

fn inverse_real(grid: &Grid, mut buf: Vec<Complex64>) -> ScalarField {
    fft_nd(grid, &mut buf, true);
    ScalarField::from_data(grid, buf.into_iter().map(|z| z.re).collect())
}

/// `sin(2π m / n)` for `m` in `0..n`, exactly zero at `0` and `n/2`, exactly odd.
fn sine_symbol(n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for m in 1..n / 2 {
        let v = (2.0 * std::f64::consts::PI * m as f64 / n as f64).sin();
        s[m] = v;
        s[n - m] = -v;
    }
    s
}

/// Leray projection for the centered-difference divergence.
pub fn leray_project(v: &VectorField) -> VectorField {
    project_with_potential(v).0
}

/// Returns `(w, φ)` with `div w = 0` and `v = w + ∇φ` (centered gradient),
/// `φ` of zero mean.
pub fn project_with_potential(v: &VectorField) -> (VectorField, ScalarField) {
    let grid = *v.grid();
    let d = grid.dim();
    let h = grid.spacing();
    let sym = sine_symbol(grid.n());
    let mut hat: Vec<Vec<Complex64>> = (0..d).map(|k| forward(&v.component(k))).collect();
    let mut phi = vec![Complex64::default(); grid.num_nodes()];
    for idx in 0..grid.num_nodes() {
        let m = grid.multi_index(idx);
        let mut s = [0.0; 3];
        let mut s2 = 0.0;
        for k in 0..d {
            s[k] = sym[m[k]];
            s2 += s[k] * s[k];
        }
        if s2 == 0.0 {
            continue;
        }
        let mut sv = Complex64::default();
        for k in 0..d {
            sv += hat[k][idx] * s[k];
        }
        let c = sv / s2;
        for k in 0..d {
            hat[k][idx] -= c * s[k];
        }
        // G φ = (i s / h) φ̂ must equal s c
        phi[idx] = c * Complex64::new(0.0, -h);
    }
    let comps: Vec<ScalarField> = hat.into_iter().map(|b| inverse_real(&grid, b)).collect();
    (VectorField::from_components(&comps), inverse_real(&grid, phi))
}

/// Solves `a u - b Δ u = f` with the 5-point (7-point in 3D) Laplacian.
/// Requires `a > 0`, `b >= 0`.
pub fn screened_poisson(f: &ScalarField, a: f64, b: f64) -> ScalarField {
    let grid = *f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let lap: Vec<f64> = (0..n)
        .map(|m| {
            let s = (std::f64::consts::PI * m as f64 / n as f64).sin();
            4.0 * s * s / (h * h)
        })
        .collect();
    let mut hat = forward(f);
    for (idx, z) in hat.iter_mut().enumerate() {
        let m = grid.multi_index(idx);
        let mut l = 0.0;
        for k in 0..grid.dim() {
            l += lap[m[k]];
        }
        *z /= a + b * l;
    }
    inverse_real(&grid, hat)
}

/// 5-point (7-point in 3D) Laplacian in real space.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let n = grid.n();
    let inv = 1.0 / (grid.spacing() * grid.spacing());
    let src = f.data();
    let mut out = vec![0.0; src.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = -2.0 * grid.dim() as f64 * src[idx];
        for k in 0..grid.dim() {
            let stride = grid.stride(k);
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            acc += src[base + ((i + 1) % n) * stride] + src[base + ((i + n - 1) % n) * stride];
        }
        *o = acc * inv;
    }
    ScalarField::from_data(&grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, grad_scalar};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(g: &Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VectorField::from_fn(g, |_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
    }

    fn rel(a: &VectorField, b: &VectorField) -> f64 {
        (a - b).max_abs() / b.max_abs().max(1e-300)
    }

    #[test]
    fn solenoidal_input_is_fixed() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let v = VectorField::from_fn(&g, |x| {
            [(2.0 * PI * x[1]).sin(), (4.0 * PI * x[0]).cos(), 0.0]
        });
        assert!(rel(&leray_project(&v), &v) < 1e-12);
    }

    #[test]
    fn gradients_are_annihilated() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let psi = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let w = leray_project(&grad_scalar(&psi));
        assert!(w.max_abs() < 1e-12);
    }

    #[test]
    fn random_field_becomes_divergence_free() {
        for (d, n) in [(2, 64), (3, 16)] {
            let g = Grid::new(d, n, 1.0).unwrap();
            let v = random_field(&g, 7);
            let w = leray_project(&v);
            assert!(divergence(&w).max_abs() <= 1e-10 * v.max_abs());
            assert!(rel(&leray_project(&w), &w) < 1e-11);
        }
    }

    #[test]
    fn potential_recovers_gradient_part() {
        let g = Grid::new(2, 32, 2.0).unwrap();
        let v = random_field(&g, 9);
        let (w, phi) = project_with_potential(&v);
        let back = &w + &grad_scalar(&phi);
        assert!(rel(&back, &v) < 1e-11 || (&back - &v).max_abs() < 1e-11);
    }

    #[test]
    fn screened_poisson_inverts_operator() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = ScalarField::from_fn(&g, |_| rng.gen_range(-1.0..1.0));
        let (a, b) = (1.0, 0.003);
        let f = &u.scale(a) - &laplacian(&u).scale(b);
        let back = screened_poisson(&f, a, b);
        assert!((&back - &u).max_abs() < 1e-11);
    }
}
