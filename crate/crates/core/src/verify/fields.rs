//! Deterministic solenoidal test fields. All are discrete curls, so their
//! centered divergence vanishes up to rounding.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{partial, Grid, Point, ScalarField, VectorField};

/// `(∂_1 ψ, -∂_0 ψ)` in 2D; the curl of `(ψ_0, ψ_1, ψ_2)` in 3D.
pub fn curl(potential: &[ScalarField]) -> VectorField {
    let grid = potential[0].grid();
    match grid.dim() {
        2 => VectorField::from_components(&[partial(&potential[0], 1), partial(&potential[0], 0).scale(-1.0)]),
        _ => {
            let d = |k: usize, a: usize| partial(&potential[k], a);
            VectorField::from_components(&[
                &d(2, 1) - &d(1, 2),
                &d(0, 2) - &d(2, 0),
                &d(1, 0) - &d(0, 1),
            ])
        }
    }
}

/// Sum of `modes` random Fourier modes with wavenumbers up to `kmax`, scaled
/// to `‖φ‖∞ ≈ 1`.
pub fn random_solenoidal(grid: &Grid, seed: u64, modes: usize, kmax: i64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let l = grid.len();
    let count = if d == 2 { 1 } else { 3 };
    let potential: Vec<ScalarField> = (0..count)
        .map(|_| {
            let terms: Vec<([f64; 3], f64, f64)> = (0..modes)
                .map(|_| {
                    let mut k = [0.0; 3];
                    loop {
                        for c in k.iter_mut().take(d) {
                            *c = rng.gen_range(-kmax..=kmax) as f64;
                        }
                        if k.iter().any(|&c| c != 0.0) {
                            break;
                        }
                    }
                    let kn = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                    (k, rng.gen_range(-1.0..1.0) / kn, rng.gen_range(0.0..2.0 * PI))
                })
                .collect();
            ScalarField::from_fn(grid, |x| {
                terms
                    .iter()
                    .map(|(k, a, ph)| {
                        let arg = 2.0 * PI * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]) / l + ph;
                        a * arg.sin() * l / (2.0 * PI)
                    })
                    .sum()
            })
        })
        .collect();
    let v = curl(&potential);
    let m = v.max_abs();
    if m > 0.0 {
        v.scale(1.0 / m)
    } else {
        v
    }
}

/// A fixed smooth 2D flow built from three low modes.
pub fn smooth_flow(grid: &Grid) -> VectorField {
    let l = grid.len();
    let psi = ScalarField::from_fn(grid, |x| {
        let (a, b) = (2.0 * PI * x[0] / l, 2.0 * PI * x[1] / l);
        (a.sin() * b.sin() + 0.5 * (2.0 * a + b).cos() + 0.3 * (a - 2.0 * b).sin()) * l / (2.0 * PI)
    });
    curl(&[psi])
}

/// `C^∞` bump, 1 at 0 and vanishing for `s ≥ 1`.
fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// 2D vortex supported in `B_radius(center)`: the curl of `radius · bump(|x - c| / radius)`.
pub fn compact_vortex(grid: &Grid, center: Point, radius: f64) -> VectorField {
    let psi = ScalarField::from_fn(grid, |x| {
        let dx = grid.wrapped_delta(&center, &x);
        radius * bump((dx[0] * dx[0] + dx[1] * dx[1]).sqrt() / radius)
    });
    curl(&[psi])
}
