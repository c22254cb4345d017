//! Smooth transition profile `H` and the annulus cutoffs built from it.

use crate::error::{Error, Result};
use crate::grid::{norm, Grid, Point, ScalarField};

/// Smoothness of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Infinite,
}

/// `H(z) = f(t) / (f(t) + f(1 - t))`, `t = 2(z - 1/4)`, `f(t) = exp(-1/t)` for
/// `t > 0`. Zero below `1/4`, one above `3/4`, `H(z) + H(1 - z) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub lo: f64,
    pub hi: f64,
    pub smoothness: Smoothness,
}

pub fn make_profile() -> CutoffProfile {
    CutoffProfile {
        lo: 0.25,
        hi: 0.75,
        smoothness: Smoothness::Infinite,
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Largest value of `H'`, attained at `z = 1/2`.
pub const MAX_SLOPE: f64 = 4.0;

impl CutoffProfile {
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.lo {
            return 0.0;
        }
        if z >= self.hi {
            return 1.0;
        }
        let t = 2.0 * (z - self.lo);
        let (a, b) = (bump(t), bump(1.0 - t));
        a / (a + b)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        if z <= self.lo || z >= self.hi {
            return 0.0;
        }
        let t = 2.0 * (z - self.lo);
        let s = 1.0 - t;
        let (a, b) = (bump(t), bump(s));
        let (da, db) = (a / (t * t), b / (s * s));
        2.0 * (da * b + a * db) / ((a + b) * (a + b))
    }

    /// Weights `(H(2 - s), H(s - 1))` of the inner average and the outer field.
    pub fn eval_partition(&self, s: f64) -> (f64, f64) {
        (self.eval(2.0 - s), self.eval(s - 1.0))
    }
}

pub fn eval_partition(profile: &CutoffProfile, s: f64) -> (f64, f64) {
    profile.eval_partition(s)
}

/// `ψ(σ) = H(1/4 + 2(σ - 1)) H(1/4 + 2(2 - σ))`: supported in `1 < σ < 2`,
/// equal to one on `[5/4, 7/4]`.
pub fn annulus_profile(sigma: f64) -> f64 {
    let p = make_profile();
    p.eval(0.25 + 2.0 * (sigma - 1.0)) * p.eval(0.25 + 2.0 * (2.0 - sigma))
}

/// `dψ/dσ`.
pub fn annulus_profile_slope(sigma: f64) -> f64 {
    let p = make_profile();
    let (z1, z2) = (0.25 + 2.0 * (sigma - 1.0), 0.25 + 2.0 * (2.0 - sigma));
    2.0 * p.derivative(z1) * p.eval(z2) - 2.0 * p.eval(z1) * p.derivative(z2)
}

/// `ψ_r(x) = ψ(|x - c| / r)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct AnnulusCutoff {
    center: Point,
    radius: f64,
    samples: ScalarField,
    gradient_bound: f64,
}

impl AnnulusCutoff {
    /// Requires `2h <= r <= L/8`.
    pub fn new(grid: &Grid, center: Point, radius: f64) -> Result<Self> {
        let h = grid.spacing();
        if !(radius >= 2.0 * h) {
            return Err(Error::Resolution(format!(
                "annulus radius {radius} below two grid spacings ({})",
                2.0 * h
            )));
        }
        if radius > grid.len() / 8.0 {
            return Err(Error::Argument(format!(
                "annulus radius {radius} above L/8 = {}",
                grid.len() / 8.0
            )));
        }
        let center = grid.wrap_point(center);
        let mut samples = ScalarField::zeros(grid);
        let mut slope: f64 = 0.0;
        for node in grid.local_box(&center, 2.0 * radius) {
            let sigma = node.dist() / radius;
            samples.data_mut()[node.index] = annulus_profile(sigma);
            slope = slope.max(annulus_profile_slope(sigma).abs());
        }
        Ok(Self {
            center,
            radius,
            samples,
            gradient_bound: slope,
        })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn samples(&self) -> &ScalarField {
        &self.samples
    }

    /// `r · max |∇ψ_r|` over the grid nodes.
    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    /// `ψ_r` at displacement `x` from the center.
    pub fn value_at(&self, x: &Point) -> f64 {
        annulus_profile(norm(x) / self.radius)
    }

    /// Exact gradient of `ψ_r` at displacement `x` from the center.
    pub fn gradient_at(&self, x: &Point) -> Point {
        let rho = norm(x);
        let mut g = [0.0; 3];
        if rho == 0.0 {
            return g;
        }
        let s = annulus_profile_slope(rho / self.radius) / (self.radius * rho);
        for k in 0..3 {
            g[k] = s * x[k];
        }
        g
    }
}

/// Annulus cutoff centered at the origin.
pub fn make_annulus_cutoff(radius: f64, grid: &Grid) -> Result<AnnulusCutoff> {
    AnnulusCutoff::new(grid, [0.0; 3], radius)
}
