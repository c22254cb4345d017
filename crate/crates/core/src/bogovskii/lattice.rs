use crate::error::{Error, Result};
use crate::grid::{norm, Grid, Point};

/// The box of ambient nodes around an annulus center, in reference units.
///
/// Node `j` in `[-K, K]^d` is the ambient node `base + j` and sits at
/// `y_j = (j - frac) δ`, `δ = h / r`, with `K = ceil(2/δ) + 3`. Unknowns of the
/// annulus problem reach `|j_k| <= K - 2`, so constraint nodes and their stencil
/// neighbors stay inside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub(crate) dim: usize,
    pub(crate) delta: f64,
    pub(crate) frac: Point,
    pub(crate) half: i64,
    pub(crate) side: usize,
}

impl Lattice {
    pub fn new(dim: usize, delta: f64, frac: Point) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Argument(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Resolution(format!(
                "annulus spacing h/r = {delta} must lie in (0, 1]"
            )));
        }
        let half = (2.0 / delta).ceil() as i64 + 3;
        Ok(Self {
            dim,
            delta,
            frac,
            half,
            side: (2 * half + 1) as usize,
        })
    }

    /// Lattice of the annulus with inner radius `radius` around `center`, and
    /// the ambient integer coordinates of its node `j = 0`.
    pub fn for_ball(grid: &Grid, center: &Point, radius: f64) -> Result<(Self, [i64; 3])> {
        let (delta, frac, base) = lattice_params(grid, center, radius)?;
        Ok((Self::new(grid.dim(), delta, frac)?, base))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn frac(&self) -> Point {
        self.frac
    }

    /// Nodes per axis, `2K + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer offset `j` of a local node.
    pub fn offset(&self, local: usize) -> [i64; 3] {
        let mut j = [0i64; 3];
        let mut rem = local;
        for k in (0..self.dim).rev() {
            j[k] = (rem % self.side) as i64 - self.half;
            rem /= self.side;
        }
        j
    }

    pub fn local_index(&self, j: [i64; 3]) -> Option<usize> {
        let mut idx = 0;
        for &jk in j.iter().take(self.dim) {
            if jk < -self.half || jk > self.half {
                return None;
            }
            idx = idx * self.side + (jk + self.half) as usize;
        }
        Some(idx)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Reference coordinate `y_j = (j - frac) δ`.
    pub fn position(&self, local: usize) -> Point {
        let j = self.offset(local);
        let mut y = [0.0; 3];
        for k in 0..self.dim {
            y[k] = (j[k] as f64 - self.frac[k]) * self.delta;
        }
        y
    }

    /// `|y_j|`, the distance to the center in units of the radius.
    pub fn scaled_distance(&self, local: usize) -> f64 {
        norm(&self.position(local))
    }

    pub fn ambient_indices(&self, grid: &Grid, base: [i64; 3]) -> Vec<usize> {
        (0..self.len())
            .map(|idx| {
                let j = self.offset(idx);
                grid.wrap_index([base[0] + j[0], base[1] + j[1], base[2] + j[2]])
            })
            .collect()
    }
}

/// `(δ, frac, base)` of the reference lattice for an annulus of inner radius
/// `radius` around `center`. Requires `h <= radius <= L/8`.
pub fn lattice_params(grid: &Grid, center: &Point, radius: f64) -> Result<(f64, Point, [i64; 3])> {
    let h = grid.spacing();
    if !(radius >= h) {
        return Err(Error::Resolution(format!(
            "annulus radius {radius} below the grid spacing {h}"
        )));
    }
    if radius > grid.len() / 8.0 {
        return Err(Error::Argument(format!(
            "annulus radius {radius} above L/8 = {}",
            grid.len() / 8.0
        )));
    }
    let c = grid.wrap_point(*center);
    let mut frac = [0.0; 3];
    let mut base = [0i64; 3];
    for k in 0..grid.dim() {
        let t = c[k] / h;
        base[k] = t.floor() as i64;
        frac[k] = t - t.floor();
    }
    Ok((h / radius, frac, base))
}
