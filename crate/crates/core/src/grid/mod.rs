//! Uniform periodic grids, sampled fields and the discrete calculus built on them.
//!
//! Nodes sit at `x = i * h` for `i` in `0..n` along each axis, `h = L / n`. Node
//! indices are row-major with axis 0 slowest. Every field sharing a grid has the
//! same `(dim, n, L)`.

mod calculus;
mod field;
mod io;
mod norms;
mod spectral;

pub use calculus::{divergence, grad_scalar, gradient, partial, sym_gradient, DIFF_TRUNCATION};
pub use field::{Field, Kind, Scalar, ScalarField, Tensor, TensorField, Vector, VectorField};
pub use io::{read_field, write_field};
pub use norms::{lp_norm, lp_norm_where, w1p_norm, w1p_norm_where};
pub use spectral::{laplacian, leray_project, project_with_potential, screened_poisson};

use crate::error::{Error, Result};

/// A point or displacement. Components past the grid dimension are zero.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    len: f64,
}

/// A grid node seen from some reference point: its flat index and the
/// unwrapped displacement from the reference point to the node.
#[derive(Debug, Clone, Copy)]
pub struct LocalNode {
    pub index: usize,
    pub offset: Point,
}

impl LocalNode {
    pub fn dist(&self) -> f64 {
        norm(&self.offset)
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Config(format!("box length must be positive, got {len}")));
        }
        Ok(Self { dim, n, len })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn spacing(&self) -> f64 {
        self.len / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Box volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.len.powi(self.dim as i32)
    }

    /// Quadrature weight `h^d` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Stride of axis `k` in the flat node index.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = index;
        for k in (0..self.dim).rev() {
            out[k] = rem % self.n;
            rem /= self.n;
        }
        out
    }

    /// Flat index of an integer node coordinate, wrapped periodically.
    pub fn wrap_index(&self, coords: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut index = 0;
        for &c in coords.iter().take(self.dim) {
            index = index * self.n + c.rem_euclid(n) as usize;
        }
        index
    }

    pub fn position(&self, index: usize) -> Point {
        let h = self.spacing();
        let m = self.multi_index(index);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = m[k] as f64 * h;
        }
        p
    }

    /// Maps a point into `[0, L)^d`.
    pub fn wrap_point(&self, p: Point) -> Point {
        let mut out = [0.0; 3];
        for k in 0..self.dim {
            let w = p[k].rem_euclid(self.len);
            out[k] = if w >= self.len { 0.0 } else { w };
        }
        out
    }

    /// Minimal-image displacement `b - a`.
    pub fn wrapped_delta(&self, a: &Point, b: &Point) -> Point {
        let mut out = [0.0; 3];
        for k in 0..self.dim {
            let d = b[k] - a[k];
            out[k] = d - self.len * (d / self.len).round();
        }
        out
    }

    pub fn wrapped_distance(&self, a: &Point, b: &Point) -> f64 {
        norm(&self.wrapped_delta(a, b))
    }

    /// All nodes in the axis-aligned box of half-width `reach` around `center`,
    /// in lexicographic order of their unwrapped integer coordinates.
    ///
    /// `reach` must stay below `L / 2` so that no node is visited twice.
    pub fn local_box(&self, center: &Point, reach: f64) -> Vec<LocalNode> {
        debug_assert!(reach < 0.5 * self.len);
        let h = self.spacing();
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..self.dim {
            lo[k] = ((center[k] - reach) / h).floor() as i64;
            hi[k] = ((center[k] + reach) / h).ceil() as i64;
        }
        let mut out = Vec::new();
        let mut cur = lo;
        loop {
            let mut offset = [0.0; 3];
            for k in 0..self.dim {
                offset[k] = cur[k] as f64 * h - center[k];
            }
            out.push(LocalNode {
                index: self.wrap_index(cur),
                offset,
            });
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// A closed-form ball `B_r(center)` on a periodic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    /// The center is wrapped into the box; `radius` must satisfy `0 < r < L/4`.
    pub fn new(grid: &Grid, center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.25 * grid.len()) {
            return Err(Error::Argument(format!(
                "ball radius {radius} outside (0, L/4) for L = {}",
                grid.len()
            )));
        }
        Ok(Self {
            center: grid.wrap_point(center),
            radius,
        })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Nodes at distance strictly less than the radius.
    pub fn nodes(&self, grid: &Grid) -> Vec<LocalNode> {
        grid.local_box(&self.center, self.radius)
            .into_iter()
            .filter(|node| node.dist() < self.radius)
            .collect()
    }

    /// Every node of the box around the ball out to `factor * radius`.
    pub fn neighborhood(&self, grid: &Grid, factor: f64) -> Vec<LocalNode> {
        grid.local_box(&self.center, factor * self.radius)
    }
}

/// Mean of `v` over the nodes of `ball`, with the node count.
pub fn ball_average(v: &VectorField, ball: &Ball) -> Result<(Point, usize)> {
    let grid = v.grid();
    let d = grid.dim();
    let nodes = ball.nodes(grid);
    if nodes.is_empty() {
        return Err(Error::DegenerateBall {
            radius: ball.radius(),
        });
    }
    // shifted by the first sample so that constants average exactly
    let base = v.at(nodes[0].index);
    let mut sum = [0.0; 3];
    for node in &nodes {
        let val = v.node(node.index);
        for k in 0..d {
            sum[k] += val[k] - base[k];
        }
    }
    let count = nodes.len();
    let mut avg = [0.0; 3];
    for k in 0..d {
        avg[k] = base[k] + sum[k] / count as f64;
    }
    Ok((avg, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 16, 1.0).is_err());
        assert!(Grid::new(2, 12, 1.0).is_err());
        assert!(Grid::new(2, 4, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
        assert!(Grid::new(3, 8, 2.0).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for idx in [0, 1, 7, 8, 63, 64, 511] {
            let m = g.multi_index(idx);
            assert_eq!(g.wrap_index([m[0] as i64, m[1] as i64, m[2] as i64]), idx);
        }
        assert_eq!(g.wrap_index([-1, 0, 0]), 7 * 64);
    }

    #[test]
    fn wrapped_distance_uses_minimal_image() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let d = g.wrapped_distance(&[0.05, 0.5, 0.0], &[0.95, 0.5, 0.0]);
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ball_average_of_constant_is_exact() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let v = VectorField::from_fn(&g, |_| [0.3, -1.7, 0.0]);
        let ball = Ball::new(&g, [0.97, 0.02, 0.0], 0.1).unwrap();
        let (avg, count) = ball_average(&v, &ball).unwrap();
        assert!(count > 20);
        assert_eq!(avg[0], 0.3);
        assert_eq!(avg[1], -1.7);
    }

    #[test]
    fn ball_average_of_odd_field_vanishes() {
        let g = Grid::new(2, 64, 1.0).unwrap();
        let c = g.position(g.wrap_index([20, 41, 0]));
        let v = VectorField::from_fn(&g, |x| {
            let dlt = g.wrapped_delta(&c, &x);
            [dlt[0], dlt[1], 0.0]
        });
        let ball = Ball::new(&g, c, 0.09).unwrap();
        let (avg, _) = ball_average(&v, &ball).unwrap();
        assert!(avg[0].abs() < 1e-12 && avg[1].abs() < 1e-12);
    }

    #[test]
    fn tiny_ball_off_node_is_degenerate() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let v = VectorField::zeros(&g);
        let ball = Ball::new(&g, [0.5 / 16.0, 0.5 / 16.0, 0.0], 0.01).unwrap();
        assert!(matches!(
            ball_average(&v, &ball),
            Err(Error::DegenerateBall { .. })
        ));
    }

    #[test]
    fn ball_radius_bounds() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        assert!(Ball::new(&g, [0.0; 3], 0.25).is_err());
        assert!(Ball::new(&g, [0.0; 3], -0.1).is_err());
    }
}
