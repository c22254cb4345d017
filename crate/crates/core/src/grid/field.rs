use std::marker::PhantomData;
use std::ops::{Add, Mul, Sub};

use super::{Grid, Point};

/// Rank of the per-node samples of a field.
pub trait Kind: Clone + Copy + std::fmt::Debug + PartialEq + Send + Sync + 'static {
    /// Name used in the field file header.
    const NAME: &'static str;
    fn components(dim: usize) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector;
/// `d x d` per node, entry `(i, j)` stored at `i * d + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor;

impl Kind for Scalar {
    const NAME: &'static str = "scalar";
    fn components(_: usize) -> usize {
        1
    }
}

impl Kind for Vector {
    const NAME: &'static str = "vector";
    fn components(dim: usize) -> usize {
        dim
    }
}

impl Kind for Tensor {
    const NAME: &'static str = "tensor";
    fn components(dim: usize) -> usize {
        dim * dim
    }
}

/// Samples at every grid node, component-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<K: Kind> {
    grid: Grid,
    data: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type ScalarField = Field<Scalar>;
pub type VectorField = Field<Vector>;
pub type TensorField = Field<Tensor>;

impl<K: Kind> Field<K> {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            data: vec![0.0; grid.num_nodes() * K::components(grid.dim())],
            _kind: PhantomData,
        }
    }

    /// Panics if the sample count does not match the grid.
    pub fn from_data(grid: &Grid, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            grid.num_nodes() * K::components(grid.dim()),
            "sample count does not match grid"
        );
        Self {
            grid: *grid,
            data,
            _kind: PhantomData,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        K::components(self.grid.dim())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn node(&self, index: usize) -> &[f64] {
        let c = self.components();
        &self.data[index * c..(index + 1) * c]
    }

    pub fn node_mut(&mut self, index: usize) -> &mut [f64] {
        let c = self.components();
        &mut self.data[index * c..(index + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Euclidean (Frobenius for tensors) magnitude at every node.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.components())
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_data(&self.grid, self.data.iter().map(|&x| f(x)).collect())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid);
        Self::from_data(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }

    /// Whole-node translation: `out(x) = self(x + m h)`.
    pub fn shift(&self, m: [i64; 3]) -> Self {
        let c = self.components();
        let mut out = Self::zeros(&self.grid);
        for idx in 0..self.grid.num_nodes() {
            let mi = self.grid.multi_index(idx);
            let src = self.grid.wrap_index([
                mi[0] as i64 + m[0],
                mi[1] as i64 + m[1],
                mi[2] as i64 + m[2],
            ]);
            out.data[idx * c..(idx + 1) * c].copy_from_slice(&self.data[src * c..(src + 1) * c]);
        }
        out
    }
}

impl ScalarField {
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Point) -> f64) -> Self {
        let data = (0..grid.num_nodes()).map(|i| f(grid.position(i))).collect();
        Self::from_data(grid, data)
    }

    pub fn value(&self, index: usize) -> f64 {
        self.data[index]
    }
}

impl VectorField {
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Point) -> Point) -> Self {
        let d = grid.dim();
        let mut data = Vec::with_capacity(grid.num_nodes() * d);
        for i in 0..grid.num_nodes() {
            let v = f(grid.position(i));
            data.extend_from_slice(&v[..d]);
        }
        Self::from_data(grid, data)
    }

    pub fn component(&self, k: usize) -> ScalarField {
        let d = self.grid.dim();
        ScalarField::from_data(&self.grid, self.data.iter().skip(k).step_by(d).copied().collect())
    }

    pub fn from_components(comps: &[ScalarField]) -> Self {
        let grid = *comps[0].grid();
        let d = grid.dim();
        assert_eq!(comps.len(), d);
        let mut data = vec![0.0; grid.num_nodes() * d];
        for (k, c) in comps.iter().enumerate() {
            for (i, &x) in c.data().iter().enumerate() {
                data[i * d + k] = x;
            }
        }
        Self::from_data(&grid, data)
    }

    pub fn at(&self, index: usize) -> Point {
        let mut p = [0.0; 3];
        p[..self.grid.dim()].copy_from_slice(self.node(index));
        p
    }

    /// Pointwise dot product with a constant vector.
    pub fn dot_const(&self, y: &Point) -> ScalarField {
        let d = self.grid.dim();
        ScalarField::from_data(
            &self.grid,
            self.data
                .chunks_exact(d)
                .map(|v| (0..d).map(|k| v[k] * y[k]).sum())
                .collect(),
        )
    }
}

impl TensorField {
    /// Column `k`: the vector field `(T_{0k}, ..., T_{d-1,k})`.
    pub fn column(&self, k: usize) -> VectorField {
        let d = self.grid.dim();
        let mut data = Vec::with_capacity(self.grid.num_nodes() * d);
        for t in self.data.chunks_exact(d * d) {
            for i in 0..d {
                data.push(t[i * d + k]);
            }
        }
        VectorField::from_data(&self.grid, data)
    }

    pub fn from_columns(cols: &[VectorField]) -> Self {
        let grid = *cols[0].grid();
        let d = grid.dim();
        assert_eq!(cols.len(), d);
        let mut data = vec![0.0; grid.num_nodes() * d * d];
        for (k, col) in cols.iter().enumerate() {
            for (node, v) in col.data().chunks_exact(d).enumerate() {
                for i in 0..d {
                    data[node * d * d + i * d + k] = v[i];
                }
            }
        }
        Self::from_data(&grid, data)
    }

    /// Contraction `sum_k T_{ik} y_k`.
    pub fn contract(&self, y: &Point) -> VectorField {
        let d = self.grid.dim();
        let mut data = Vec::with_capacity(self.grid.num_nodes() * d);
        for t in self.data.chunks_exact(d * d) {
            for i in 0..d {
                data.push((0..d).map(|k| t[i * d + k] * y[k]).sum());
            }
        }
        VectorField::from_data(&self.grid, data)
    }

    /// Trace at every node, summed in index order.
    pub fn trace(&self) -> ScalarField {
        let d = self.grid.dim();
        ScalarField::from_data(
            &self.grid,
            self.data
                .chunks_exact(d * d)
                .map(|t| {
                    let mut s = t[0];
                    for k in 1..d {
                        s += t[k * d + k];
                    }
                    s
                })
                .collect(),
        )
    }
}

impl<K: Kind> Add for &Field<K> {
    type Output = Field<K>;
    fn add(self, rhs: Self) -> Field<K> {
        self.axpy(1.0, rhs)
    }
}

impl<K: Kind> Sub for &Field<K> {
    type Output = Field<K>;
    fn sub(self, rhs: Self) -> Field<K> {
        assert_eq!(self.grid, rhs.grid);
        Field::from_data(
            &self.grid,
            self.data.iter().zip(&rhs.data).map(|(x, y)| x - y).collect(),
        )
    }
}

impl<K: Kind> Mul<f64> for &Field<K> {
    type Output = Field<K>;
    fn mul(self, rhs: f64) -> Field<K> {
        self.scale(rhs)
    }
}
