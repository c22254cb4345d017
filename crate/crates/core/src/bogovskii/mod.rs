//! Discrete right inverse of the divergence on the annulus `O = B_2 \ B_1`,
//! vanishing off the annulus, and its rescaled copies on `B_{2r} \ B_r`.
//!
//! The reference lattice is the ambient grid seen from the annulus center in
//! units of `r`: node `j` sits at `y_j = (j - frac) δ`, `δ = h / r`. Unknowns are
//! the `d` velocity components at nodes with `1 < |y| < 2`; every other node is
//! pinned to zero. Among all fields whose centered divergence equals the datum,
//! the solver returns the one of least Dirichlet energy, measured with the
//! compact `2d + 1`-point Laplacian. The compact energy couples the parity
//! classes that the centered divergence leaves independent, so the result has
//! no odd-even oscillation.
//!
//! The energy matrix is factored once per lattice; the multiplier is found by
//! conjugate gradients on the Schur complement `S = B A⁻¹ Bᵀ`, preconditioned
//! with `(BBᵀ)⁺ B A Bᵀ (BBᵀ)⁺`. Away from the boundary that operator inverts
//! `S` exactly, which keeps the iteration count flat as `δ` shrinks.

mod band;
mod lattice;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField, VectorField};
use band::BandCholesky;
pub use lattice::{lattice_params, Lattice};

/// Default constraint tolerance, relative to `max(1, ‖g‖∞)`.
pub const TAU_B: f64 = 1e-10;

const MAX_ITERATIONS: usize = 4000;

/// Solves aim for `REFINE · τ` and settle for `τ` when rounding stalls them.
const REFINE: f64 = 1e-2;

/// Iterations without halving the residual that count as a stall.
const STALL: usize = 5;

/// How a datum outside the range of the discrete divergence is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compatibility {
    /// Reject data whose incompatible part exceeds `1e-10 max(1, ‖g‖∞)`.
    Strict,
    /// Remove the incompatible part and report its size.
    Project,
}


pub struct AnnulusSolver {
    lattice: Lattice,
    unknown: Vec<bool>,
    /// Connected component of each constraint node, `NONE` off the constraint set.
    component: Vec<u32>,
    component_size: Vec<usize>,
    roots: Vec<usize>,
    /// Local indices of the unknown nodes, lexicographic.
    nodes: Vec<usize>,
    factor: BandCholesky,
    /// `4δ² BBᵀ` per parity class, one node per component pinned to zero.
    classes: Vec<ClassBlock>,
    tau: f64,
}

struct ClassBlock {
    nodes: Vec<usize>,
    factor: BandCholesky,
}

const NONE: u32 = u32::MAX;

/// Result of a solve on the reference lattice.
#[derive(Debug, Clone)]
pub struct Solution {
    /// `d` components per local node, exact zeros off the unknowns.
    pub v: Vec<f64>,
    pub iterations: usize,
    /// `‖Bv - g‖∞` against the compatible datum.
    pub residual_max: f64,
    /// Same residual in the `δ^d`-weighted `L²` norm.
    pub residual_l2: f64,
    /// Largest nodal change made to the datum to make it compatible.
    pub removed_max: f64,
    /// `δ^d`-weighted `L²` size of that change.
    pub removed_l2: f64,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

impl AnnulusSolver {
    /// Reference solver for lattice spacing `delta` and center offset `frac`
    /// (fractional node coordinates of the center, each in `[0, 1)`).
    ///
    /// Fails with a resolution error when some unknown has no unknown
    /// neighbour, which happens for `r/h` below about 1.3 at some offsets.
    pub fn new(dim: usize, delta: f64, frac: Point) -> Result<Self> {
        let lattice = Lattice::new(dim, delta, frac)?;
        let total = lattice.len();
        let mut solver = Self {
            lattice,
            unknown: vec![false; total],
            component: vec![NONE; total],
            component_size: Vec::new(),
            roots: Vec::new(),
            nodes: Vec::new(),
            factor: BandCholesky::empty(),
            classes: Vec::new(),
            tau: TAU_B,
        };
        for idx in 0..total {
            let y = solver.position(idx);
            let rho = crate::grid::norm(&y);
            solver.unknown[idx] = rho > 1.0 && rho < 2.0;
        }
        if !solver.unknown.iter().any(|&u| u) {
            return Err(Error::Resolution("no lattice node inside the annulus".into()));
        }
        // an unknown with no unknown neighbour has a divergence no correction can reach
        for idx in 0..total {
            if !solver.unknown[idx] {
                continue;
            }
            let strides: Vec<usize> = (0..dim).map(|k| solver.lattice.stride(k)).collect();
            if strides.iter().all(|&s| !solver.unknown[idx + s] && !solver.unknown[idx - s]) {
                return Err(Error::Resolution(format!(
                    "annulus node at {:?} is cut off from the other unknowns (h/r = {delta})",
                    &solver.position(idx)[..dim]
                )));
            }
        }
        solver.build_components();
        solver.build_energy()?;
        solver.build_classes()?;
        Ok(solver)
    }

    /// Solver for the annulus around `center` with inner radius `radius` on `grid`.
    pub fn for_ball(grid: &Grid, center: &Point, radius: f64) -> Result<Self> {
        let (delta, frac, _) = lattice_params(grid, center, radius)?;
        Self::new(grid.dim(), delta, frac)
    }

    pub fn with_tolerance(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn delta(&self) -> f64 {
        self.lattice.delta
    }

    pub fn frac(&self) -> Point {
        self.lattice.frac
    }

    pub fn tolerance(&self) -> f64 {
        self.tau
    }

    /// Number of lattice nodes per axis, `2K + 1`.
    pub fn side(&self) -> usize {
        self.lattice.side
    }

    pub fn num_local(&self) -> usize {
        self.unknown.len()
    }

    pub fn num_unknown_nodes(&self) -> usize {
        self.unknown.iter().filter(|&&u| u).count()
    }

    pub fn is_unknown(&self, local: usize) -> bool {
        self.unknown[local]
    }

    /// Whether the divergence constraint is imposed at this node.
    pub fn is_constrained(&self, local: usize) -> bool {
        self.component[local] != NONE
    }

    pub fn num_components(&self) -> usize {
        self.component_size.len()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn offset(&self, local: usize) -> [i64; 3] {
        self.lattice.offset(local)
    }

    fn local_index(&self, j: [i64; 3]) -> Option<usize> {
        self.lattice.local_index(j)
    }

    fn stride(&self, axis: usize) -> usize {
        self.lattice.stride(axis)
    }

    /// Reference coordinate `y_j = (j - frac) δ`.
    pub fn position(&self, local: usize) -> Point {
        self.lattice.position(local)
    }

    /// Components are the connected pieces of the graph on constraint nodes
    /// whose edges are the unknowns `(y, k)` joining `y - e_k` and `y + e_k`.
    fn build_components(&mut self) {
        let total = self.num_local();
        let mut parent: Vec<usize> = (0..total).collect();
        let mut touched = vec![false; total];
        for idx in 0..total {
            if !self.unknown[idx] {
                continue;
            }
            for k in 0..self.lattice.dim {
                let s = self.stride(k);
                let (a, b) = (idx - s, idx + s);
                touched[a] = true;
                touched[b] = true;
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut ids = HashMap::new();
        for idx in 0..total {
            if touched[idx] {
                let root = find(&mut parent, idx);
                let next = ids.len() as u32;
                let id = *ids.entry(root).or_insert(next);
                self.component[idx] = id;
                if id as usize == self.component_size.len() {
                    self.component_size.push(0);
                    self.roots.push(root);
                }
                self.component_size[id as usize] += 1;
            }
        }
    }

    fn build_energy(&mut self) -> Result<()> {
        let d = self.lattice.dim;
        let nodes: Vec<usize> = (0..self.num_local()).filter(|&idx| self.unknown[idx]).collect();
        let mut pos = HashMap::with_capacity(nodes.len());
        for (i, &idx) in nodes.iter().enumerate() {
            pos.insert(idx, i);
        }
        // δ² A = 2d I - (sum of ±e_k neighbors)
        let mut entries = Vec::with_capacity(nodes.len() * (d + 1));
        for (i, &idx) in nodes.iter().enumerate() {
            entries.push((i, i, 2.0 * d as f64));
            for k in 0..d {
                if let Some(&jn) = pos.get(&(idx - self.stride(k))) {
                    entries.push((i, jn, -1.0));
                }
            }
        }
        self.factor = BandCholesky::factor(nodes.len(), &entries)
            .ok_or_else(|| Error::Argument("annulus energy matrix is not definite".into()))?;
        self.nodes = nodes;
        Ok(())
    }

    /// Component roots are the smallest local index of each component.
    fn is_root(&self, idx: usize) -> bool {
        let c = self.component[idx];
        c != NONE && self.component_root(c) == idx
    }

    fn component_root(&self, c: u32) -> usize {
        self.roots[c as usize]
    }

    /// Factors `4δ² BBᵀ`, the graph Laplacian on the constraint nodes with an
    /// edge `c ~ c + 2e_k` whenever `c + e_k` is an unknown. Edges never leave
    /// a parity class, so each class is factored on its own.
    fn build_classes(&mut self) -> Result<()> {
        let d = self.lattice.dim;
        let total = self.num_local();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); 1 << d];
        let mut slot = vec![u32::MAX; total];
        for idx in 0..total {
            if self.component[idx] == NONE || self.is_root(idx) {
                continue;
            }
            let j = self.offset(idx);
            let class = (0..d).fold(0, |acc, k| acc | ((j[k].rem_euclid(2) as usize) << k));
            slot[idx] = members[class].len() as u32;
            members[class].push(idx);
        }
        let mut classes = Vec::with_capacity(members.len());
        for nodes in members {
            let mut entries = Vec::with_capacity(nodes.len() * (d + 1));
            for (i, &idx) in nodes.iter().enumerate() {
                let mut diag = 0.0;
                for k in 0..d {
                    let s = self.stride(k);
                    if self.unknown[idx + s] {
                        diag += 1.0;
                    }
                    if self.unknown[idx - s] {
                        diag += 1.0;
                        let nb = slot[idx - 2 * s];
                        if nb != u32::MAX {
                            entries.push((i, nb as usize, -1.0));
                        }
                    }
                }
                entries.push((i, i, diag));
            }
            let factor = BandCholesky::factor(nodes.len(), &entries)
                .ok_or_else(|| Error::Argument("multiplier Laplacian is not definite".into()))?;
            classes.push(ClassBlock { nodes, factor });
        }
        self.classes = classes;
        Ok(())
    }

    /// Solves `4δ² BBᵀ x = r` with the component roots held at zero.
    fn multiplier_solve(&self, r: &[f64]) -> Vec<f64> {
        let parts: Vec<Vec<f64>> = self
            .classes
            .par_iter()
            .map(|c| {
                let mut x: Vec<f64> = c.nodes.iter().map(|&idx| r[idx]).collect();
                c.factor.solve_in_place(&mut x);
                x
            })
            .collect();
        let mut out = vec![0.0; r.len()];
        for (c, x) in self.classes.iter().zip(parts) {
            for (&idx, xi) in c.nodes.iter().zip(x) {
                out[idx] = xi;
            }
        }
        out
    }

    /// `δ² A v` for the compact energy.
    fn energy_apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.lattice.dim;
        let mut out = vec![0.0; v.len()];
        for &idx in &self.nodes {
            for k in 0..d {
                let mut acc = 2.0 * d as f64 * v[idx * d + k];
                for a in 0..d {
                    let s = self.stride(a);
                    acc -= v[(idx + s) * d + k] + v[(idx - s) * d + k];
                }
                out[idx * d + k] = acc;
            }
        }
        out
    }

    /// `z = (BBᵀ)⁺ B A Bᵀ (BBᵀ)⁺ r`, up to a constant factor, with the
    /// per-component means removed, and `rᵀz` evaluated as `uᵀAu`,
    /// `u = Bᵀ(BBᵀ)⁺r`, so it cannot come out negative.
    fn precondition(&self, r: &[f64]) -> (Vec<f64>, f64) {
        let u = self.divergence_adjoint(&self.multiplier_solve(r));
        let au = self.energy_apply(&u);
        let rz = u.iter().zip(&au).map(|(a, b)| a * b).sum();
        let mut z = self.multiplier_solve(&self.divergence(&au));
        let mut sums = vec![0.0; self.num_components()];
        for (idx, &x) in z.iter().enumerate() {
            let c = self.component[idx];
            if c != NONE {
                sums[c as usize] += x;
            }
        }
        for (idx, x) in z.iter_mut().enumerate() {
            let c = self.component[idx];
            if c != NONE {
                *x -= sums[c as usize] / self.component_size[c as usize] as f64;
            }
        }
        (z, rz)
    }

    /// Centered divergence of a local vector field (`d` entries per node).
    pub fn divergence(&self, v: &[f64]) -> Vec<f64> {
        let d = self.lattice.dim;
        let inv = 0.5 / self.lattice.delta;
        let mut out = vec![0.0; self.num_local()];
        for idx in 0..self.num_local() {
            if self.component[idx] == NONE {
                continue;
            }
            let mut acc = 0.0;
            for k in 0..d {
                let s = self.stride(k);
                acc += (v[(idx + s) * d + k] - v[(idx - s) * d + k]) * inv;
            }
            out[idx] = acc;
        }
        out
    }

    /// `Bᵀλ` on the unknowns.
    fn divergence_adjoint(&self, lambda: &[f64]) -> Vec<f64> {
        let d = self.lattice.dim;
        let inv = 0.5 / self.lattice.delta;
        let mut out = vec![0.0; self.num_local() * d];
        for idx in 0..self.num_local() {
            if !self.unknown[idx] {
                continue;
            }
            for k in 0..d {
                let s = self.stride(k);
                out[idx * d + k] = (lambda[idx - s] - lambda[idx + s]) * inv;
            }
        }
        out
    }

    /// Applies the inverse energy matrix to `f` (`d` entries per node).
    fn energy_inverse(&self, f: &[f64]) -> Vec<f64> {
        let d = self.lattice.dim;
        let scale = self.lattice.delta * self.lattice.delta;
        let parts: Vec<Vec<f64>> = (0..d)
            .into_par_iter()
            .map(|k| {
                let mut x: Vec<f64> = self.nodes.iter().map(|&idx| f[idx * d + k]).collect();
                self.factor.solve_in_place(&mut x);
                x
            })
            .collect();
        let mut out = vec![0.0; f.len()];
        for (k, x) in parts.into_iter().enumerate() {
            for (&idx, xi) in self.nodes.iter().zip(x) {
                out[idx * d + k] = scale * xi;
            }
        }
        out
    }

    /// Splits `g` into its compatible part and the removed remainder. Returns
    /// the compatible datum and the largest change made.
    pub fn make_compatible(&self, g: &[f64]) -> (Vec<f64>, f64) {
        let mut sums = vec![0.0; self.num_components()];
        for (idx, &x) in g.iter().enumerate() {
            let c = self.component[idx];
            if c != NONE {
                sums[c as usize] += x;
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&self.component_size)
            .map(|(s, &n)| s / n as f64)
            .collect();
        let mut out = vec![0.0; g.len()];
        let mut removed: f64 = 0.0;
        for (idx, &x) in g.iter().enumerate() {
            let c = self.component[idx];
            if c == NONE {
                removed = removed.max(x.abs());
            } else {
                out[idx] = x - means[c as usize];
                removed = removed.max(means[c as usize].abs());
            }
        }
        (out, removed)
    }

    fn weighted_l2(&self, x: &[f64]) -> f64 {
        let w = self.lattice.delta.powi(self.lattice.dim as i32);
        (x.iter().map(|a| a * a).sum::<f64>() * w).sqrt()
    }

    /// Minimum-energy `v` with centered divergence `g` on the constraint set
    /// and `v = 0` off the unknowns. `g` has one entry per local node.
    pub fn solve(&self, g: &[f64], mode: Compatibility) -> Result<Solution> {
        assert_eq!(g.len(), self.num_local(), "datum size does not match lattice");
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (datum, removed_max) = self.make_compatible(g);
        let removed: Vec<f64> = g.iter().zip(&datum).map(|(a, b)| a - b).collect();
        let removed_l2 = self.weighted_l2(&removed);
        if mode == Compatibility::Strict {
            let tolerance = 1e-10 * gmax.max(1.0);
            if removed_max > tolerance {
                return Err(Error::Compatibility {
                    defect: removed_max,
                    tolerance,
                });
            }
        }
        let d = self.lattice.dim;
        let tol = self.tau * gmax.max(1.0);
        let goal = REFINE * tol;
        let mut v = vec![0.0; self.num_local() * d];
        let mut res = datum.clone();
        let mut iterations = 0;
        let within = |r: &[f64], t: f64| r.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= t && self.weighted_l2(r) <= t;
        let mut previous = f64::INFINITY;
        // restarts guard against drift of the recursively updated residual
        for _restart in 0..4 {
            if within(&res, goal) {
                break;
            }
            let (z, mut rz) = self.precondition(&res);
            let mut p = z;
            let (mut best, mut stalled) = (f64::INFINITY, 0);
            while iterations < MAX_ITERATIONS {
                iterations += 1;
                let q = self.energy_inverse(&self.divergence_adjoint(&p));
                let sp = self.divergence(&q);
                let psp: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
                if !(psp > 0.0) || !(rz > 0.0) {
                    break;
                }
                let alpha = rz / psp;
                for (vi, qi) in v.iter_mut().zip(&q) {
                    *vi += alpha * qi;
                }
                for (ri, si) in res.iter_mut().zip(&sp) {
                    *ri -= alpha * si;
                }
                if within(&res, goal) {
                    break;
                }
                let m = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if m < 0.5 * best {
                    (best, stalled) = (m, 0);
                } else {
                    stalled += 1;
                }
                if stalled >= STALL && within(&res, tol) {
                    break;
                }
                // Polak-Ribière form `z_newᵀ(r_new - r_old) / rᵀz`, which tolerates
                // rounding in the preconditioner
                let (z, rz_new) = self.precondition(&res);
                let zs: f64 = sp.iter().zip(&z).map(|(a, b)| a * b).sum();
                let beta = -alpha * zs / rz;
                rz = rz_new;
                for (pi, zi) in p.iter_mut().zip(&z) {
                    *pi = zi + beta * *pi;
                }
            }
            let bv = self.divergence(&v);
            res = datum.iter().zip(&bv).map(|(a, b)| a - b).collect();
            let true_max = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            // at the rounding floor: accept once the requirement holds
            if iterations >= MAX_ITERATIONS || (within(&res, tol) && true_max > 0.5 * previous) {
                break;
            }
            previous = true_max;
        }
        let residual_max = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let residual_l2 = self.weighted_l2(&res);
        if !within(&res, tol) {
            return Err(Error::Convergence {
                iterations,
                residual: residual_max,
            });
        }
        Ok(Solution {
            v,
            iterations,
            residual_max,
            residual_l2,
            removed_max,
            removed_l2,
        })
    }

    /// Ambient flat index of every local node for an annulus around `center`.
    pub fn ambient_indices(&self, grid: &Grid, center: &Point) -> Vec<usize> {
        let h = grid.spacing();
        let c = grid.wrap_point(*center);
        let mut base = [0i64; 3];
        for k in 0..self.lattice.dim {
            base[k] = (c[k] / h).floor() as i64;
        }
        self.lattice.ambient_indices(grid, base)
    }

    /// The lattice node at integer offset `j`, if inside the local box.
    pub fn local_at(&self, j: [i64; 3]) -> Option<usize> {
        self.local_index(j)
    }
}

/// Solvers shared between calls, keyed by dimension, spacing and center offset.
#[derive(Default)]
pub struct SolverCache {
    map: Mutex<HashMap<(usize, u64, [u64; 3]), Arc<AnnulusSolver>>>,
}

impl SolverCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, grid: &Grid, center: &Point, radius: f64) -> Result<Arc<AnnulusSolver>> {
        let (delta, frac, _) = lattice_params(grid, center, radius)?;
        let key = (
            grid.dim(),
            delta.to_bits(),
            [frac[0].to_bits(), frac[1].to_bits(), frac[2].to_bits()],
        );
        if let Some(s) = self.map.lock().unwrap().get(&key) {
            return Ok(Arc::clone(s));
        }
        let solver = Arc::new(AnnulusSolver::new(grid.dim(), delta, frac)?);
        self.map
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&solver));
        Ok(solver)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strict solve on the reference annulus.
pub fn solve_reference(g: &[f64], solver: &AnnulusSolver) -> Result<Solution> {
    solver.solve(g, Compatibility::Strict)
}

/// A rescaled solve on the ambient grid.
#[derive(Debug, Clone)]
pub struct ScaledSolution {
    pub field: VectorField,
    pub iterations: usize,
    pub residual_max: f64,
    pub removed_max: f64,
}

fn check_solver(grid: &Grid, center: &Point, radius: f64, solver: &AnnulusSolver) -> Result<Vec<usize>> {
    let (delta, frac, _) = lattice_params(grid, center, radius)?;
    if grid.dim() != solver.lattice.dim || delta.to_bits() != solver.lattice.delta.to_bits() || frac != solver.lattice.frac {
        return Err(Error::Argument(
            "solver was built for a different annulus lattice".into(),
        ));
    }
    Ok(solver.ambient_indices(grid, center))
}

/// `x ↦ r 𝓑_O[g̃]((x - c)/r)` with `g̃(y) = g(c + r y)`, in the given mode.
/// With `Strict`, data outside the local box also count as incompatible.
pub fn solve_scaled_with(
    g: &ScalarField,
    center: &Point,
    radius: f64,
    solver: &AnnulusSolver,
    mode: Compatibility,
) -> Result<ScaledSolution> {
    let grid = *g.grid();
    let ambient = check_solver(&grid, center, radius, solver)?;
    let local: Vec<f64> = ambient.iter().map(|&i| g.value(i)).collect();
    let mut outside: f64 = 0.0;
    if mode == Compatibility::Strict {
        let mut in_box = vec![false; grid.num_nodes()];
        for &i in &ambient {
            in_box[i] = true;
        }
        for (i, &x) in g.data().iter().enumerate() {
            if !in_box[i] {
                outside = outside.max(x.abs());
            }
        }
        let tolerance = 1e-10 * g.max_abs().max(1.0);
        if outside > tolerance {
            return Err(Error::Compatibility {
                defect: outside,
                tolerance,
            });
        }
    }
    let sol = solver.solve(&local, mode)?;
    let d = grid.dim();
    let mut field = VectorField::zeros(&grid);
    for (idx, &amb) in ambient.iter().enumerate() {
        if solver.is_unknown(idx) {
            let dst = field.node_mut(amb);
            for k in 0..d {
                dst[k] = radius * sol.v[idx * d + k];
            }
        }
    }
    Ok(ScaledSolution {
        field,
        iterations: sol.iterations,
        residual_max: sol.residual_max,
        removed_max: sol.removed_max.max(outside),
    })
}

/// Strict rescaled solve.
pub fn solve_scaled(g: &ScalarField, center: &Point, radius: f64, solver: &AnnulusSolver) -> Result<VectorField> {
    Ok(solve_scaled_with(g, center, radius, solver, Compatibility::Strict)?.field)
}

/// Output of [`negative_norm_apply`].
#[derive(Debug, Clone)]
pub struct NegativeNormSplit {
    pub total: VectorField,
    /// Solution for `Σ_k avg_k(ψ) D_k w_k`.
    pub divergence_part: VectorField,
    /// Solution for `Σ_k avg_k(w_k) D_k ψ`.
    pub gradient_part: VectorField,
    pub divergence_part_l2: f64,
    pub gradient_part_l2: f64,
    pub removed_max: f64,
}

/// `𝓑_{2r,r}[div f]` for `f = ψ_r w`, computed from the exact discrete product
/// rule `D_k(ψ w_k) = avg_k(ψ) D_k w_k + avg_k(w_k) D_k ψ`, one solve per term.
pub fn negative_norm_apply(
    f: &VectorField,
    cutoff: &crate::cutoff::AnnulusCutoff,
    solver: &AnnulusSolver,
) -> Result<NegativeNormSplit> {
    let grid = *f.grid();
    let d = grid.dim();
    let psi = cutoff.samples();
    let scale = f.max_abs();
    for i in 0..grid.num_nodes() {
        if psi.value(i) == 0.0 && f.node(i).iter().any(|x| x.abs() > 1e-14 * scale) {
            return Err(Error::Precondition(format!(
                "field does not vanish where the cutoff does (node {i})"
            )));
        }
    }
    let mut w = VectorField::zeros(&grid);
    for i in 0..grid.num_nodes() {
        let p = psi.value(i);
        if p > 0.0 {
            for k in 0..d {
                w.node_mut(i)[k] = f.node(i)[k] / p;
            }
        }
    }
    let n = grid.n();
    let inv2h = 0.5 / grid.spacing();
    let mut t1 = vec![0.0; grid.num_nodes()];
    let mut t2 = vec![0.0; grid.num_nodes()];
    for idx in 0..grid.num_nodes() {
        for k in 0..d {
            let stride = grid.stride(k);
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            let (p, m) = (base + ((i + 1) % n) * stride, base + ((i + n - 1) % n) * stride);
            let (wp, wm) = (w.node(p)[k], w.node(m)[k]);
            let (sp, sm) = (psi.value(p), psi.value(m));
            t1[idx] += 0.5 * (sp + sm) * (wp - wm) * inv2h;
            t2[idx] += 0.5 * (wp + wm) * (sp - sm) * inv2h;
        }
    }
    let center = cutoff.center();
    let r = cutoff.radius();
    let a = solve_scaled_with(&ScalarField::from_data(&grid, t1), &center, r, solver, Compatibility::Project)?;
    let b = solve_scaled_with(&ScalarField::from_data(&grid, t2), &center, r, solver, Compatibility::Project)?;
    let l2 = |v: &VectorField| crate::grid::lp_norm(v, 2.0).expect("p = 2 is valid");
    Ok(NegativeNormSplit {
        total: &a.field + &b.field,
        divergence_part_l2: l2(&a.field),
        gradient_part_l2: l2(&b.field),
        removed_max: a.removed_max.max(b.removed_max),
        divergence_part: a.field,
        gradient_part: b.field,
    })
}

#[cfg(test)]
mod tests;
