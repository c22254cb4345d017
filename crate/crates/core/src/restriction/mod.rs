//! Restriction operators: the average-extension `E_r`, its solenoidal
//! correction `R_r = E_r - 𝓑_{2r,r}[div E_r]`, the composition over `N` bodies
//! and its derivatives with respect to the body centers and time.
//!
//! Balls are centered at `h`; everything about a ball (node membership, the
//! distance ratio `s = |x - h| / r`, the annulus solve) is evaluated on the
//! reference lattice of [`Lattice`], so translating the input and the center by
//! whole grid nodes translates the output exactly.

mod path;

pub use path::BodyPath;

use rayon::prelude::*;

use crate::bogovskii::{AnnulusSolver, Compatibility, Lattice, SolverCache};
use crate::cutoff::{make_profile, CutoffProfile};
use crate::error::{Error, Result};
use crate::grid::{divergence, partial, Ball, Grid, Point, TensorField, VectorField};

/// Factor between consecutive radii of the composition.
pub const RADIUS_RATIO: f64 = 5.0;

/// Input divergence tolerance relative to `‖φ‖∞ / h`.
pub const TAU_IN: f64 = 1e-6;

/// Centers and base radius of an `N`-body composition.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionConfig {
    pub centers: Vec<Point>,
    pub epsilon: f64,
    /// Factor between consecutive radii, `5` unless overridden.
    pub ratio: f64,
}

impl RestrictionConfig {
    pub fn new(centers: Vec<Point>, epsilon: f64) -> Self {
        Self {
            centers,
            epsilon,
            ratio: RADIUS_RATIO,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `r_i = ratio^i ε` for the 0-based body index `i`.
    pub fn radius(&self, i: usize) -> f64 {
        self.epsilon * self.ratio.powi(i as i32)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Config("at least one body is required".into()));
        }
        if !(self.epsilon > 0.0 && self.ratio >= 1.0) {
            return Err(Error::Config(format!(
                "need ε > 0 and ratio >= 1, got ε = {}, ratio = {}",
                self.epsilon, self.ratio
            )));
        }
        let largest = self.radius(self.len() - 1);
        if largest > grid.len() / 8.0 {
            return Err(Error::Config(format!(
                "largest radius {largest} exceeds L/8 = {}",
                grid.len() / 8.0
            )));
        }
        if self.epsilon < grid.spacing() {
            return Err(Error::Resolution(format!(
                "base radius {} below the grid spacing {}",
                self.epsilon,
                grid.spacing()
            )));
        }
        Ok(())
    }
}

/// Diagnostics of one restriction.
#[derive(Debug, Clone)]
pub struct RestrictReport {
    pub field: VectorField,
    /// Mean of the input over the ball.
    pub average: Point,
    pub ball_nodes: usize,
    pub iterations: usize,
    /// `‖D w - g‖∞` of the annulus solve, `w` the correction.
    pub residual_max: f64,
    /// Incompatible part removed from the annulus datum.
    pub removed_max: f64,
}

struct Patch {
    lattice: Lattice,
    ambient: Vec<usize>,
}

impl Patch {
    fn new(grid: &Grid, center: &Point, radius: f64) -> Result<Self> {
        let (lattice, base) = Lattice::for_ball(grid, center, radius)?;
        let ambient = lattice.ambient_indices(grid, base);
        Ok(Self { lattice, ambient })
    }

    /// Mean over the lattice nodes with `|y| < 1`, shifted by the first sample.
    fn average(&self, phi: &VectorField, radius: f64) -> Result<(Point, usize)> {
        let d = phi.grid().dim();
        let mut base: Option<Point> = None;
        let mut sum = [0.0; 3];
        let mut count = 0;
        for (idx, &amb) in self.ambient.iter().enumerate() {
            if self.lattice.scaled_distance(idx) < 1.0 {
                let v = phi.at(amb);
                let b = *base.get_or_insert(v);
                for k in 0..d {
                    sum[k] += v[k] - b[k];
                }
                count += 1;
            }
        }
        let b = base.ok_or(Error::DegenerateBall { radius })?;
        let mut avg = [0.0; 3];
        for k in 0..d {
            avg[k] = b[k] + sum[k] / count as f64;
        }
        Ok((avg, count))
    }

    /// `E_r[φ]` on the patch; `φ` elsewhere.
    fn extend(&self, phi: &VectorField, avg: &Point, profile: &CutoffProfile) -> VectorField {
        let d = phi.grid().dim();
        let mut out = phi.clone();
        for (idx, &amb) in self.ambient.iter().enumerate() {
            let (a, b) = profile.eval_partition(self.lattice.scaled_distance(idx));
            let node = out.node_mut(amb);
            for k in 0..d {
                node[k] = avg[k] * a + node[k] * b;
            }
        }
        out
    }
}

/// `E_r[φ]` for the ball `b`: the ball average inside, `φ` outside `B_{2r}`,
/// blended by the profile in between.
pub fn average_extend(phi: &VectorField, ball: &Ball, profile: &CutoffProfile) -> Result<VectorField> {
    let patch = Patch::new(phi.grid(), &ball.center(), ball.radius())?;
    let (avg, _) = patch.average(phi, ball.radius())?;
    Ok(patch.extend(phi, &avg, profile))
}

/// Within one parity class the centered divergence telescopes, so the class
/// sum of `D(E - φ)` over the constraint nodes equals the class sum of `Dφ`
/// over the nodes with `|y| ≤ 1`. A mean above that allowance is rejected.
/// Finer component splits are not checked: on coarse lattices they are an
/// artifact of the node geometry and are projected out instead.
fn check_class_mass(solver: &AnnulusSolver, g: &[f64], div_in: f64) -> Result<()> {
    let d = solver.dim();
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let classes = 1 << d;
    let mut sum = vec![0.0; classes];
    let mut count = vec![0usize; classes];
    let mut inner = vec![0usize; classes];
    for (idx, &x) in g.iter().enumerate() {
        let j = solver.offset(idx);
        let c = (0..d).fold(0, |acc, k| acc | ((j[k].rem_euclid(2) as usize) << k));
        if solver.is_constrained(idx) {
            sum[c] += x;
            count[c] += 1;
        } else if crate::grid::norm(&solver.position(idx)) <= 1.0 {
            inner[c] += 1;
        }
    }
    for c in 0..classes {
        if count[c] == 0 {
            continue;
        }
        let defect = sum[c].abs() / count[c] as f64;
        let tolerance = 1e-10 * gmax.max(1.0) + div_in * inner[c] as f64 / count[c] as f64;
        if defect > tolerance {
            return Err(Error::Compatibility { defect, tolerance });
        }
    }
    Ok(())
}

/// Builds restrictions on one grid and keeps the annulus solvers it needs.
pub struct Restrictor {
    grid: Grid,
    profile: CutoffProfile,
    cache: SolverCache,
}

impl Restrictor {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            profile: make_profile(),
            cache: SolverCache::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    pub fn solver(&self, center: &Point, radius: f64) -> Result<std::sync::Arc<AnnulusSolver>> {
        self.cache.get(&self.grid, center, radius)
    }

    /// Number of distinct annulus solvers built so far.
    pub fn cached_solvers(&self) -> usize {
        self.cache.len()
    }

    /// `max |Dφ|`, rejected above `τ_in ‖φ‖∞ / h`.
    pub fn check_input(&self, phi: &VectorField) -> Result<f64> {
        self.grid.check_same(phi.grid())?;
        let div = divergence(phi).max_abs();
        let bound = TAU_IN * phi.max_abs() / self.grid.spacing();
        if div > bound {
            return Err(Error::Precondition(format!(
                "input divergence {div:e} exceeds τ_in bound {bound:e}"
            )));
        }
        Ok(div)
    }

    /// `R_r(h)[φ]` for the ball `b`.
    pub fn restrict(&self, phi: &VectorField, ball: &Ball) -> Result<VectorField> {
        Ok(self.restrict_report(phi, &ball.center(), ball.radius())?.field)
    }

    pub fn restrict_report(&self, phi: &VectorField, center: &Point, radius: f64) -> Result<RestrictReport> {
        let div_in = self.check_input(phi)?;
        let center = self.grid.wrap_point(*center);
        let patch = Patch::new(&self.grid, &center, radius)?;
        let (average, ball_nodes) = patch.average(phi, radius)?;
        let mut field = patch.extend(phi, &average, &self.profile);
        let solver = self.solver(&center, radius)?;
        let d = self.grid.dim();
        let lat = solver.lattice();

        // datum D(E - φ) on the constraint nodes, in lattice order
        let diff: Vec<f64> = patch
            .ambient
            .iter()
            .flat_map(|&amb| {
                let (e, p) = (field.node(amb), phi.node(amb));
                (0..d).map(move |k| e[k] - p[k])
            })
            .collect();
        let inv2h = 0.5 / self.grid.spacing();
        let mut g = vec![0.0; lat.len()];
        for (idx, gi) in g.iter_mut().enumerate() {
            if !solver.is_constrained(idx) {
                continue;
            }
            let mut acc = 0.0;
            for k in 0..d {
                let s = lat.stride(k);
                acc += (diff[(idx + s) * d + k] - diff[(idx - s) * d + k]) * inv2h;
            }
            *gi = acc;
        }
        check_class_mass(&solver, &g, div_in)?;
        let sol = solver.solve(&g, Compatibility::Project)?;
        for (idx, &amb) in patch.ambient.iter().enumerate() {
            if solver.is_unknown(idx) {
                let node = field.node_mut(amb);
                for k in 0..d {
                    node[k] -= radius * sol.v[idx * d + k];
                }
            }
        }
        Ok(RestrictReport {
            field,
            average,
            ball_nodes,
            iterations: sol.iterations,
            residual_max: sol.residual_max,
            removed_max: sol.removed_max,
        })
    }

    /// Applies bodies `lo..hi` of the composition, the highest index first.
    pub fn compose(&self, phi: &VectorField, config: &RestrictionConfig, lo: usize, hi: usize) -> Result<VectorField> {
        let mut out = phi.clone();
        for i in (lo..hi).rev() {
            out = self.restrict_report(&out, &config.centers[i], config.radius(i))?.field;
        }
        Ok(out)
    }

    /// `R_ε(h_1) ∘ R_{5ε}(h_2) ∘ ... ∘ R_{5^{N-1}ε}(h_N) [φ]`.
    pub fn restrict_multi(&self, phi: &VectorField, config: &RestrictionConfig) -> Result<VectorField> {
        config.validate(&self.grid)?;
        self.compose(phi, config, 0, config.len())
    }

    /// `∇_{h_i}` of the composition: column `k` is the derivative in the
    /// direction `e_k` of body `i` (0-based).
    ///
    /// With `T_i = compose(i..N)[φ]`, shifting the center of body `i` gives
    /// `∂_{h_i,k} R = compose(0..i+1)[∂_k T_{i+1}] - compose(0..i)[∂_k T_i]`.
    pub fn center_gradient(&self, phi: &VectorField, config: &RestrictionConfig, i: usize) -> Result<TensorField> {
        config.validate(&self.grid)?;
        if i >= config.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: config.len(),
            });
        }
        let inner = self.compose(phi, config, i + 1, config.len())?;
        let current = self.restrict_report(&inner, &config.centers[i], config.radius(i))?.field;
        let cols: Vec<VectorField> = (0..self.grid.dim())
            .into_par_iter()
            .map(|k| {
                let a = self.compose(&partial(&inner, k), config, 0, i + 1)?;
                let b = self.compose(&partial(&current, k), config, 0, i)?;
                Ok(&a - &b)
            })
            .collect::<Result<_>>()?;
        Ok(TensorField::from_columns(&cols))
    }

    /// `∂_t R_ε(h(t))[φ(t)] = R_ε[∂_t φ] + Σ_i ∇_{h_i} R_ε[φ] · Y_i` at time `t`.
    pub fn path_time_derivative(
        &self,
        phi: &VectorField,
        dphi_dt: &VectorField,
        path: &BodyPath,
        epsilon: f64,
        t: f64,
    ) -> Result<VectorField> {
        self.path_time_derivative_with_ratio(phi, dphi_dt, path, epsilon, RADIUS_RATIO, t)
    }

    pub fn path_time_derivative_with_ratio(
        &self,
        phi: &VectorField,
        dphi_dt: &VectorField,
        path: &BodyPath,
        epsilon: f64,
        ratio: f64,
        t: f64,
    ) -> Result<VectorField> {
        let config = RestrictionConfig::new(path.centers_at(t)?, epsilon).with_ratio(ratio);
        let velocities = path.velocities_at(t)?;
        let mut out = self.restrict_multi(dphi_dt, &config)?;
        for (i, y) in velocities.iter().enumerate() {
            if y.iter().all(|&c| c == 0.0) {
                continue;
            }
            let grad = self.center_gradient(phi, &config, i)?;
            out = &out + &grad.contract(y);
        }
        Ok(out)
    }
}
