use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, LocalNode, Point, ScalarField, VectorField};

/// Width of the density ramp at a disc boundary, in grid cells.
pub const SMOOTHING_CELLS: f64 = 1.0;

/// Discs must span at least this many nodes across.
pub const MIN_NODES_ACROSS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBody {
    pub center: Point,
    pub radius: f64,
    pub density: f64,
    pub velocity: Point,
    /// Angular rate.
    pub spin: f64,
    /// Integrated rotation angle, for reporting only.
    pub angle: f64,
}

impl RigidBody {
    pub fn new(center: Point, radius: f64, density: f64) -> Self {
        Self {
            center,
            radius,
            density,
            velocity: [0.0; 3],
            spin: 0.0,
            angle: 0.0,
        }
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Nodes strictly inside the disc.
    pub fn disc_nodes(&self, grid: &Grid) -> Vec<LocalNode> {
        grid.local_box(&self.center, self.radius)
            .into_iter()
            .filter(|n| n.dist() < self.radius)
            .collect()
    }

    pub fn overlaps(&self, other: &RigidBody, grid: &Grid) -> bool {
        grid.wrapped_distance(&self.center, &other.center) < self.radius + other.radius
    }
}

/// Least-squares rigid fit `Y + q (x - c)^⊥` of a field over the disc nodes,
/// `c` the centroid of those nodes relative to the body center.
#[derive(Debug, Clone)]
pub struct RigidFit {
    pub velocity: Point,
    pub spin: f64,
    pub centroid: Point,
    pub nodes: Vec<LocalNode>,
}

impl RigidFit {
    /// Rigid velocity at a disc node.
    pub fn at(&self, node: &LocalNode) -> Point {
        let rx = node.offset[0] - self.centroid[0];
        let ry = node.offset[1] - self.centroid[1];
        [self.velocity[0] - self.spin * ry, self.velocity[1] + self.spin * rx, 0.0]
    }

    /// Disc area as counted by the nodes.
    pub fn area(&self, grid: &Grid) -> f64 {
        self.nodes.len() as f64 * grid.cell_volume()
    }
}

/// Fits the rigid part of `u` on the body disc. The translational part is the
/// node mean; the rotation is taken about the node centroid, where the two
/// fits decouple exactly.
pub fn rigid_fit(u: &VectorField, body: &RigidBody) -> Result<RigidFit> {
    let grid = u.grid();
    if 2.0 * body.radius / grid.spacing() < MIN_NODES_ACROSS {
        return Err(Error::Resolution(format!(
            "disc of radius {} spans fewer than {MIN_NODES_ACROSS} nodes at h = {}",
            body.radius,
            grid.spacing()
        )));
    }
    let nodes = body.disc_nodes(grid);
    let count = nodes.len() as f64;
    let mut mean = [0.0; 3];
    let mut centroid = [0.0; 3];
    for n in &nodes {
        let v = u.at(n.index);
        for k in 0..2 {
            mean[k] += v[k];
            centroid[k] += n.offset[k];
        }
    }
    for k in 0..2 {
        mean[k] /= count;
        centroid[k] /= count;
    }
    let mut torque = 0.0;
    let mut inertia = 0.0;
    for n in &nodes {
        let v = u.at(n.index);
        let rx = n.offset[0] - centroid[0];
        let ry = n.offset[1] - centroid[1];
        torque += rx * (v[1] - mean[1]) - ry * (v[0] - mean[0]);
        inertia += rx * rx + ry * ry;
    }
    Ok(RigidFit {
        velocity: mean,
        spin: torque / inertia,
        centroid,
        nodes,
    })
}

/// `(Y, q)`: mean velocity and angular rate of `u` on the disc.
pub fn rigid_project(u: &VectorField, body: &RigidBody) -> Result<(Point, f64)> {
    let fit = rigid_fit(u, body)?;
    Ok((fit.velocity, fit.spin))
}

/// `∫_disc |u|² - |disc| |Y|²` and `∫_disc |u - Y|²` over the disc nodes.
pub fn disc_mean_defect(u: &VectorField, body: &RigidBody) -> (f64, f64) {
    let grid = u.grid();
    let nodes = body.disc_nodes(grid);
    let dv = grid.cell_volume();
    let count = nodes.len() as f64;
    let mut mean = [0.0; 3];
    for n in &nodes {
        let v = u.at(n.index);
        mean[0] += v[0];
        mean[1] += v[1];
    }
    mean[0] /= count;
    mean[1] /= count;
    let mut total = 0.0;
    let mut deviation = 0.0;
    for n in &nodes {
        let v = u.at(n.index);
        total += v[0] * v[0] + v[1] * v[1];
        deviation += (v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2);
    }
    let mean_sq = mean[0] * mean[0] + mean[1] * mean[1];
    (dv * total - dv * count * mean_sq, dv * deviation)
}

/// Ramp weights of a disc: `clamp((r + δ - |x - h|) / w + 1/2, 0, 1)` with the
/// offset `δ` chosen so the weights integrate to `π r²`.
pub fn disc_weights(grid: &Grid, body: &RigidBody) -> Vec<(usize, f64)> {
    let h = grid.spacing();
    let w = SMOOTHING_CELLS * h;
    let dv = grid.cell_volume();
    let target = body.area();
    let nodes = grid.local_box(&body.center, body.radius + 3.0 * h);
    let weight = |dist: f64, delta: f64| ((body.radius + delta - dist) / w + 0.5).clamp(0.0, 1.0);
    let mass = |delta: f64| nodes.iter().map(|n| weight(n.dist(), delta)).sum::<f64>() * dv;
    let (mut lo, mut hi) = (-2.0 * h, 2.0 * h);
    while mass(lo) > target {
        lo -= h;
    }
    while mass(hi) < target {
        hi += h;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = if target - mass(lo) <= mass(hi) - target { lo } else { hi };
    nodes
        .iter()
        .filter_map(|n| {
            let x = weight(n.dist(), delta);
            (x > 0.0).then_some((n.index, x))
        })
        .collect()
}

/// Density: 1 in the fluid, `ρ_i` inside disc `i`, ramped over one cell.
/// Overlapping discs add their excess densities, clamped to the range spanned
/// by 1 and the body densities; only overlaps of two heavier or two lighter
/// discs reach the clamp.
pub fn density_field(grid: &Grid, bodies: &[RigidBody]) -> ScalarField {
    let lo = bodies.iter().map(|b| b.density).fold(1.0, f64::min);
    let hi = bodies.iter().map(|b| b.density).fold(1.0, f64::max);
    let mut rho = vec![1.0; grid.num_nodes()];
    for b in bodies {
        for (i, w) in disc_weights(grid, b) {
            rho[i] += (b.density - 1.0) * w;
        }
    }
    for r in rho.iter_mut() {
        *r = r.clamp(lo, hi);
    }
    ScalarField::from_data(grid, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(2, 128, 1.0).unwrap()
    }

    #[test]
    fn uniform_field_is_pure_translation() {
        let g = grid();
        let u = VectorField::from_fn(&g, |_| [0.3, -1.2, 0.0]);
        let b = RigidBody::new([0.41, 0.57, 0.0], 0.08, 2.0);
        let (y, q) = rigid_project(&u, &b).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-14 && (y[1] + 1.2).abs() < 1e-14);
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn rotation_is_recovered() {
        let g = grid();
        let b = RigidBody::new([0.5, 0.5, 0.0], 0.1, 1.0);
        let w = 2.5;
        let u = VectorField::from_fn(&g, |x| [-w * (x[1] - 0.5), w * (x[0] - 0.5), 0.0]);
        let (y, q) = rigid_project(&u, &b).unwrap();
        assert!((q - w).abs() < 1e-12);
        assert!(y[0].abs() < 1e-12 && y[1].abs() < 1e-12);
        // off-lattice center: the fit is exact about the node centroid
        let b = RigidBody::new([0.503, 0.4971, 0.0], 0.1, 1.0);
        let u = VectorField::from_fn(&g, |x| [-w * (x[1] - 0.4971), w * (x[0] - 0.503), 0.0]);
        let fit = rigid_fit(&u, &b).unwrap();
        assert!((fit.spin - w).abs() < 1e-12);
        for n in &fit.nodes {
            let v = fit.at(n);
            let e = u.at(n.index);
            assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_and_residual_parts_split_the_energy() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..2 * g.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = VectorField::from_data(&g, data);
        let b = RigidBody::new([0.33, 0.61, 0.0], 0.07, 0.5);
        let fit = rigid_fit(&u, &b).unwrap();
        let (mut total, mut rigid, mut rest) = (0.0, 0.0, 0.0);
        for n in &fit.nodes {
            let v = u.at(n.index);
            let r = fit.at(n);
            total += v[0] * v[0] + v[1] * v[1];
            rigid += r[0] * r[0] + r[1] * r[1];
            rest += (v[0] - r[0]).powi(2) + (v[1] - r[1]).powi(2);
        }
        assert!((total - rigid - rest).abs() <= 1e-12 * total);
        let (defect, deviation) = disc_mean_defect(&u, &b);
        assert!(defect >= -1e-12);
        assert!((defect - deviation).abs() <= 1e-12 * total * g.cell_volume());
    }

    #[test]
    fn under_resolved_disc_is_rejected() {
        let g = grid();
        let u = VectorField::zeros(&g);
        let b = RigidBody::new([0.5, 0.5, 0.0], 1.5 / 128.0, 1.0);
        assert!(matches!(rigid_project(&u, &b), Err(Error::Resolution(_))));
    }

    #[test]
    fn density_integrates_to_disc_mass() {
        let g = grid();
        let dv = g.cell_volume();
        for (c, r) in [([0.5, 0.5, 0.0], 0.1), ([0.123, 0.987, 0.0], 0.025), ([0.9, 0.05, 0.0], 0.05)] {
            let b = RigidBody::new(c, r, 2.0);
            let rho = density_field(&g, &[b.clone()]);
            let mass: f64 = rho.data().iter().sum::<f64>() * dv;
            assert!((mass - (1.0 + b.area())).abs() < 1e-13, "{mass}");
            assert!(rho.data().iter().all(|&x| (1.0..=2.0).contains(&x)));
            let inner = b.disc_nodes(&g).into_iter().filter(|n| n.dist() < r - g.spacing());
            for n in inner {
                assert_eq!(rho.value(n.index), 2.0);
            }
        }
    }

    #[test]
    fn overlapping_discs_stay_in_range() {
        let g = grid();
        let dv = g.cell_volume();
        let a = RigidBody::new([0.5, 0.5, 0.0], 0.06, 0.5);
        let b = RigidBody::new([0.55, 0.5, 0.0], 0.06, 0.5);
        assert!(a.overlaps(&b, &g));
        let rho = density_field(&g, &[a.clone(), b.clone()]);
        assert!(rho.data().iter().all(|&x| (0.5..=1.0).contains(&x)));
        // opposite excesses do not reach the clamp and keep the mass
        let heavy = RigidBody { density: 2.0, ..b };
        let rho = density_field(&g, &[a.clone(), heavy.clone()]);
        let mass: f64 = rho.data().iter().sum::<f64>() * dv;
        assert!((mass - (1.0 - 0.5 * a.area() + heavy.area())).abs() < 1e-13);
    }
}
