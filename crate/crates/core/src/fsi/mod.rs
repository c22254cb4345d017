//! A 2D one-fluid model of small rigid discs in a periodic incompressible flow.
//!
//! The discs are volume-penalized: inside disc `i` the momentum equation gets
//! the Brinkman term `-(1/η)(u - u_i)`, `u_i` the least-squares rigid fit of
//! `u` on the disc. The density is `1` in the fluid and `ρ_i` in disc `i`.
//!
//! One step, with `ρ_0 = min ρ` and `ν_0 = μ / (2 ρ_0)`:
//!
//! 1. explicit part `F = -(u·∇)u|_skew + g + (μ/(2ρ) - ν_0) Δu`, advanced with
//!    second-order Adams-Bashforth;
//! 2. implicit `(1/dt - ν_0 Δ) û = u/dt + F - (1/ρ - 1/ρ_0) ∇p̂`, `p̂` the
//!    pressure extrapolated from the last two steps;
//! 3. penalty, pointwise implicit;
//! 4. Leray projection, which also returns the new pressure;
//! 5. bodies move with the rigid fit of the new velocity, the density is rebuilt.
//!
//! The stress is `μ 𝔻u`, so for solenoidal fields the viscous term is `(μ/2) Δu`.

mod body;
mod diagnostics;
mod study;

pub use body::{
    density_field, disc_mean_defect, disc_weights, rigid_fit, rigid_project, RigidBody, RigidFit, MIN_NODES_ACROSS,
    SMOOTHING_CELLS,
};
pub use diagnostics::{
    energy_report, rigid_velocity_bound_check, time_series, velocity_l2, BodySample, Sample, DISC_FLOOR, ENERGY_TOLERANCE,
};
pub use study::{
    run, simulate, taylor_green, taylor_green_check, vanishing_body_study, BodySpec, InitialFlow, Run, StudyConfig,
    StudyReport,
};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{
    divergence, grad_scalar, laplacian, partial, project_with_potential, screened_poisson, sym_gradient, Grid, Point,
    ScalarField, VectorField,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FsiParams {
    /// Viscosity in `𝕊 = μ 𝔻u`.
    pub mu: f64,
    /// Penalty relaxation time.
    pub eta: f64,
    pub dt: f64,
    /// Uniform part of the force per unit mass.
    pub gravity: Point,
    /// Amplitude of the cellular force `A (sin kx cos ky, -cos kx sin ky)`, `k = 2π/L`.
    pub cell_forcing: f64,
    /// Off: bodies are passive fluid of their own density.
    pub penalty: bool,
    /// Abort when the energy exceeds this multiple of the available budget.
    pub guard: f64,
}

impl Default for FsiParams {
    fn default() -> Self {
        Self {
            mu: 0.01,
            eta: 1e-3,
            dt: 1e-3,
            gravity: [0.0; 3],
            cell_forcing: 0.0,
            penalty: true,
            guard: 1e3,
        }
    }
}

impl FsiParams {
    /// `min(h/‖u‖∞, h²/(4μ), η)`.
    pub fn stability_bound(&self, grid: &Grid, umax: f64) -> f64 {
        let h = grid.spacing();
        let advective = if umax > 0.0 { h / umax } else { f64::INFINITY };
        advective.min(h * h / (4.0 * self.mu)).min(self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("eta", self.eta), ("dt", self.dt), ("guard", self.guard)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.cell_forcing.is_finite() || self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("force must be finite".into()));
        }
        Ok(())
    }

    pub fn force(&self, grid: &Grid) -> VectorField {
        let k = 2.0 * PI / grid.len();
        let (g, a) = (self.gravity, self.cell_forcing);
        VectorField::from_fn(grid, |x| {
            let (s0, c0) = (k * x[0]).sin_cos();
            let (s1, c1) = (k * x[1]).sin_cos();
            [g[0] + a * s0 * c1, g[1] - a * c0 * s1, 0.0]
        })
    }
}

#[derive(Debug, Clone)]
pub struct FsiState {
    pub t: f64,
    pub u: VectorField,
    pub rho: ScalarField,
    pub bodies: Vec<RigidBody>,
    /// `∫_0^t ∫ μ |𝔻u|²`.
    pub dissipation: f64,
    /// `∫_0^t ∫ ρ g·u`.
    pub work: f64,
    /// `∫_0^t ½ ∫ ρ |g|²`, the forcing budget of the Gronwall bound.
    pub forcing_budget: f64,
    /// Time during which some pair of discs overlapped.
    pub overlap_time: f64,
    pub steps: usize,
    pressure: ScalarField,
    prev_pressure: Option<ScalarField>,
    prev_explicit: Option<VectorField>,
}

/// `½ ∫ ρ |u|²`.
pub fn kinetic_energy(u: &VectorField, rho: &ScalarField) -> f64 {
    let dv = u.grid().cell_volume();
    u.data()
        .chunks_exact(2)
        .zip(rho.data())
        .map(|(v, r)| 0.5 * r * (v[0] * v[0] + v[1] * v[1]))
        .sum::<f64>()
        * dv
}

/// `∫ μ |𝔻u|²`.
pub fn dissipation_rate(u: &VectorField, mu: f64) -> f64 {
    let d = sym_gradient(u);
    mu * d.data().iter().map(|x| x * x).sum::<f64>() * u.grid().cell_volume()
}

/// `∫ ρ g·u` and `½ ∫ ρ |g|²`.
fn force_rates(u: &VectorField, rho: &ScalarField, g: &VectorField) -> (f64, f64) {
    let dv = u.grid().cell_volume();
    let mut power = 0.0;
    let mut budget = 0.0;
    for ((v, f), r) in u.data().chunks_exact(2).zip(g.data().chunks_exact(2)).zip(rho.data()) {
        power += r * (f[0] * v[0] + f[1] * v[1]);
        budget += 0.5 * r * (f[0] * f[0] + f[1] * f[1]);
    }
    (power * dv, budget * dv)
}

fn any_overlap(grid: &Grid, bodies: &[RigidBody]) -> bool {
    bodies
        .iter()
        .enumerate()
        .any(|(i, a)| bodies[i + 1..].iter().any(|b| a.overlaps(b, grid)))
}

/// `-½ [(u·∇)u + ∇·(u ⊗ u)]`, which conserves `∫|u|²` under centered differences.
fn skew_advection(u: &VectorField) -> VectorField {
    let grid = u.grid();
    let ux = u.component(0);
    let uy = u.component(1);
    let comps: Vec<ScalarField> = [&ux, &uy]
        .iter()
        .map(|c| {
            let adv = partial(c, 0)
                .data()
                .iter()
                .zip(partial(c, 1).data())
                .zip(ux.data().iter().zip(uy.data()))
                .map(|((dx, dy), (a, b))| a * dx + b * dy)
                .collect::<Vec<f64>>();
            let fx = ScalarField::from_data(grid, ux.data().iter().zip(c.data()).map(|(a, b)| a * b).collect());
            let fy = ScalarField::from_data(grid, uy.data().iter().zip(c.data()).map(|(a, b)| a * b).collect());
            let div = &partial(&fx, 0) + &partial(&fy, 1);
            ScalarField::from_data(
                grid,
                adv.iter().zip(div.data()).map(|(a, d)| -0.5 * (a + d)).collect(),
            )
        })
        .collect();
    VectorField::from_components(&comps)
}

/// Multiplies every component by a nodewise coefficient.
fn scale_nodes(v: &VectorField, coef: &[f64]) -> VectorField {
    let data = v
        .data()
        .chunks_exact(2)
        .zip(coef)
        .flat_map(|(x, c)| [c * x[0], c * x[1]])
        .collect();
    VectorField::from_data(v.grid(), data)
}

fn vector_laplacian(u: &VectorField) -> VectorField {
    VectorField::from_components(&[laplacian(&u.component(0)), laplacian(&u.component(1))])
}

pub struct Simulation {
    pub params: FsiParams,
    pub state: FsiState,
    force: VectorField,
    rho0: f64,
    budget0: f64,
}

impl Simulation {
    /// Starts from `u0` (projected to be solenoidal) with the given discs; the
    /// disc velocities are initialized with the rigid fit of `u0`.
    pub fn new(params: FsiParams, u0: &VectorField, bodies: Vec<RigidBody>) -> Result<Self> {
        params.validate()?;
        let grid = *u0.grid();
        if grid.dim() != 2 {
            return Err(Error::Config(format!("fluid-body runs are 2D only, got d = {}", grid.dim())));
        }
        for b in &bodies {
            if !(b.density > 0.0) {
                return Err(Error::Config(format!("body density must be positive, got {}", b.density)));
            }
            if b.radius >= grid.len() / 8.0 {
                return Err(Error::Config(format!("body radius {} must stay below L/8", b.radius)));
            }
        }
        let (u, _) = project_with_potential(u0);
        let mut bodies = bodies;
        for b in bodies.iter_mut() {
            let (y, q) = rigid_project(&u, b)?;
            b.velocity = y;
            b.spin = q;
        }
        let rho = density_field(&grid, &bodies);
        let rho0 = bodies.iter().map(|b| b.density).fold(1.0, f64::min);
        let force = params.force(&grid);
        let budget0 = kinetic_energy(&u, &rho);
        let state = FsiState {
            t: 0.0,
            u,
            rho,
            bodies,
            dissipation: 0.0,
            work: 0.0,
            forcing_budget: 0.0,
            overlap_time: 0.0,
            steps: 0,
            pressure: ScalarField::zeros(&grid),
            prev_pressure: None,
            prev_explicit: None,
        };
        let mut sim = Self {
            params,
            state,
            force,
            rho0,
            budget0,
        };
        // start-up pressure: the gradient part of the initial explicit terms
        let (_, phi) = project_with_potential(&sim.explicit_terms());
        sim.state.pressure = phi.scale(rho0);
        Ok(sim)
    }

    pub fn grid(&self) -> &Grid {
        self.state.u.grid()
    }

    pub fn force(&self) -> &VectorField {
        &self.force
    }

    pub fn energy(&self) -> f64 {
        kinetic_energy(&self.state.u, &self.state.rho)
    }

    fn explicit_terms(&self) -> VectorField {
        let s = &self.state;
        let nu0 = 0.5 * self.params.mu / self.rho0;
        let coef: Vec<f64> = s.rho.data().iter().map(|r| 0.5 * self.params.mu / r - nu0).collect();
        let mut f = &skew_advection(&s.u) + &self.force;
        if coef.iter().any(|&c| c != 0.0) {
            f = &f + &scale_nodes(&vector_laplacian(&s.u), &coef);
        }
        f
    }

    /// One time step.
    pub fn step(&mut self) -> Result<()> {
        let grid = *self.grid();
        let p = &self.params;
        let dt = p.dt;
        let bound = p.stability_bound(&grid, self.state.u.max_abs());
        if dt > bound {
            return Err(Error::StabilityBound { dt, bound });
        }
        let nu0 = 0.5 * p.mu / self.rho0;
        let explicit = self.explicit_terms();
        let advance = match &self.state.prev_explicit {
            Some(prev) => explicit.scale(1.5).axpy(-0.5, prev),
            None => explicit.clone(),
        };
        let mut rhs = self.state.u.scale(1.0 / dt).axpy(1.0, &advance);

        // variable-density part of the pressure gradient
        let inv: Vec<f64> = self.state.rho.data().iter().map(|r| 1.0 / r - 1.0 / self.rho0).collect();
        if inv.iter().any(|&c| c != 0.0) {
            let p_hat = match &self.state.prev_pressure {
                Some(prev) => self.state.pressure.scale(2.0).axpy(-1.0, prev),
                None => self.state.pressure.clone(),
            };
            rhs = rhs.axpy(-1.0, &scale_nodes(&grad_scalar(&p_hat), &inv));
        }
        let mut u_hat = VectorField::from_components(&[
            screened_poisson(&rhs.component(0), 1.0 / dt, nu0),
            screened_poisson(&rhs.component(1), 1.0 / dt, nu0),
        ]);

        if p.penalty && !self.state.bodies.is_empty() {
            let mut pull = vec![0.0; 2 * grid.num_nodes()];
            let mut rate = vec![0.0; grid.num_nodes()];
            for b in &self.state.bodies {
                let fit = rigid_fit(&u_hat, b)?;
                for n in &fit.nodes {
                    let a = dt / (p.eta * self.state.rho.value(n.index));
                    let target = fit.at(n);
                    pull[2 * n.index] += a * target[0];
                    pull[2 * n.index + 1] += a * target[1];
                    rate[n.index] += a;
                }
            }
            let data = u_hat.data_mut();
            for (i, &a) in rate.iter().enumerate() {
                if a > 0.0 {
                    data[2 * i] = (data[2 * i] + pull[2 * i]) / (1.0 + a);
                    data[2 * i + 1] = (data[2 * i + 1] + pull[2 * i + 1]) / (1.0 + a);
                }
            }
        }

        let (u_new, phi) = project_with_potential(&u_hat);
        let pressure = phi.scale(self.rho0 / dt);

        let mut bodies = self.state.bodies.clone();
        for b in bodies.iter_mut() {
            let (y, q) = rigid_project(&u_new, b)?;
            b.center = grid.wrap_point([b.center[0] + y[0] * dt, b.center[1] + y[1] * dt, 0.0]);
            b.velocity = y;
            b.spin = q;
            b.angle += q * dt;
        }
        let rho_new = density_field(&grid, &bodies);

        let s = &self.state;
        let (power_old, budget_old) = force_rates(&s.u, &s.rho, &self.force);
        let (power_new, budget_new) = force_rates(&u_new, &rho_new, &self.force);
        let dissipation =
            s.dissipation + 0.5 * dt * (dissipation_rate(&s.u, p.mu) + dissipation_rate(&u_new, p.mu));
        let work = s.work + 0.5 * dt * (power_old + power_new);
        let forcing_budget = s.forcing_budget + 0.5 * dt * (budget_old + budget_new);
        let overlap_time = s.overlap_time + if any_overlap(&grid, &bodies) { dt } else { 0.0 };
        let t = (s.steps + 1) as f64 * dt;

        if !u_new.is_finite() {
            return Err(Error::Unstable {
                t,
                reason: "velocity is no longer finite".into(),
            });
        }
        let energy = kinetic_energy(&u_new, &rho_new);
        let allowance = p.guard * (self.budget0 + work.abs() + forcing_budget + 1e-12);
        if energy > allowance {
            return Err(Error::Unstable {
                t,
                reason: format!("kinetic energy {energy:e} exceeds {allowance:e}"),
            });
        }

        let steps = s.steps + 1;
        let prev_pressure = std::mem::replace(&mut self.state.pressure, ScalarField::zeros(&grid));
        self.state = FsiState {
            t,
            u: u_new,
            rho: rho_new,
            bodies,
            dissipation,
            work,
            forcing_budget,
            overlap_time,
            steps,
            pressure,
            prev_pressure: Some(prev_pressure),
            prev_explicit: Some(explicit),
        };
        Ok(())
    }

    /// Largest centered divergence of the current velocity.
    pub fn divergence_max(&self) -> f64 {
        divergence(&self.state.u).max_abs()
    }

    pub fn mass(&self) -> f64 {
        self.state.rho.data().iter().sum::<f64>() * self.grid().cell_volume()
    }
}
