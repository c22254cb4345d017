use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point, VectorField};
use crate::verify::fields::random_solenoidal;
use crate::verify::{SweepReport, Verdict};

use super::diagnostics::velocity_l2;
use super::{energy_report, rigid_velocity_bound_check, FsiParams, FsiState, RigidBody, Sample, Simulation, ENERGY_TOLERANCE};

/// `A (sin kx cos ky, -cos kx sin ky)` with `k = 2π/L`. Its centered divergence
/// vanishes identically.
pub fn taylor_green(grid: &Grid, amplitude: f64) -> VectorField {
    let k = 2.0 * PI / grid.len();
    VectorField::from_fn(grid, |x| {
        let (s0, c0) = (k * x[0]).sin_cos();
        let (s1, c1) = (k * x[1]).sin_cos();
        [amplitude * s0 * c1, -amplitude * c0 * s1, 0.0]
    })
}

/// Initial velocity: a Taylor-Green cell plus an optional seeded random
/// solenoidal perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFlow {
    pub amplitude: f64,
    pub noise: f64,
}

impl InitialFlow {
    pub fn field(&self, grid: &Grid, seed: u64) -> VectorField {
        let base = taylor_green(grid, self.amplitude);
        if self.noise == 0.0 {
            return base;
        }
        base.axpy(self.noise, &random_solenoidal(grid, seed, 8, 4))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodySpec {
    pub center: Point,
    pub density: f64,
}

/// A scenario and its radius sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
    pub params: FsiParams,
    pub t_end: f64,
    /// Steps between recorded velocity snapshots.
    pub record_every: usize,
    pub initial: InitialFlow,
    /// Body radii, one run each, largest first.
    pub eps: Vec<f64>,
    pub bodies: Vec<BodySpec>,
    /// Shape-regularity pair `(β, λ)` of `λ D^β <= |𝓢|`, `D` the diameter.
    pub beta: f64,
    pub lambda: f64,
    pub rho_bar: f64,
    /// Exponent of the rigid-velocity bound `‖Y‖ <= C |𝓢|^{-1/q}`.
    pub q: f64,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 128,
            len: 1.0,
            params: FsiParams::default(),
            t_end: 0.5,
            record_every: 10,
            initial: InitialFlow {
                amplitude: 1.0,
                noise: 0.0,
            },
            eps: vec![0.1, 0.05, 0.025],
            bodies: vec![BodySpec {
                center: [0.3, 0.4, 0.0],
                density: 0.5,
            }],
            beta: 2.0,
            lambda: 0.5,
            rho_bar: 2.0,
            q: 2.0,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(2, self.n, self.len)
    }

    pub fn steps(&self) -> Result<usize> {
        let steps = (self.t_end / self.params.dt).round();
        if !(steps >= 1.0) || (steps * self.params.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Config(format!(
                "t_end = {} is not a whole number of steps dt = {}",
                self.t_end, self.params.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.beta >= d) || (self.dim == 3 && !(self.beta < 15.0)) {
            return Err(Error::Config(format!("beta = {} outside the admissible range for d = {}", self.beta, self.dim)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.dim == 3 {
            return Err(Error::Config("fluid-body runs are 2D only".into()));
        }
        let grid = self.grid()?;
        self.params.validate()?;
        self.steps()?;
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.eps.is_empty() {
            return Err(Error::Config("at least one body radius is required".into()));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("radii must be strictly decreasing".into()));
        }
        for &e in &self.eps {
            if !(e > 0.0 && e < self.len / 8.0) {
                return Err(Error::Config(format!("radius {e} must lie in (0, L/8)")));
            }
            if 2.0 * e / grid.spacing() < super::MIN_NODES_ACROSS {
                return Err(Error::Resolution(format!("radius {e} spans fewer than 4 nodes at n = {}", self.n)));
            }
            let area = PI * e * e;
            let bound = self.lambda * (2.0 * e).powf(self.beta);
            if area < bound {
                return Err(Error::Config(format!("|S| = {area:e} below lambda D^beta = {bound:e} at radius {e}")));
            }
        }
        for b in &self.bodies {
            if !(b.density > 0.0 && b.density <= self.rho_bar) {
                return Err(Error::Config(format!("body density {} outside (0, {}]", b.density, self.rho_bar)));
            }
        }
        if !(self.q >= 1.0) {
            return Err(Error::Config(format!("q must be at least 1, got {}", self.q)));
        }
        Ok(())
    }

    pub fn initial_velocity(&self) -> Result<VectorField> {
        Ok(self.initial.field(&self.grid()?, self.seed))
    }

    pub fn make_bodies(&self, radius: f64) -> Vec<RigidBody> {
        self.bodies.iter().map(|b| RigidBody::new(b.center, radius, b.density)).collect()
    }
}

/// Recorded run: a sample per step and velocity snapshots.
#[derive(Debug, Clone)]
pub struct Run {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, VectorField)>,
    pub final_state: FsiState,
}

/// Advances `sim` by `steps` steps, sampling every step and keeping a
/// snapshot every `record_every` steps and at the end.
pub fn run(mut sim: Simulation, steps: usize, record_every: usize) -> Result<Run> {
    let mut samples = vec![Sample::capture(&sim)];
    let mut snapshots = vec![(0.0, sim.state.u.clone())];
    for k in 1..=steps {
        sim.step()?;
        samples.push(Sample::capture(&sim));
        if k % record_every == 0 || k == steps {
            snapshots.push((sim.state.t, sim.state.u.clone()));
        }
    }
    Ok(Run {
        samples,
        snapshots,
        final_state: sim.state,
    })
}

/// Runs the scenario with bodies of the given radius, or none.
pub fn simulate(config: &StudyConfig, radius: Option<f64>) -> Result<Run> {
    let u0 = config.initial_velocity()?;
    let bodies = radius.map_or_else(Vec::new, |r| config.make_bodies(r));
    let sim = Simulation::new(config.params.clone(), &u0, bodies)?;
    run(sim, config.steps()?, config.record_every)
}

/// Free decay of a Taylor-Green cell over one turnover time `L / A`: the
/// energy ratio against `exp(-2 ν |k|² t)` with `ν = μ/2`, `|k|² = 2 (2π/L)²`.
pub fn taylor_green_check(n: usize, mu: f64, dt: f64, amplitude: f64) -> Result<SweepReport> {
    let start = Instant::now();
    let grid = Grid::new(2, n, 1.0)?;
    let turnover = grid.len() / amplitude;
    let steps = (turnover / dt).round() as usize;
    let params = FsiParams {
        mu,
        dt,
        eta: dt,
        ..FsiParams::default()
    };
    let sim = Simulation::new(params, &taylor_green(&grid, amplitude), Vec::new())?;
    let out = run(sim, steps, steps)?;
    let k2 = 2.0 * (2.0 * PI / grid.len()).powi(2);
    let e0 = out.samples[0].energy;
    let mut report = SweepReport::new("taylor_green", &["t", "energy", "exact", "divergence", "mass"]);
    let mut worst: f64 = 0.0;
    for s in &out.samples {
        let exact = e0 * (-mu * k2 * s.t).exp();
        worst = worst.max((s.energy / exact - 1.0).abs());
        report.push_row(vec![s.t, s.energy, exact, s.divergence, s.mass], false);
    }
    let m0 = out.samples[0].mass;
    let drift = out.samples.iter().map(|s| (s.mass - m0).abs() / m0).fold(0.0, f64::max);
    let div = out.samples.iter().map(|s| s.divergence).fold(0.0, f64::max);
    report.verdicts.push(Verdict::at_most("decay_rate", worst, 0.02));
    report.verdicts.push(Verdict::at_most("mass_drift", drift, 1e-10));
    report.verdicts.push(Verdict::at_most("divergence", div, 1e-10));
    report.runtime = start.elapsed();
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    /// One row per radius: distances to the body-free run and run diagnostics.
    pub table: SweepReport,
    pub reference_energy: SweepReport,
    /// Energy reports of the body runs, in radius order.
    pub run_energy: Vec<SweepReport>,
    pub rigid: SweepReport,
    /// Samples of every completed run; the body-free run first.
    pub series: Vec<(String, Vec<Sample>)>,
    /// Set when a run was aborted; the report then covers the completed runs.
    pub aborted: Option<String>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.aborted.is_none()
            && self.table.passed()
            && self.reference_energy.passed()
            && self.run_energy.iter().all(|r| r.passed())
            && self.rigid.passed()
    }
}

fn snapshot_distance(a: &[(f64, VectorField)], b: &[(f64, VectorField)]) -> (f64, f64) {
    let dv = a[0].1.grid().cell_volume();
    let sq: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|((_, x), (_, y))| x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() * dv)
        .collect();
    let space_time: f64 = a
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, s)| 0.5 * (t[1].0 - t[0].0) * (s[0] + s[1]))
        .sum();
    (space_time.sqrt(), sq.last().copied().unwrap_or(0.0).sqrt())
}

/// Runs the body-free reference and one run per radius, concurrently, and
/// measures `‖u^ε - u‖` in `L²((0,T) × box)` and at `T`. The distance must
/// decrease strictly as the radius decreases.
pub fn vanishing_body_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let start = Instant::now();
    let radii: Vec<Option<f64>> = std::iter::once(None).chain(config.eps.iter().map(|&e| Some(e))).collect();
    let runs: Vec<Result<Run>> = radii.par_iter().map(|r| simulate(config, *r)).collect();

    let mut aborted = None;
    let mut completed = Vec::new();
    for (r, out) in radii.iter().zip(runs) {
        match out {
            Ok(run) => completed.push((*r, run)),
            Err(e @ (Error::Unstable { .. } | Error::StabilityBound { .. })) => {
                let label = r.map_or("reference".to_string(), |e| format!("radius {e}"));
                aborted.get_or_insert(format!("{label}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }

    let mut table = SweepReport::new(
        "vanishing",
        &["eps", "l2_error", "final_error", "y_l2", "min_disc_defect", "overlap_time", "mass_drift"],
    );
    let reference = completed.iter().find(|(r, _)| r.is_none()).map(|(_, run)| run);
    let reference_energy = match reference {
        Some(run) => energy_report(&run.samples, ENERGY_TOLERANCE),
        None => SweepReport::new("energy", &[]),
    };
    let mut run_energy = Vec::new();
    let mut series = Vec::new();
    if let Some(run) = reference {
        series.push(("reference".to_string(), run.samples.clone()));
    }
    let mut errors = Vec::new();
    for (r, run) in &completed {
        let Some(eps) = r else { continue };
        let Some(reference) = reference else { break };
        let (l2, fin) = snapshot_distance(&run.snapshots, &reference.snapshots);
        let y = velocity_l2(&run.samples).into_iter().fold(0.0, f64::max);
        let defect = run
            .samples
            .iter()
            .flat_map(|s| s.bodies.iter().map(|b| b.disc_defect))
            .fold(f64::INFINITY, f64::min);
        let m0 = run.samples[0].mass;
        let drift = run.samples.iter().map(|s| (s.mass - m0).abs() / m0).fold(0.0, f64::max);
        table.push_row(
            vec![*eps, l2, fin, y, defect, run.final_state.overlap_time, drift],
            false,
        );
        errors.push(l2);
        let mut energy = energy_report(&run.samples, ENERGY_TOLERANCE);
        energy.name = format!("energy_eps{eps}");
        run_energy.push(energy);
        series.push((format!("eps{eps}"), run.samples.clone()));
    }
    let worst_step = errors.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
    table.verdicts.push(Verdict::new(
        "error_decreasing",
        errors.len() >= 2 && worst_step < 1.0,
        worst_step,
        1.0,
    ));
    table.verdicts.push(Verdict::new(
        "runs_completed",
        aborted.is_none(),
        completed.len() as f64,
        radii.len() as f64,
    ));
    let body_runs: Vec<(f64, &[Sample])> = completed
        .iter()
        .filter_map(|(r, run)| r.map(|e| (e, run.samples.as_slice())))
        .collect();
    let rigid = rigid_velocity_bound_check(&body_runs, config.q);
    table.runtime = start.elapsed();
    Ok(StudyReport {
        table,
        reference_energy,
        run_energy,
        rigid,
        series,
        aborted,
    })
}
