use crate::grid::Point;
use crate::verify::{fit_loglog, SweepReport, Verdict};

use super::{disc_mean_defect, Simulation};

/// Allowed energy-inequality excess per unit time, relative to the initial energy.
pub const ENERGY_TOLERANCE: f64 = 1e-3;

/// Disc identity floor: `∫_disc |u|² - |disc| |Y|² >= -DISC_FLOOR`.
pub const DISC_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BodySample {
    pub center: Point,
    pub velocity: Point,
    pub spin: f64,
    pub angle: f64,
    /// `∫_disc |u|² - |disc| |Y|²`.
    pub disc_defect: f64,
    /// `∫_disc |u - Y|²`.
    pub disc_deviation: f64,
}

/// Scalar record of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `½ ∫ ρ |u|²`.
    pub energy: f64,
    pub dissipation: f64,
    pub work: f64,
    pub forcing_budget: f64,
    pub mass: f64,
    pub divergence: f64,
    pub overlap: bool,
    pub bodies: Vec<BodySample>,
}

impl Sample {
    pub fn capture(sim: &Simulation) -> Self {
        let s = &sim.state;
        let grid = sim.grid();
        let bodies = s
            .bodies
            .iter()
            .map(|b| {
                let (disc_defect, disc_deviation) = disc_mean_defect(&s.u, b);
                BodySample {
                    center: b.center,
                    velocity: b.velocity,
                    spin: b.spin,
                    angle: b.angle,
                    disc_defect,
                    disc_deviation,
                }
            })
            .collect();
        let overlap = s
            .bodies
            .iter()
            .enumerate()
            .any(|(i, a)| s.bodies[i + 1..].iter().any(|b| a.overlaps(b, grid)));
        Self {
            t: s.t,
            energy: sim.energy(),
            dissipation: s.dissipation,
            work: s.work,
            forcing_budget: s.forcing_budget,
            mass: sim.mass(),
            divergence: sim.divergence_max(),
            overlap,
            bodies,
        }
    }
}

/// Energy balance along a run:
/// `E(τ) + ∫_0^τ ∫ μ|𝔻u|² <= E(0) + ∫_0^τ ∫ ρ g·u`, `E = ½ ∫ ρ|u|²`, allowing an
/// excess of `tolerance · E(0)` per unit time. Also fits the Gronwall rate `C`
/// in `E(t) <= (E(0) + ∫_0^t ½∫ρ|g|²) e^{Ct}`, which must not exceed 1.
pub fn energy_report(samples: &[Sample], tolerance: f64) -> SweepReport {
    let mut report = SweepReport::new(
        "energy",
        &["t", "energy", "dissipation", "work", "lhs", "rhs", "mass", "divergence"],
    );
    let Some(first) = samples.first() else {
        report.verdicts.push(Verdict::new("samples", false, 0.0, 1.0));
        return report;
    };
    let e0 = first.energy;
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let mut excess: f64 = f64::NEG_INFINITY;
    let mut rate: f64 = f64::NEG_INFINITY;
    let mut rise: f64 = 0.0;
    let mut mass_drift: f64 = 0.0;
    let mut div_max: f64 = 0.0;
    let unforced = samples.iter().all(|s| s.work == 0.0 && s.forcing_budget == 0.0);
    for (k, s) in samples.iter().enumerate() {
        let lhs = s.energy + s.dissipation;
        let rhs = e0 + s.work;
        report.push_row(vec![s.t, s.energy, s.dissipation, s.work, lhs, rhs, s.mass, s.divergence], false);
        if s.t > 0.0 {
            excess = excess.max((lhs - rhs) / (scale * s.t));
            let bound = e0 + s.forcing_budget;
            if s.energy > 0.0 && bound > 0.0 {
                rate = rate.max((s.energy / bound).ln() / s.t);
            }
        }
        if k > 0 {
            rise = rise.max(s.energy - samples[k - 1].energy);
        }
        mass_drift = mass_drift.max((s.mass - first.mass).abs() / first.mass);
        div_max = div_max.max(s.divergence);
    }
    report.verdicts.push(Verdict::at_most("energy_inequality", excess, tolerance));
    report.verdicts.push(Verdict::at_most("gronwall_rate", rate, 1.0));
    if unforced {
        report.verdicts.push(Verdict::at_most("energy_nonincreasing", rise / scale, 0.0));
    }
    report.verdicts.push(Verdict::at_most("mass_drift", mass_drift, 1e-10));
    report.verdicts.push(Verdict::at_most("divergence", div_max, 1e-10));
    report
}

/// `(√∫_0^T |Y_i|² dt)` for every body, trapezoid rule over the samples.
pub fn velocity_l2(samples: &[Sample]) -> Vec<f64> {
    let bodies = samples.first().map_or(0, |s| s.bodies.len());
    (0..bodies)
        .map(|i| {
            let sq = |s: &Sample| {
                let y = s.bodies[i].velocity;
                y[0] * y[0] + y[1] * y[1]
            };
            samples
                .windows(2)
                .map(|w| 0.5 * (w[1].t - w[0].t) * (sq(&w[0]) + sq(&w[1])))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Disc-mean identity on every sample, and across runs of different body
/// radius the exponent `a` in `‖Y‖_{L²(0,T)} ~ |𝓢|^a`, which the bound
/// `‖Y‖ <= C |𝓢|^{-1/q}` keeps at or above `-1/q`.
pub fn rigid_velocity_bound_check(runs: &[(f64, &[Sample])], q: f64) -> SweepReport {
    let mut report = SweepReport::new("rigid_velocity", &["radius", "area", "y_l2", "min_disc_defect"]);
    let mut worst: f64 = f64::INFINITY;
    let mut areas = Vec::new();
    let mut norms = Vec::new();
    for &(radius, samples) in runs {
        let area = std::f64::consts::PI * radius * radius;
        let y = velocity_l2(samples).into_iter().fold(0.0, f64::max);
        let defect = samples
            .iter()
            .flat_map(|s| s.bodies.iter().map(|b| b.disc_defect))
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(defect);
        report.push_row(vec![radius, area, y, defect], false);
        areas.push(area);
        norms.push(y);
    }
    report.verdicts.push(Verdict::at_least("disc_identity", worst, -DISC_FLOOR));
    report.fit = fit_loglog(&areas, &norms);
    if let Some(fit) = report.fit {
        report.verdicts.push(Verdict::at_least("velocity_exponent", fit.slope, -1.0 / q));
    }
    report
}

/// One row per sample: balance terms, then per body the center, velocity,
/// spin `q`, angle and disc defect.
pub fn time_series(name: &str, samples: &[Sample]) -> SweepReport {
    let bodies = samples.first().map_or(0, |s| s.bodies.len());
    let mut columns: Vec<String> = ["t", "energy", "dissipation", "work", "mass", "divergence", "overlap"]
        .iter()
        .map(|c| c.to_string())
        .collect();
    for i in 0..bodies {
        for c in ["hx", "hy", "yx", "yy", "q", "angle", "disc_defect"] {
            columns.push(format!("{c}_{i}"));
        }
    }
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = SweepReport::new(name, &names);
    for s in samples {
        let mut row = vec![s.t, s.energy, s.dissipation, s.work, s.mass, s.divergence, f64::from(u8::from(s.overlap))];
        for b in &s.bodies {
            row.extend([b.center[0], b.center[1], b.velocity[0], b.velocity[1], b.spin, b.angle, b.disc_defect]);
        }
        report.push_row(row, false);
    }
    report
}
