//! Command-line entry point.
//!
//! Exit codes: 0 every verdict passed (an expected negative counts as a
//! pass), 1 a verdict failed or a solver broke down, 2 bad config, argument
//! or I/O, 3 a fluid-body run went unstable or violated its time-step bound.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fsi::{
    energy_report, rigid_velocity_bound_check, simulate, taylor_green_check, time_series, vanishing_body_study,
    ENERGY_TOLERANCE,
};
use crate::grid::write_field;
use crate::restriction::{BodyPath, Restrictor};
use crate::verify::{
    derivative_check, error_decay_study, lemma_b1_suite, uniform_bound_sweep, BoundMode, SweepReport,
};

use config::{read_study, ConfigFile, DerivativeConfig, OperatorStudyConfig, Scenario};

#[derive(Debug, Parser)]
#[command(name = "smallbody", version, about = "Restriction operator studies and fluid-body experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uniform bounds, error decay and the random ball suite.
    OperatorStudy(Common),
    /// Assembled center and time derivatives against finite differences.
    DerivativeCheck(Common),
    /// One fluid-body run, or the Taylor-Green check.
    FsiRun(Common),
    /// Body-free reference against a sweep of shrinking bodies.
    VanishingStudy(Common),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Config file; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OperatorStudy(_) => "operator-study",
            Self::DerivativeCheck(_) => "derivative-check",
            Self::FsiRun(_) => "fsi-run",
            Self::VanishingStudy(_) => "vanishing-study",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Self::OperatorStudy(c) | Self::DerivativeCheck(c) | Self::FsiRun(c) | Self::VanishingStudy(c) => c,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Unstable { .. } | Error::StabilityBound { .. } => 3,
        Error::Compatibility { .. } | Error::Convergence { .. } | Error::Precondition(_) => 1,
        _ => 2,
    }
}

/// Tables and verdict lines of one invocation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<SweepReport>,
    /// Extra `key=value` summary lines.
    pub notes: Vec<(String, String)>,
    /// Set when a run aborted on instability.
    pub aborted: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.aborted.is_none() && self.reports.iter().all(SweepReport::passed)
    }

    pub fn code(&self) -> i32 {
        match (&self.aborted, self.passed()) {
            (Some(_), _) => 3,
            (None, true) => 0,
            (None, false) => 1,
        }
    }

    fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            s.push_str(&r.summary());
        }
        for (k, v) in &self.notes {
            writeln!(s, "{k}={v}").unwrap();
        }
        if let Some(reason) = &self.aborted {
            writeln!(s, "aborted={reason}").unwrap();
        }
        writeln!(s, "passed={}", self.passed()).unwrap();
        s
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    execute(&cli.command)
}

pub fn execute(command: &Command) -> i32 {
    let common = command.common();
    match dispatch(command) {
        Ok(outcome) => {
            let code = outcome.code();
            if !common.quiet || code != 0 {
                print!("{}", outcome.summary());
            }
            if let Some(reason) = &outcome.aborted {
                eprintln!("error: {reason}");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome> {
    let common = command.common();
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out = &common.out;
    match command {
        Command::OperatorStudy(_) => {
            let mut cfg = OperatorStudyConfig::read(&mut file)?;
            file.finish()?;
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            prepare(out, command, cfg.seed)?;
            finish(out, operator_study(&cfg)?)
        }
        Command::DerivativeCheck(_) => {
            let mut cfg = DerivativeConfig::read(&mut file)?;
            file.finish()?;
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            prepare(out, command, cfg.seed)?;
            finish(out, derivative(&cfg)?)
        }
        Command::FsiRun(_) => {
            let mut scenario = Scenario::read(&mut file)?;
            file.finish()?;
            if let Some(s) = common.seed {
                scenario.set_seed(s);
            }
            prepare(out, command, scenario.seed())?;
            finish(out, fsi_run(&scenario, out)?)
        }
        Command::VanishingStudy(_) => {
            let mut cfg = read_study(&mut file, Default::default())?;
            file.finish()?;
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            prepare(out, command, cfg.seed)?;
            finish(out, vanishing(&cfg)?)
        }
    }
}

fn prepare(out: &Path, command: &Command, seed: u64) -> Result<()> {
    fs::create_dir_all(out)?;
    let common = command.common();
    let config = common
        .config
        .as_ref()
        .map_or("<defaults>".to_string(), |p| p.display().to_string());
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let manifest = format!(
        "subcommand={}\nconfig={config}\nout={}\nseed={seed}\nversion={}\ntimestamp={stamp}\n",
        command.name(),
        out.display(),
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(out.join("manifest.txt"), manifest)?;
    Ok(())
}

fn finish(out: &Path, outcome: Outcome) -> Result<Outcome> {
    for r in &outcome.reports {
        r.write_csv(out.join(format!("{}.csv", r.name)))?;
    }
    fs::write(out.join("summary.txt"), outcome.summary())?;
    Ok(outcome)
}

/// Runs the three operator studies; the sweep of every mode goes in one table.
pub fn operator_study(cfg: &OperatorStudyConfig) -> Result<Outcome> {
    let restrictor = Restrictor::new(&cfg.grid);
    let phi = cfg.field.build(&cfg.grid, cfg.seed);
    let mut sweep = SweepReport::new("uniform_bound", &[]);
    let modes = [
        (BoundMode::Extension, vec![cfg.center], &cfg.radii),
        (BoundMode::Restriction, vec![cfg.center], &cfg.radii),
        (BoundMode::Multi, cfg.multi_centers.clone(), &cfg.multi_eps),
    ];
    for (k, (mode, centers, radii)) in modes.iter().enumerate() {
        let rep = uniform_bound_sweep(&restrictor, &phi, centers, radii, &cfg.ps, *mode)?;
        if k == 0 {
            sweep.columns = std::iter::once("mode".to_string()).chain(rep.columns.iter().cloned()).collect();
        }
        let tag = format!("{mode:?}").to_lowercase();
        for (row, &flag) in rep.rows.iter().zip(&rep.flagged) {
            sweep.push_row(std::iter::once(k as f64).chain(row.iter().copied()).collect(), flag);
        }
        for mut v in rep.verdicts {
            v.name = format!("{tag}_{}", v.name);
            sweep.verdicts.push(v);
        }
        sweep.runtime += rep.runtime;
    }
    let decay = error_decay_study(&restrictor, &phi, &cfg.decay_centers, &cfg.decay_eps, cfg.decay_p)?;
    let balls = lemma_b1_suite(&restrictor, cfg.seed, cfg.trials, cfg.ratio)?;
    Ok(Outcome {
        reports: vec![sweep, decay, balls],
        notes: vec![("uniform_bound.mode_codes".into(), "0=extension,1=restriction,2=multi".into())],
        aborted: None,
    })
}

pub fn derivative(cfg: &DerivativeConfig) -> Result<Outcome> {
    let restrictor = Restrictor::new(&cfg.grid);
    let phi = cfg.field.build(&cfg.grid, cfg.seed);
    let path = BodyPath::constant_velocity(&cfg.centers, &cfg.velocities, 0.0, cfg.t_end)?;
    let (centers, time) = derivative_check(&restrictor, &phi, &path, cfg.eps, cfg.t)?;
    Ok(Outcome {
        reports: vec![centers, time],
        ..Outcome::default()
    })
}

/// A single run: time series, energy and rigid-velocity verdicts, and velocity
/// snapshots under `out/snapshots`.
pub fn fsi_run(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let study = match scenario {
        Scenario::TaylorGreen { n, mu, dt, amplitude, .. } => {
            return Ok(Outcome {
                reports: vec![taylor_green_check(*n, *mu, *dt, *amplitude)?],
                ..Outcome::default()
            });
        }
        Scenario::Bodies(study) => study,
    };
    study.validate()?;
    let radius = study.eps[0];
    let run = match simulate(study, (!study.bodies.is_empty()).then_some(radius)) {
        Ok(run) => run,
        Err(e @ (Error::Unstable { .. } | Error::StabilityBound { .. })) => {
            return Ok(Outcome {
                aborted: Some(e.to_string()),
                ..Outcome::default()
            })
        }
        Err(e) => return Err(e),
    };
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir)?;
    let mut index = String::from("index,t,file\n");
    for (k, (t, u)) in run.snapshots.iter().enumerate() {
        let name = format!("u_{k:05}.field");
        write_field(dir.join(&name), u)?;
        writeln!(index, "{k},{t:e},{name}").unwrap();
    }
    fs::write(dir.join("index.csv"), index)?;
    let mut reports = vec![time_series("time_series", &run.samples), energy_report(&run.samples, ENERGY_TOLERANCE)];
    if !study.bodies.is_empty() {
        reports.push(rigid_velocity_bound_check(&[(radius, &run.samples)], study.q));
    }
    Ok(Outcome {
        reports,
        notes: vec![("overlap_time".into(), format!("{:e}", run.final_state.overlap_time))],
        aborted: None,
    })
}

pub fn vanishing(cfg: &crate::fsi::StudyConfig) -> Result<Outcome> {
    let study = vanishing_body_study(cfg)?;
    let mut reports = vec![study.table, study.reference_energy, study.rigid];
    reports[1].name = "energy_reference".into();
    reports.extend(study.run_energy);
    reports.extend(study.series.iter().map(|(name, s)| time_series(&format!("series_{name}"), s)));
    Ok(Outcome {
        reports,
        notes: Vec::new(),
        aborted: study.aborted,
    })
}
