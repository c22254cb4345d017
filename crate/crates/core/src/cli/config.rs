//! Flat `key = value` configs. `#` starts a comment; blank lines are skipped.
//! Lists are comma separated, point lists separate points with `;`.
//! Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fsi::{BodySpec, FsiParams, InitialFlow, StudyConfig};
use crate::grid::{Grid, Point, VectorField};
use crate::verify::fields::{random_solenoidal, smooth_flow};

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", k + 1)));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (k + 1, value.trim().to_string())) {
                return Err(Error::Config(format!("line {}: key `{key}` repeats line {first}", k + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn bad(line: usize, key: &str, value: &str, what: &str) -> Error {
        Error::Config(format!("line {line}: `{key} = {value}` is not {what}"))
    }

    pub fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Self::bad(line, key, &v, "a valid value")),
        }
    }

    pub fn get_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => parse_numbers(&v).ok_or_else(|| Self::bad(line, key, &v, "a list of numbers")),
        }
    }

    /// Points of `width` coordinates each, e.g. `0.3, 0.4; 0.6, 0.5`. `none`
    /// gives an empty list.
    pub fn get_points(&mut self, key: &str, width: usize, default: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(default.to_vec());
        };
        if v == "none" {
            return Ok(Vec::new());
        }
        v.split(';')
            .map(|p| parse_numbers(p).filter(|x| x.len() == width))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Self::bad(line, key, &v, &format!("a `;`-separated list of {width}-tuples")))
    }

    /// Fails on any key that was never read.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self
            .entries
            .iter()
            .map(|(key, (line, _))| format!("`{key}` (line {line})"))
            .collect();
        Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
    }
}

fn parse_numbers(s: &str) -> Option<Vec<f64>> {
    let xs: Option<Vec<f64>> = s.split(',').map(|x| x.trim().parse().ok()).collect();
    xs.filter(|x| !x.is_empty() && x.iter().all(|v| v.is_finite()))
}

fn point(xs: &[f64]) -> Point {
    [xs[0], xs[1], 0.0]
}

fn points(xs: &[Vec<f64>]) -> Vec<Point> {
    xs.iter().map(|x| point(x)).collect()
}

/// Test field of the operator studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Smooth,
    Random { modes: usize, kmax: i64 },
}

impl FieldKind {
    fn read(cfg: &mut ConfigFile, default: &str) -> Result<Self> {
        let name: String = cfg.get("field", default.to_string())?;
        let modes = cfg.get("modes", 10)?;
        let kmax = cfg.get("kmax", 3)?;
        match name.as_str() {
            "smooth" => Ok(Self::Smooth),
            "random" => Ok(Self::Random { modes, kmax }),
            other => Err(Error::Config(format!("field must be `smooth` or `random`, got `{other}`"))),
        }
    }

    pub fn build(&self, grid: &Grid, seed: u64) -> VectorField {
        match *self {
            Self::Smooth => smooth_flow(grid),
            Self::Random { modes, kmax } => random_solenoidal(grid, seed, modes, kmax),
        }
    }
}

fn grid_of(cfg: &mut ConfigFile, n: usize) -> Result<Grid> {
    let n = cfg.get("n", n)?;
    let len = cfg.get("len", 1.0)?;
    Grid::new(2, n, len)
}

#[derive(Debug, Clone)]
pub struct OperatorStudyConfig {
    pub grid: Grid,
    pub field: FieldKind,
    pub seed: u64,
    /// Center of the single-ball sweeps.
    pub center: Point,
    /// Radii of the extension and restriction sweeps.
    pub radii: Vec<f64>,
    pub multi_centers: Vec<Point>,
    /// Base radii `ε` of the composition sweep.
    pub multi_eps: Vec<f64>,
    pub ps: Vec<f64>,
    pub decay_centers: Vec<Point>,
    pub decay_eps: Vec<f64>,
    pub decay_p: f64,
    pub trials: usize,
    /// Radius ratio `r_{i+1}/r_i` of the random ball suite.
    pub ratio: f64,
}

impl OperatorStudyConfig {
    pub fn read(cfg: &mut ConfigFile) -> Result<Self> {
        let grid = grid_of(cfg, 256)?;
        let l = grid.len();
        Ok(Self {
            field: FieldKind::read(cfg, "smooth")?,
            seed: cfg.get("seed", 0)?,
            center: point(&cfg.get_points("center", 2, &[vec![0.4 * l, 0.55 * l]])?.concat()),
            radii: cfg.get_list("radii", &[l / 8.0, l / 16.0, l / 32.0, l / 64.0])?,
            multi_centers: points(&cfg.get_points("multi_centers", 2, &[vec![0.3 * l, 0.3 * l], vec![0.32 * l, 0.31 * l]])?),
            multi_eps: cfg.get_list("multi_eps", &[l / 40.0, l / 50.0, l / 64.0])?,
            ps: cfg.get_list("p", &[2.0, 4.0])?,
            decay_centers: points(&cfg.get_points("decay_centers", 2, &[vec![0.5 * l, 0.5 * l]])?),
            decay_eps: cfg.get_list("decay_eps", &[l / 8.0, l / 11.0, l / 16.0, l / 22.0, l / 32.0])?,
            decay_p: cfg.get("decay_p", 2.0)?,
            trials: cfg.get("trials", 50)?,
            ratio: cfg.get("ratio", 5.0)?,
            grid,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DerivativeConfig {
    pub grid: Grid,
    pub field: FieldKind,
    pub seed: u64,
    pub eps: f64,
    pub centers: Vec<Point>,
    pub velocities: Vec<Point>,
    pub t: f64,
    pub t_end: f64,
}

impl DerivativeConfig {
    pub fn read(cfg: &mut ConfigFile) -> Result<Self> {
        let grid = grid_of(cfg, 512)?;
        let l = grid.len();
        // off-node, so no node sits exactly on a ball boundary
        let centers = points(&cfg.get_points("centers", 2, &[vec![0.3913 * l, 0.5127 * l]])?);
        let velocities = points(&cfg.get_points("velocities", 2, &[vec![0.2 * l, 0.0]])?);
        if centers.len() != velocities.len() {
            return Err(Error::Config(format!(
                "{} centers but {} velocities",
                centers.len(),
                velocities.len()
            )));
        }
        Ok(Self {
            field: FieldKind::read(cfg, "smooth")?,
            seed: cfg.get("seed", 0)?,
            eps: cfg.get("eps", l / 8.0)?,
            t: cfg.get("t", 0.5)?,
            t_end: cfg.get("t_end", 1.0)?,
            centers,
            velocities,
            grid,
        })
    }
}

/// Reads the keys of a fluid-body study. `defaults` supplies unset keys.
pub fn read_study(cfg: &mut ConfigFile, defaults: StudyConfig) -> Result<StudyConfig> {
    let d = defaults;
    let p = &d.params;
    let bodies_default: Vec<Vec<f64>> = d
        .bodies
        .iter()
        .map(|b| vec![b.center[0], b.center[1], b.density])
        .collect();
    let gravity = cfg.get_list("gravity", &p.gravity[..2])?;
    if gravity.len() != 2 {
        return Err(Error::Config("gravity needs two components".into()));
    }
    let params = FsiParams {
        mu: cfg.get("mu", p.mu)?,
        eta: cfg.get("eta", p.eta)?,
        dt: cfg.get("dt", p.dt)?,
        gravity: point(&gravity),
        cell_forcing: cfg.get("cell_forcing", p.cell_forcing)?,
        penalty: cfg.get("penalty", p.penalty)?,
        guard: cfg.get("guard", p.guard)?,
    };
    let bodies = cfg
        .get_points("bodies", 3, &bodies_default)?
        .into_iter()
        .map(|b| BodySpec {
            center: point(&b),
            density: b[2],
        })
        .collect();
    let config = StudyConfig {
        dim: 2,
        n: cfg.get("n", d.n)?,
        len: cfg.get("len", d.len)?,
        params,
        t_end: cfg.get("t_end", d.t_end)?,
        record_every: cfg.get("record_every", d.record_every)?,
        initial: InitialFlow {
            amplitude: cfg.get("amplitude", d.initial.amplitude)?,
            noise: cfg.get("noise", d.initial.noise)?,
        },
        eps: cfg.get_list("eps", &d.eps)?,
        bodies,
        beta: cfg.get("beta", d.beta)?,
        lambda: cfg.get("lambda", d.lambda)?,
        rho_bar: cfg.get("rho_bar", d.rho_bar)?,
        q: cfg.get("q", d.q)?,
        seed: cfg.get("seed", d.seed)?,
    };
    Ok(config)
}

/// What `fsi-run` integrates.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// Free decay of a Taylor-Green cell over one turnover.
    TaylorGreen { n: usize, mu: f64, dt: f64, amplitude: f64, seed: u64 },
    /// One run of a study config; `eps` must hold a single radius.
    Bodies(StudyConfig),
}

impl Scenario {
    pub fn read(cfg: &mut ConfigFile) -> Result<Self> {
        let kind: String = cfg.get("scenario", "bodies".to_string())?;
        match kind.as_str() {
            "taylor_green" => Ok(Self::TaylorGreen {
                n: cfg.get("n", 128)?,
                mu: cfg.get("mu", 0.01)?,
                dt: cfg.get("dt", 1e-3)?,
                amplitude: cfg.get("amplitude", 1.0)?,
                seed: cfg.get("seed", 0)?,
            }),
            "bodies" => {
                let defaults = StudyConfig {
                    eps: vec![0.05],
                    ..StudyConfig::default()
                };
                let study = read_study(cfg, defaults)?;
                if study.eps.len() != 1 {
                    return Err(Error::Config("fsi-run takes a single radius in `eps`".into()));
                }
                Ok(Self::Bodies(study))
            }
            other => Err(Error::Config(format!("scenario must be `taylor_green` or `bodies`, got `{other}`"))),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::TaylorGreen { seed, .. } => *seed,
            Self::Bodies(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            Self::TaylorGreen { seed, .. } => *seed = value,
            Self::Bodies(s) => s.seed = value,
        }
    }
}
