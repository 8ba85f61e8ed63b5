//! Flat `key = value` run configuration with named presets.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{ControlProblem, OptimizerConfig, StepRule};
use crate::error::{Error, Result};
use crate::field_seq::{Control, FieldSeq};
use crate::gamma::GammaSource;
use crate::grid::{Field, Grid2D};
use crate::io;
use crate::operators::stencil::laplacian_into;
use crate::params::{Model, ModelParams};
use crate::state::{solve_state, InitialData, SolverOptions};

const DEFAULTS: &[(&str, &str)] = &[
    ("grid.nx", "64"),
    ("grid.ny", "64"),
    ("grid.lx", "1.0"),
    ("grid.ly", "1.0"),
    ("model.tau", "0.1"),
    ("model.m", "1.0"),
    ("model.c0", "1.5"),
    ("model.T", "1.0"),
    ("model.nt", "200"),
    ("model.newton_tol", "1e-12"),
    ("model.newton_max_iter", "40"),
    ("model.cg_tol", "1e-12"),
    ("model.cg_max_iter", "2000"),
    ("gamma.kind", "tanh"),
    ("gamma.a", "0.5"),
    ("gamma.c_phi", "-1.0"),
    ("gamma.c_sigma", "1.0"),
    ("gamma.offset", "0.0"),
    ("init.preset", "bump"),
    ("init.phi", "0.0"),
    ("init.sigma", "0.5"),
    ("init.delta", "1e-3"),
    ("init.noise_amplitude", "0.3"),
    ("init.phi_path", ""),
    ("init.sigma_path", ""),
    ("control.source", "zero"),
    ("control.value", "0.0"),
    ("control.dir", ""),
    ("control.cap", "inf"),
    ("cost.alpha1", "1.0"),
    ("cost.alpha2", "1.0"),
    ("cost.alpha3", "1.0"),
    ("cost.alpha4", "1.0"),
    ("cost.alpha5", "1e-4"),
    ("cost.targets", "constant"),
    ("cost.phi_target", "0.0"),
    ("cost.sigma_target", "0.5"),
    ("cost.target_dir", ""),
    ("cost.u_true", "0.3"),
    ("cost.u_min", "-0.5"),
    ("cost.u_max", "0.5"),
    ("opt.max_iters", "200"),
    ("opt.c1", "1e-4"),
    ("opt.shrink", "0.5"),
    ("opt.initial_step", "auto"),
    ("opt.step_growth", "2.0"),
    ("opt.step_rule", "bb"),
    ("opt.max_step", "1e10"),
    ("opt.stationarity_tol", "1e-6"),
    ("opt.min_step", "1e-14"),
    ("output.dir", "out"),
    ("output.name", "run"),
    ("output.stride", "1"),
    ("output.adjoint", "false"),
    ("seed", "0"),
    ("solver.strict_positivity", "false"),
];

pub const PRESETS: &[&str] = &["default", "uniform-logistic", "inverse-problem", "small"];

fn preset_overrides(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "default" => &[],
        "uniform-logistic" => &[
            ("grid.nx", "16"),
            ("grid.ny", "16"),
            ("model.nt", "1000"),
            ("gamma.a", "0.0"),
            ("init.preset", "uniform"),
            ("init.phi", "0.0"),
            ("init.sigma", "0.5"),
        ],
        "inverse-problem" => &[
            ("grid.nx", "32"),
            ("grid.ny", "32"),
            ("model.nt", "100"),
            ("cost.targets", "synthesized"),
            ("cost.alpha5", "1e-6"),
            ("opt.max_iters", "200"),
        ],
        "small" => &[("grid.nx", "16"), ("grid.ny", "16"), ("model.nt", "20")],
        _ => return None,
    })
}

/// How the initial data is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Uniform { phi: f64, sigma: f64 },
    Bump,
    SeededNoise { amplitude: f64, sigma: f64 },
    File { phi: PathBuf, sigma: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlSpec {
    Zero,
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Constant {
        phi: f64,
        sigma: f64,
    },
    /// Targets taken from a run with `u_true(x, y) = A cos(pi x) cos(pi y)`.
    Synthesized {
        amplitude: f64,
    },
    /// `phiQ_<n>`, `sigmaQ_<n>`, `phiOmega`, `sigmaOmega` CHKS1 files.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid2D,
    pub model: Model,
    pub delta_init: f64,
    pub init: InitSpec,
    pub control: ControlSpec,
    pub alphas: [f64; 5],
    pub targets: TargetSpec,
    pub bounds: (f64, f64),
    pub optimizer: OptimizerConfig,
    pub out_dir: PathBuf,
    pub name: String,
    pub stride: usize,
    pub dump_adjoint: bool,
    pub seed: u64,
    pub options: SolverOptions,
}

/// Raw key/value pairs after preset expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

impl RawConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let over = preset_overrides(name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))))?;
        let mut values: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in over {
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self {
            values,
            base: PathBuf::from("."),
        })
    }

    /// Parses `key = value` lines. A `preset = <name>` line, if present,
    /// must come before any other key.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Option<Self> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "preset" {
                if cfg.is_some() {
                    return Err(Error::Config(format!(
                        "line {}: preset must be the first key",
                        lineno + 1
                    )));
                }
                cfg = Some(Self::preset(v)?);
                continue;
            }
            let c = cfg.get_or_insert_with(|| Self::preset("default").expect("default preset exists"));
            c.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        let mut cfg = cfg.unwrap_or(Self::preset("default")?);
        cfg.base = base.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .expect("every key has a default")
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.parse_as(key)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.parse_as(key)
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.parse_as(key)
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        let v = self.get(key);
        if v.is_empty() {
            return Err(Error::Config(format!("{key} must be set")));
        }
        Ok(self.base.join(v))
    }

    /// Builds and validates the typed configuration.
    pub fn build(&self) -> Result<RunConfig> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let grid = Grid2D::new(
            self.usize("grid.nx")?,
            self.usize("grid.ny")?,
            self.f64("grid.lx")?,
            self.f64("grid.ly")?,
        )
        .map_err(cfg)?;
        let params = ModelParams {
            tau: self.f64("model.tau")?,
            m: self.f64("model.m")?,
            c0: self.f64("model.c0")?,
            t_final: self.f64("model.T")?,
            nt: self.usize("model.nt")?,
            newton_tol: self.f64("model.newton_tol")?,
            newton_max_iter: self.usize("model.newton_max_iter")?,
            cg_tol: self.f64("model.cg_tol")?,
            cg_max_iter: self.usize("model.cg_max_iter")?,
        };
        let a = self.f64("gamma.a")?;
        let gamma = match self.get("gamma.kind") {
            "tanh" => GammaSource::tanh_default(a),
            "custom" => GammaSource::custom(
                a,
                self.f64("gamma.c_phi")?,
                self.f64("gamma.c_sigma")?,
                self.f64("gamma.offset")?,
            ),
            other => {
                return Err(Error::Config(format!(
                    "gamma.kind must be tanh or custom, got {other:?}"
                )))
            }
        }
        .map_err(cfg)?;
        let model = Model::new(params, gamma).map_err(cfg)?;

        let init = match self.get("init.preset") {
            "uniform" => InitSpec::Uniform {
                phi: self.f64("init.phi")?,
                sigma: self.f64("init.sigma")?,
            },
            "bump" => InitSpec::Bump,
            "seeded-noise" => InitSpec::SeededNoise {
                amplitude: self.f64("init.noise_amplitude")?,
                sigma: self.f64("init.sigma")?,
            },
            "file" => InitSpec::File {
                phi: self.path("init.phi_path")?,
                sigma: self.path("init.sigma_path")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "init.preset must be uniform, bump, seeded-noise or file, got {other:?}"
                )))
            }
        };
        let control = match self.get("control.source") {
            "zero" => ControlSpec::Zero,
            "constant" => ControlSpec::Constant(self.f64("control.value")?),
            "file" => ControlSpec::File(self.path("control.dir")?),
            other => {
                return Err(Error::Config(format!(
                    "control.source must be zero, constant or file, got {other:?}"
                )))
            }
        };
        let targets = match self.get("cost.targets") {
            "constant" => TargetSpec::Constant {
                phi: self.f64("cost.phi_target")?,
                sigma: self.f64("cost.sigma_target")?,
            },
            "synthesized" => TargetSpec::Synthesized {
                amplitude: self.f64("cost.u_true")?,
            },
            "file" => TargetSpec::File(self.path("cost.target_dir")?),
            other => {
                return Err(Error::Config(format!(
                    "cost.targets must be constant, synthesized or file, got {other:?}"
                )))
            }
        };
        let alphas = [
            self.f64("cost.alpha1")?,
            self.f64("cost.alpha2")?,
            self.f64("cost.alpha3")?,
            self.f64("cost.alpha4")?,
            self.f64("cost.alpha5")?,
        ];
        if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) || alphas.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!(
                "cost weights must be nonnegative and not all zero, got {alphas:?}"
            )));
        }
        let bounds = (self.f64("cost.u_min")?, self.f64("cost.u_max")?);
        if !(bounds.0 <= bounds.1) {
            return Err(Error::Config(format!(
                "infeasible bounds: u_min = {} > u_max = {}",
                bounds.0, bounds.1
            )));
        }
        let initial_step = match self.get("opt.initial_step") {
            "auto" => None,
            _ => Some(self.f64("opt.initial_step")?),
        };
        let step_rule = match self.get("opt.step_rule") {
            "bb" => StepRule::BarzilaiBorwein,
            "growth" => StepRule::Growth,
            other => {
                return Err(Error::Config(format!(
                    "opt.step_rule must be bb or growth, got {other:?}"
                )))
            }
        };
        let optimizer = OptimizerConfig {
            max_outer_iters: self.usize("opt.max_iters")?,
            armijo_c1: self.f64("opt.c1")?,
            armijo_shrink: self.f64("opt.shrink")?,
            initial_step,
            step_growth: self.f64("opt.step_growth")?,
            step_rule,
            max_step: self.f64("opt.max_step")?,
            stationarity_tol: self.f64("opt.stationarity_tol")?,
            min_step: self.f64("opt.min_step")?,
        };
        optimizer.validate().map_err(cfg)?;
        let control_cap = self.f64("control.cap")?;
        if !(control_cap > 0.0) {
            return Err(Error::Config(format!(
                "control.cap must be positive, got {control_cap}"
            )));
        }
        let delta_init = self.f64("init.delta")?;
        Ok(RunConfig {
            grid,
            model,
            delta_init,
            init,
            control,
            alphas,
            targets,
            bounds,
            optimizer,
            out_dir: PathBuf::from(self.get("output.dir")),
            name: self.get("output.name").to_string(),
            stride: self.usize("output.stride")?.max(1),
            dump_adjoint: self.bool("output.adjoint")?,
            seed: self.parse_as("seed")?,
            options: SolverOptions {
                control_cap,
                strict_positivity: self.bool("solver.strict_positivity")?,
            },
        })
    }
}

/// Mean of a field and its four mirrored neighbours, `passes` times.
fn smooth(f: &mut Field, passes: usize) {
    let grid = *f.grid();
    let mut lap = vec![0.0; grid.len()];
    let h2 = 1.0 / (1.0 / (grid.hx() * grid.hx()) + 1.0 / (grid.hy() * grid.hy()));
    for _ in 0..passes {
        laplacian_into(&grid, f.values(), &mut lap);
        for (v, l) in f.values_mut().iter_mut().zip(&lap) {
            *v += 0.2 * h2 * l;
        }
    }
}

impl RunConfig {
    pub fn initial_data(&self) -> Result<InitialData> {
        let g = &self.grid;
        let cap = 1.0 - self.delta_init;
        let (phi, sigma) = match &self.init {
            InitSpec::Uniform { phi, sigma } => (Field::constant(g, *phi), Field::constant(g, *sigma)),
            InitSpec::Bump => (
                Field::from_fn(g, |x, y| 0.5f64.min(cap) * (PI * x).cos() * (PI * y).cos()),
                Field::from_fn(g, |x, _| 0.5 + 0.25 * (PI * x).cos()),
            ),
            InitSpec::SeededNoise { amplitude, sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let vals = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut phi = Field::from_values(g, vals)?;
                smooth(&mut phi, 8);
                let peak = phi.norm_inf();
                if peak > 0.0 {
                    phi.scale(amplitude.min(cap) / peak);
                }
                (phi, Field::constant(g, *sigma))
            }
            InitSpec::File { phi, sigma } => (io::read_field_on(phi, g)?, io::read_field_on(sigma, g)?),
        };
        InitialData::new(phi, sigma, self.delta_init)
    }

    pub fn initial_control(&self) -> Result<Control> {
        let nt = self.model.params.nt;
        match &self.control {
            ControlSpec::Zero => Ok(FieldSeq::zeros(&self.grid, nt)),
            ControlSpec::Constant(c) => Ok(FieldSeq::constant(&self.grid, nt, *c)),
            ControlSpec::File(dir) => io::read_control(dir, &self.grid, nt),
        }
    }

    /// The control used to synthesize targets.
    pub fn true_control(&self, amplitude: f64) -> Control {
        FieldSeq::from_fn(&self.grid, self.model.params.nt, |_, x, y| {
            amplitude * (PI * x).cos() * (PI * y).cos()
        })
    }

    pub fn problem(&self, init: &InitialData) -> Result<ControlProblem> {
        let nt = self.model.params.nt;
        let g = &self.grid;
        match &self.targets {
            TargetSpec::Constant { phi, sigma } => {
                ControlProblem::uniform(g, nt, self.alphas, *phi, *sigma, self.bounds)
            }
            TargetSpec::Synthesized { amplitude } => {
                let u = self.true_control(*amplitude);
                let traj = solve_state(init, &u, &self.model, self.options)?;
                ControlProblem::from_trajectory(&traj, self.alphas, self.bounds)
            }
            TargetSpec::File(dir) => {
                let read = |name: String| io::read_field_on(&dir.join(name), g);
                let phi_q = (0..nt)
                    .map(|n| read(format!("phiQ_{n}.chks1")))
                    .collect::<Result<Vec<_>>>()?;
                let sigma_q = (0..nt)
                    .map(|n| read(format!("sigmaQ_{n}.chks1")))
                    .collect::<Result<Vec<_>>>()?;
                ControlProblem::new(
                    self.alphas,
                    FieldSeq::new(g, phi_q)?,
                    read("phiOmega.chks1".into())?,
                    FieldSeq::new(g, sigma_q)?,
                    read("sigmaOmega.chks1".into())?,
                    FieldSeq::constant(g, nt, self.bounds.0),
                    FieldSeq::constant(g, nt, self.bounds.1),
                )
            }
        }
    }
}
