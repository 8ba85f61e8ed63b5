//! On-disk formats: CHKS1 fields, trajectory directories and CSV logs.
//!
//! A CHKS1 file is the ASCII line `CHKS1 <nx> <ny> <lx> <ly>\n` followed by
//! `nx * ny` little-endian `f64` values, `j` outer and `i` inner.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::control::IterationRecord;
use crate::error::{Error, Result};
use crate::field_seq::{Control, FieldSeq};
use crate::gamma::{GammaKind, GammaSource};
use crate::grid::{Field, Grid2D};
use crate::params::{Model, ModelParams};
use crate::potential::LogPotential;
use crate::sensitivity::AdjointTrajectory;
use crate::state::{free_energy, StateTrajectory, StateTriple};

const MAGIC: &str = "CHKS1";

pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = format!("{MAGIC} {} {} {} {}\n", g.nx(), g.ny(), g.lx(), g.ly()).into_bytes();
    out.reserve(8 * g.len());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8], path: &Path) -> Result<Field> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 5 || parts[0] != MAGIC {
        return Err(bad(format!("bad header {header:?}")));
    }
    let nx: usize = parts[1].parse().map_err(|_| bad(format!("bad nx {:?}", parts[1])))?;
    let ny: usize = parts[2].parse().map_err(|_| bad(format!("bad ny {:?}", parts[2])))?;
    let lx: f64 = parts[3].parse().map_err(|_| bad(format!("bad lx {:?}", parts[3])))?;
    let ly: f64 = parts[4].parse().map_err(|_| bad(format!("bad ly {:?}", parts[4])))?;
    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| bad(e.to_string()))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * grid.len() {
        return Err(bad(format!(
            "expected {} data bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect::<Vec<_>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value".into()));
    }
    Field::from_values(&grid, values)
}

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    fs::write(path, encode_field(f)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, path)
}

/// Reads a field and checks it lives on `grid`.
pub fn read_field_on(path: &Path, grid: &Grid2D) -> Result<Field> {
    let f = read_field(path)?;
    grid.check_same(f.grid()).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Steps kept with a save stride: every `stride`-th plus the last one.
pub fn saved_steps(nt: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=nt).step_by(stride).collect();
    if *v.last().expect("nonempty") != nt {
        v.push(nt);
    }
    v
}

/// Contents of `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub grid: Grid2D,
    pub model: Model,
    pub stride: usize,
    pub steps: Vec<usize>,
}

impl TrajectoryMeta {
    pub fn render(&self) -> String {
        let g = &self.grid;
        let p = &self.model.params;
        let gm = &self.model.gamma;
        let kind = match gm.kind() {
            GammaKind::TanhDefault => "tanh",
            GammaKind::Custom => "custom",
        };
        let steps: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "nx={}\nny={}\nlx={}\nly={}", g.nx(), g.ny(), g.lx(), g.ly());
        let _ = writeln!(s, "T={}\nnt={}\ntau={}\nm={}\nc0={}", p.t_final, p.nt, p.tau, p.m, p.c0);
        let _ = writeln!(
            s,
            "gamma.kind={kind}\ngamma.a={}\ngamma.c_phi={}\ngamma.c_sigma={}\ngamma.offset={}",
            gm.amplitude(),
            gm.coef_phi(),
            gm.coef_sigma(),
            gm.offset()
        );
        let _ = writeln!(s, "stride={}\nsteps={}", self.stride, steps.join(","));
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        fn num<T: std::str::FromStr>(s: &str, k: &str, path: &Path) -> Result<T> {
            s.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: format!("bad value {s:?} for {k}"),
            })
        }
        let f = |k: &str| -> Result<f64> { num(get(k)?, k, path) };
        let u = |k: &str| -> Result<usize> { num(get(k)?, k, path) };
        let grid = Grid2D::new(u("nx")?, u("ny")?, f("lx")?, f("ly")?).map_err(|e| bad(e.to_string()))?;
        let params = ModelParams {
            t_final: f("T")?,
            nt: u("nt")?,
            tau: f("tau")?,
            m: f("m")?,
            c0: f("c0")?,
            ..ModelParams::default()
        };
        let gamma = match get("gamma.kind")?.as_str() {
            "tanh" => GammaSource::tanh_default(f("gamma.a")?),
            "custom" => GammaSource::custom(
                f("gamma.a")?,
                f("gamma.c_phi")?,
                f("gamma.c_sigma")?,
                f("gamma.offset")?,
            ),
            other => return Err(bad(format!("unknown gamma.kind {other:?}"))),
        }
        .map_err(|e| bad(e.to_string()))?;
        let model = Model::new(params, gamma).map_err(|e| bad(e.to_string()))?;
        let steps = get("steps")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| num::<usize>(s, "steps", path))
            .collect::<Result<Vec<_>>>()?;
        if steps.is_empty() || steps.iter().any(|&s| s > params.nt) {
            return Err(bad("steps must be a nonempty list within 0..=nt".into()));
        }
        Ok(Self {
            grid,
            model,
            stride: u("stride")?,
            steps,
        })
    }
}

pub const MONITOR_HEADER: &str = "step,time,phi_min,phi_max,sigma_min,sigma_max,mass_phi,mass_sigma,energy_total,energy_GL,energy_M,newton_iters,cg_iters";

pub fn monitors_csv(traj: &StateTrajectory) -> String {
    let mut s = String::from(MONITOR_HEADER);
    s.push('\n');
    for m in traj.monitors() {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            m.step,
            m.time,
            m.phi_min,
            m.phi_max,
            m.sigma_min,
            m.sigma_max,
            m.mass_phi,
            m.mass_sigma,
            m.energy.total,
            m.energy.ginzburg_landau,
            m.energy.chemo_mass,
            m.stats.newton_iters,
            m.stats.cg_iters
        );
    }
    s
}

/// Writes `meta.txt`, the saved `phi_<n>` / `sigma_<n>` snapshots and
/// `monitors.csv` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &StateTrajectory, stride: usize) -> Result<TrajectoryMeta> {
    create_dir(dir)?;
    let meta = TrajectoryMeta {
        grid: *traj.grid(),
        model: *traj.model(),
        stride: stride.max(1),
        steps: saved_steps(traj.nt(), stride),
    };
    for &n in &meta.steps {
        write_field(&dir.join(format!("phi_{n}.chks1")), &traj.step(n).phi)?;
        write_field(&dir.join(format!("sigma_{n}.chks1")), &traj.step(n).sigma)?;
    }
    write_text(&dir.join("meta.txt"), &meta.render())?;
    write_text(&dir.join("monitors.csv"), &monitors_csv(traj))?;
    Ok(meta)
}

/// Saved snapshots of a trajectory directory.
pub struct StoredTrajectory {
    pub meta: TrajectoryMeta,
    /// `(step, phi, sigma)`
    pub snapshots: Vec<(usize, Field, Field)>,
}

pub fn read_trajectory(dir: &Path) -> Result<StoredTrajectory> {
    let meta_path = dir.join("meta.txt");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = TrajectoryMeta::parse(&text, &meta_path)?;
    let mut snapshots = Vec::with_capacity(meta.steps.len());
    for &n in &meta.steps {
        let phi = read_field_on(&dir.join(format!("phi_{n}.chks1")), &meta.grid)?;
        let sigma = read_field_on(&dir.join(format!("sigma_{n}.chks1")), &meta.grid)?;
        snapshots.push((n, phi, sigma));
    }
    Ok(StoredTrajectory { meta, snapshots })
}

pub const REPORT_HEADER: &str = "step,time,phi_min,phi_max,sigma_min,sigma_max,mass_phi,mass_sigma,energy_total,energy_GL,energy_M,separation_margin";

/// Summary of a stored trajectory, as written to `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub csv: String,
    /// `1 - max_n |phi^n|_inf` over the saved steps.
    pub separation_margin: f64,
    pub min_sigma: f64,
    pub final_energy: f64,
}

pub fn trajectory_report(stored: &StoredTrajectory) -> TrajectoryReport {
    let pot: &LogPotential = &stored.meta.model.potential;
    let dt = stored.meta.model.params.dt();
    let mut csv = String::from(REPORT_HEADER);
    csv.push('\n');
    let mut margin = f64::INFINITY;
    let mut min_sigma = f64::INFINITY;
    let mut final_energy = 0.0;
    for (n, phi, sigma) in &stored.snapshots {
        let triple = StateTriple {
            phi: phi.clone(),
            mu: Field::zeros(phi.grid()),
            sigma: sigma.clone(),
            t: *n as f64 * dt,
        };
        let e = free_energy(&triple, pot);
        let m = 1.0 - phi.norm_inf();
        margin = margin.min(m);
        min_sigma = min_sigma.min(sigma.min());
        final_energy = e.total;
        let _ = writeln!(
            csv,
            "{n},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            triple.t,
            phi.min(),
            phi.max(),
            sigma.min(),
            sigma.max(),
            phi.integral(),
            sigma.integral(),
            e.total,
            e.ginzburg_landau,
            e.chemo_mass,
            m
        );
    }
    TrajectoryReport {
        csv,
        separation_margin: margin,
        min_sigma,
        final_energy,
    }
}

/// Dumps `p`, `q`, `r`, `z` of every saved step.
pub fn write_adjoint(dir: &Path, adj: &AdjointTrajectory, stride: usize) -> Result<()> {
    create_dir(dir)?;
    for n in saved_steps(adj.nt(), stride) {
        let a = &adj.steps[n];
        for (name, f) in [("p", &a.p), ("q", &a.q), ("r", &a.r), ("z", &a.z)] {
            write_field(&dir.join(format!("{name}_{n}.chks1")), f)?;
        }
    }
    Ok(())
}

pub fn write_control(dir: &Path, u: &Control) -> Result<()> {
    create_dir(dir)?;
    for (n, f) in u.iter().enumerate() {
        write_field(&dir.join(format!("u_{n}.chks1")), f)?;
    }
    Ok(())
}

/// Reads `u_0 .. u_{nt-1}` from `dir`.
pub fn read_control(dir: &Path, grid: &Grid2D, nt: usize) -> Result<Control> {
    let fields = (0..nt)
        .map(|n| read_field_on(&dir.join(format!("u_{n}.chks1")), grid))
        .collect::<Result<Vec<_>>>()?;
    FieldSeq::new(grid, fields)
}

pub const OPT_LOG_HEADER: &str = "iter,J,J_phiQ,J_phiT,J_sigmaQ,J_sigmaT,J_u,stationarity,step,armijo_rejects";

pub fn optimization_log_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from(OPT_LOG_HEADER);
    s.push('\n');
    for r in records {
        let c = &r.cost;
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.iter,
            c.total,
            c.phi_q,
            c.phi_t,
            c.sigma_q,
            c.sigma_t,
            c.control,
            r.stationarity,
            r.step,
            r.armijo_rejects
        );
    }
    s
}

pub fn write_csv(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    write_text(path, text)
}
