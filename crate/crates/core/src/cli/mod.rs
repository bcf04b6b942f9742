//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output failure, 2 invalid configuration or
//! input, 3 no steady state within the step budget, 4 certification below
//! `−tol`.

mod config;

pub use config::{parse_entries, ConfigError, DiagSpec, DirectorKind, InitSpec, PairChoice, RunConfig};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::diagnostics::{
    dissipative_inequality_check, energy_inequality_from_records, magnetic_inequality_check, CertifyOptions,
    DiagnosticsError, RelativeEnergyReport, TestPair,
};
use crate::fields::{
    read_snapshot, read_trajectory_file, write_snapshot, write_timeseries, write_trajectory_file, DirectorField,
    DomainKind, Field, FieldError, Grid, Snapshot, TimeSeriesRow, Trajectory,
};
use crate::frank::{energy_gradient, field_energy, magnetic_energy};
use crate::solvers::{euler_lagrange_field, run_to_steady, MagneticSetup, SolverError};

pub const VERSION: &str = concat!("nematic ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "nematic", version, about = "Nematic liquid crystal flows and relative-energy certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `diag.C`, the constant in the potential K.
    #[arg(long = "C", global = true, value_name = "REAL")]
    c: Option<f64>,
    /// Overrides `diag.k`, the coercivity constant.
    #[arg(long, global = true, value_name = "REAL")]
    k: Option<f64>,
    /// Overrides `diag.tol`, the certification tolerance.
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy, magnetic energy and Euler-Lagrange residual of a snapshot.
    Energy { snapshot: PathBuf },
    /// Writes the configured initial state to `initial.snap`.
    Generate,
    /// Projected gradient flow of the director to a steady state.
    Gradflow,
    /// Coupled director/velocity run on a periodic box.
    Flow,
    /// Relative energy inequality of a trajectory file against the configured pair.
    Certify {
        trajectory: PathBuf,
        /// Also report the minimum margin for C = 1, 10, 100.
        #[arg(long)]
        scan_c: bool,
    },
    /// Gradient-flow steady states across `steady.levels` with residual orders.
    Steady,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Energy { .. } => "energy",
            Command::Generate => "generate",
            Command::Gradflow => "gradflow",
            Command::Flow => "flow",
            Command::Certify { .. } => "certify",
            Command::Steady => "steady",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: FieldError },
    #[error("{0}")]
    Field(#[from] FieldError),
    #[error("{0}")]
    Solver(SolverError),
    #[error("{0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    NoConvergence(String),
    #[error("certification FAIL: min margin {min_margin:e} below -{tol:e}")]
    CertificationFailed { min_margin: f64, tol: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output { .. } => 1,
            CliError::NoConvergence(_) => 3,
            CliError::CertificationFailed { .. } => 4,
            _ => 2,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            e => CliError::Solver(e),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. `NEMATIC_THREADS` caps the worker count.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match std::env::var("NEMATIC_THREADS") {
        Err(_) => None,
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                eprintln!("error: NEMATIC_THREADS = `{s}` is not a positive integer");
                return 2;
            }
        },
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut entries = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            parse_entries(&text)?
        }
        None => Default::default(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            entries.insert(key.to_string(), v);
        }
    };
    set("seed", cli.seed.map(|s| s.to_string()));
    set("diag.C", cli.c.map(|x| format!("{x:?}")));
    set("diag.k", cli.k.map(|x| format!("{x:?}")));
    set("diag.tol", cli.tol.map(|x| format!("{x:?}")));
    Ok(RunConfig::from_entries(entries)?)
}

/// Header lines for output files: version, command and the config echo.
pub fn provenance(cfg: &RunConfig, command: &str) -> Vec<String> {
    let mut lines = vec![VERSION.to_string(), format!("command {command}")];
    lines.extend(cfg.echo().into_iter().map(|l| format!("config {l}")));
    lines
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let out = Output { dir: &cli.out, provenance: provenance(&cfg, cli.command.name()) };
    match &cli.command {
        Command::Energy { snapshot } => energy(&cfg, snapshot),
        Command::Generate => generate(&cfg, &out),
        Command::Gradflow => gradflow(&cfg, &out),
        Command::Flow => flow(&cfg, &out),
        Command::Certify { trajectory, scan_c } => certify(&cfg, &out, trajectory, *scan_c),
        Command::Steady => steady(&cfg, &out),
    }
}

struct Output<'a> {
    dir: &'a Path,
    provenance: Vec<String>,
}

impl Output<'_> {
    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(self.dir)
            .map_err(|e| CliError::Output { path: self.dir.to_path_buf(), message: e.to_string() })?;
        Ok(self.dir.join(name))
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&Path) -> Result<(), FieldError>) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        f(&path).map_err(|e| CliError::Output { path: path.clone(), message: e.to_string() })?;
        Ok(path)
    }

    fn write_text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut text = String::new();
        for line in &self.provenance {
            let _ = writeln!(text, "# {line}");
        }
        text.push_str(body);
        self.write_with(name, |p| fs::write(p, text).map_err(FieldError::from))
    }
}

/// Twelve significant digits; exact zero prints as `0`.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        sci
    }
}

/// Energies and residual norms of one director.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySummary {
    pub elastic: f64,
    pub magnetic: f64,
    /// `‖d×q‖_L2` with the solver's `q`.
    pub dxq_norm: f64,
    /// `‖·‖_L2` of the strong-form Euler-Lagrange residual.
    pub el_residual: f64,
}

pub fn energy_summary(cfg: &RunConfig, d: &DirectorField) -> EnergySummary {
    let grid = *d.grid();
    let magnetic = cfg.magnetic_setup(&grid);
    let pair = magnetic.as_ref().map(|m| (&m.params, &m.field));
    let eg = energy_gradient(d, &cfg.frank, pair);
    EnergySummary {
        elastic: field_energy(d, &cfg.frank),
        magnetic: pair.map_or(0.0, |(m, h)| magnetic_energy(d, m, h)),
        dxq_norm: grid.integrate_with(|i| d.values()[i].cross(eg.q[i]).norm_sq()).sqrt(),
        el_residual: euler_lagrange_field(d, &cfg.frank, magnetic.as_ref()).l2_norm(),
    }
}

fn energy(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let snap = read_snapshot(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    let d = DirectorField::new(snap.d).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    let e = energy_summary(cfg, &d);
    println!("F = {}", format_sig12(e.elastic));
    println!("magnetic = {}", format_sig12(e.magnetic));
    println!("||d x q|| = {}", format_sig12(e.dxq_norm));
    println!("EL residual = {}", format_sig12(e.el_residual));
    Ok(())
}

fn generate(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let grid = cfg.grid;
    let d = cfg.initial_director(&grid)?;
    let mut snap = Snapshot::new(0.0, d.into_field());
    snap.v = cfg.initial_velocity(&grid).map(|v| v.into_field());
    snap.provenance = out.provenance.clone();
    let path = out.write_with("initial.snap", |p| write_snapshot(p, &snap))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Writes `trajectory.snap` and `timeseries.csv` into `dir`. The margin
/// column holds the energy inequality margin of the step records; `E_rel`
/// and `W` need a test pair and are left as NaN.
pub fn write_run(dir: &Path, provenance: &[String], traj: &Trajectory) -> Result<(), CliError> {
    let out = Output { dir, provenance: provenance.to_vec() };
    let snaps = traj.to_snapshots(provenance);
    out.write_with("trajectory.snap", |p| write_trajectory_file(p, &snaps))?;
    let energy = energy_inequality_from_records(traj)?;
    let rows: Vec<TimeSeriesRow> = traj
        .records
        .iter()
        .zip(&energy.margin)
        .map(|(r, m)| TimeSeriesRow {
            t: r.time,
            energy: r.elastic + r.magnetic,
            kinetic: r.kinetic,
            total: r.total(),
            dxq_norm: r.dxq_norm,
            sym_grad_norm: r.sym_grad_norm,
            e_rel: f64::NAN,
            w: f64::NAN,
            margin: *m,
        })
        .collect();
    out.write_with("timeseries.csv", |p| write_timeseries(p, provenance, &rows))?;
    Ok(())
}

/// Writes the outputs of a finished or exhausted run and prints a summary.
fn finish_run(cfg: &RunConfig, out: &Output, result: Result<Trajectory, SolverError>) -> Result<(), CliError> {
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(SolverError::NoConvergence { steps, dxq_norm, sym_grad_norm, trajectory }) => {
            let e = SolverError::NoConvergence { steps, dxq_norm, sym_grad_norm, trajectory: Box::new(Trajectory::new(trajectory.grid, trajectory.dt)) };
            (*trajectory, Some(e))
        }
        Err(e) => return Err(e.into()),
    };
    write_run(out.dir, &out.provenance, &traj)?;
    let last = traj.records.last().copied().unwrap_or_default();
    println!("steps = {}", traj.records.len().saturating_sub(1));
    println!("t = {}", format_sig12(last.time));
    println!("energy = {}", format_sig12(last.total()));
    println!("||d x q|| = {}", format_sig12(last.dxq_norm));
    println!("||(grad v)_sym|| = {}", format_sig12(last.sym_grad_norm));
    if let (Some((_, h)), Some(s)) = (cfg.magnetic, traj.last()) {
        let hn = h.norm();
        if hn > 0.0 {
            let g = traj.grid;
            let align = g.integrate_with(|i| s.d.values[i].dot(h).abs() / hn) / g.volume();
            println!("mean |d.H|/|H| = {}", format_sig12(align));
        }
    }
    match failure {
        None => Ok(()),
        Some(e) => Err(e.into()),
    }
}

fn gradflow(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let grid = cfg.grid;
    let d = cfg.initial_director(&grid)?;
    if cfg.init.random_velocity {
        return Err(CliError::Usage("gradflow evolves the director only; set init.velocity = zero".into()));
    }
    let solver = cfg.solver_for(&grid);
    finish_run(cfg, out, run_to_steady(d, None, &cfg.frank, None, &solver))
}

fn flow(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let grid = cfg.grid;
    if grid.kind != DomainKind::Periodic {
        return Err(CliError::Usage("flow requires grid.domain = periodic".into()));
    }
    let l = cfg.leslie.ok_or_else(|| CliError::Usage("flow requires leslie.mu1..mu6 and leslie.lambda".into()))?;
    let d = cfg.initial_director(&grid)?;
    let v = cfg.initial_velocity(&grid);
    let solver = cfg.solver_for(&grid);
    finish_run(cfg, out, run_to_steady(d, v, &cfg.frank, Some(&l), &solver))
}

/// The configured test pair for `traj`, carrying the configured applied
/// field when there is one.
pub fn build_pair(cfg: &RunConfig, traj: &Trajectory) -> Result<TestPair, CliError> {
    let mut pair = match cfg.diag.pair {
        PairChoice::Own => TestPair::from_trajectory(traj)?,
        PairChoice::Constant => {
            let d = cfg.diag.pair_director.or(cfg.init.boundary).ok_or_else(|| {
                CliError::Usage("a constant pair needs diag.pair_director (or init.boundary)".into())
            })?;
            TestPair::constant(d)?
        }
    };
    if let Some((m, h)) = cfg.magnetic {
        pair = pair.with_field(MagneticSetup::uniform(m, traj.grid, cfg.diag.pair_field.unwrap_or(h)));
    }
    Ok(pair)
}

/// Relative energy inequality with the configured constants and the given
/// `C`; the magnetic form is used when the configuration has a field.
pub fn certify_with(
    cfg: &RunConfig,
    traj: &Trajectory,
    pair: &TestPair,
    c: f64,
) -> Result<RelativeEnergyReport, CliError> {
    let grid = traj.grid;
    let opts = CertifyOptions {
        c,
        k: cfg.diag.k,
        theta_coefficient: cfg.diag.theta_coefficient,
        forcing: cfg.forcing.map(|g| Field::constant(grid, g)),
    };
    let l = cfg.leslie.as_ref();
    Ok(match cfg.magnetic {
        Some((m, h)) => magnetic_inequality_check(traj, pair, &cfg.frank, l, &opts, &m, &Field::constant(grid, h))?,
        None => dissipative_inequality_check(traj, pair, &cfg.frank, l, &opts)?,
    })
}

fn certify(cfg: &RunConfig, out: &Output, path: &Path, scan_c: bool) -> Result<(), CliError> {
    let input = |source| CliError::Input { path: path.to_path_buf(), source };
    let traj = Trajectory::from_snapshots(read_trajectory_file(path).map_err(input)?).map_err(input)?;
    for (i, s) in traj.samples.iter().enumerate() {
        DirectorField::new(s.d.clone()).map_err(|e| {
            CliError::Input { path: path.to_path_buf(), source: FieldError::Malformed { offset: 0, message: format!("record {i}: {e}") } }
        })?;
    }
    let pair = build_pair(cfg, &traj)?;
    let report = certify_with(cfg, &traj, &pair, cfg.diag.c)?;
    let mut body = String::new();
    let _ = writeln!(body, "# min_margin = {:.16e}", report.min_margin);
    let _ = writeln!(body, "# C = {:.16e}", report.c);
    let _ = writeln!(body, "# k = {:.16e}", report.k_coercivity);
    let _ = writeln!(body, "# theta_coefficient = {:.16e}", report.theta_coefficient);
    let _ = writeln!(body, "# initial_correction = {:.16e}", report.initial_correction);
    let _ = writeln!(body, "# tol = {:.16e}", cfg.diag.tol);
    body.push_str("t,E_rel,W,K,int_K,lhs,rhs,margin\n");
    for n in 0..report.times.len() {
        let cols = [
            report.times[n],
            report.e[n],
            report.w[n],
            report.k[n],
            report.integral_k[n],
            report.lhs[n],
            report.rhs[n],
            report.margin[n],
        ];
        let cols: Vec<String> = cols.iter().map(|x| format!("{x:.16e}")).collect();
        body.push_str(&cols.join(","));
        body.push('\n');
    }
    out.write_text("certify.csv", &body)?;
    println!("samples = {}", report.times.len());
    println!("min margin = {}", format_sig12(report.min_margin));
    if scan_c {
        for c in [1.0, 10.0, 100.0] {
            let r = certify_with(cfg, &traj, &pair, c)?;
            println!("C = {c}: min margin = {}", format_sig12(r.min_margin));
        }
    }
    if report.passes(cfg.diag.tol) {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::CertificationFailed { min_margin: report.min_margin, tol: cfg.diag.tol })
    }
}

struct Level {
    n: usize,
    grid: Grid,
    steps: usize,
    converged: bool,
    dxq: f64,
    el: f64,
    gap: f64,
}

fn steady(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    if cfg.init.random_velocity {
        return Err(CliError::Usage("steady runs the director gradient flow; set init.velocity = zero".into()));
    }
    let mut levels = Vec::new();
    for &n in &cfg.steady_levels {
        let grid = cfg.grid_with_nodes(n)?;
        let solver = cfg.solver_for(&grid);
        let (traj, converged) = match run_to_steady(cfg.initial_director(&grid)?, None, &cfg.frank, None, &solver) {
            Ok(t) => (t, true),
            Err(SolverError::NoConvergence { trajectory, .. }) => (*trajectory, false),
            Err(e) => return Err(e.into()),
        };
        let last = traj.last().expect("runs store their final state");
        let d = DirectorField::new(last.d.clone())?;
        let el = euler_lagrange_field(&d, &cfg.frank, solver.magnetic.as_ref());
        let gap = grid.integrate_with(|i| (el.values[i] - last.dxq.values[i]).norm_sq()).sqrt();
        levels.push(Level {
            n,
            grid,
            steps: traj.records.len() - 1,
            converged,
            dxq: last.dxq.l2_norm(),
            el: el.l2_norm(),
            gap,
        });
    }
    let mut table = String::from("n,h,steps,converged,dxq_L2,el_L2,gap_L2,gap_order\n");
    for (i, lv) in levels.iter().enumerate() {
        let h = lv.grid.min_spacing();
        let order = match i {
            0 => f64::NAN,
            _ => {
                let prev = &levels[i - 1];
                (prev.gap / lv.gap).ln() / (prev.grid.min_spacing() / h).ln()
            }
        };
        let _ = writeln!(
            table,
            "{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            lv.n, h, lv.steps, lv.converged, lv.dxq, lv.el, lv.gap, order
        );
        println!(
            "n = {:>4}  steps = {:>7}  ||d x q|| = {}  EL residual = {}  gap = {}  order = {}",
            lv.n,
            lv.steps,
            format_sig12(lv.dxq),
            format_sig12(lv.el),
            format_sig12(lv.gap),
            format_sig12(order)
        );
    }
    out.write_text("steady.txt", &table)?;
    match levels.iter().find(|l| !l.converged) {
        Some(l) => Err(CliError::NoConvergence(format!("level n = {} did not reach a steady state in {} steps", l.n, l.steps))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(1.5), "1.5");
        assert_eq!(format_sig12(19.739208802178716), "19.7392088022");
        assert_eq!(format_sig12(-2.5e-9), "-2.50000000000e-9");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::NoConvergence("x".into()).exit_code(), 3);
        assert_eq!(CliError::CertificationFailed { min_margin: -1.0, tol: 0.0 }.exit_code(), 4);
    }
}
