//! Flat `section.key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, vectors are three numbers
//! separated by spaces or commas. Unknown and repeated keys are errors.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fields::{
    helix_director, random_divfree_velocity, random_unit_director_with, DirectorField, DirectorInit, DomainKind, Field,
    FieldError, Grid, VelocityField,
};
use crate::frank::{FrankConstants, MagneticParams};
use crate::leslie::{validate_coefficients, LeslieCoefficients};
use crate::solvers::{MagneticSetup, Scheme, SolverConfig};
use crate::tensor::Vec3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

const KEYS: &[&str] = &[
    "seed",
    "grid.n",
    "grid.nx",
    "grid.ny",
    "grid.nz",
    "grid.length",
    "grid.lx",
    "grid.ly",
    "grid.lz",
    "grid.domain",
    "frank.K1",
    "frank.K2",
    "frank.K3",
    "leslie.mu1",
    "leslie.mu2",
    "leslie.mu3",
    "leslie.mu4",
    "leslie.mu5",
    "leslie.mu6",
    "leslie.lambda",
    "magnetic.chi_par",
    "magnetic.chi_perp",
    "magnetic.H",
    "forcing.g",
    "solver.dt",
    "solver.cfl",
    "solver.max_steps",
    "solver.steady_tol",
    "solver.scheme",
    "solver.sample_every",
    "solver.sample_error",
    "init.director",
    "init.mean",
    "init.amplitude",
    "init.modes",
    "init.smoothness",
    "init.boundary",
    "init.taper",
    "init.velocity",
    "init.velocity_scale",
    "diag.C",
    "diag.k",
    "diag.tol",
    "diag.theta_coefficient",
    "diag.pair",
    "diag.pair_director",
    "diag.pair_field",
    "steady.levels",
];

pub fn is_known_key(key: &str) -> bool {
    KEYS.contains(&key)
}

/// Splits config text into entries, rejecting unknown and duplicate keys.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, found `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(ConfigError::Syntax { line, message: format!("`{key}` has no value") });
        }
        if !is_known_key(key) {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.to_string() });
        }
    }
    Ok(out)
}

struct Entries<'a>(&'a BTreeMap<String, String>);

impl Entries<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|s| s.parse().map_err(|_| invalid(key, format!("`{s}` is not {what}"))))
            .transpose()
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.parse::<f64>(key, "a number")? {
            Some(x) if !x.is_finite() => Err(invalid(key, "must be finite")),
            x => Ok(x),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.real(key)? {
            Some(x) if x <= 0.0 => Err(invalid(key, format!("{x} must be > 0"))),
            x => Ok(x),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse(key, "a nonnegative integer")
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse(key, "true or false")
    }

    fn vector(&self, key: &str) -> Result<Option<Vec3>, ConfigError> {
        let Some(s) = self.raw(key) else { return Ok(None) };
        let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
        let xs: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).filter(|x: &f64| x.is_finite()).collect();
        if parts.len() != 3 || xs.len() != 3 {
            return Err(invalid(key, format!("`{s}` is not a vector of three finite numbers")));
        }
        Ok(Some(Vec3([xs[0], xs[1], xs[2]])))
    }

    fn unit(&self, key: &str) -> Result<Option<Vec3>, ConfigError> {
        match self.vector(key)? {
            Some(d) if (d.norm() - 1.0).abs() > crate::fields::UNIT_TOL => {
                Err(invalid(key, format!("|d| = {} but a unit vector is required", d.norm())))
            }
            d => Ok(d),
        }
    }

    fn any_with(&self, prefix: &str) -> bool {
        self.0.keys().any(|k| k.starts_with(prefix))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectorKind {
    Random,
    Uniform,
    Helix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpec {
    pub director: DirectorKind,
    pub mean: Option<Vec3>,
    pub amplitude: f64,
    pub modes: i32,
    pub smoothness: f64,
    /// Wall value on Dirichlet grids.
    pub boundary: Option<Vec3>,
    pub taper: bool,
    pub random_velocity: bool,
    pub velocity_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairChoice {
    /// The trajectory compared with itself.
    Own,
    /// `(0, d₀)` with constant `d₀`.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagSpec {
    pub c: f64,
    pub k: Option<f64>,
    pub tol: f64,
    pub theta_coefficient: Option<f64>,
    pub pair: PairChoice,
    pub pair_director: Option<Vec3>,
    pub pair_field: Option<Vec3>,
}

/// Validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub domain: DomainKind,
    pub grid: Grid,
    pub frank: FrankConstants,
    pub leslie: Option<LeslieCoefficients>,
    /// Susceptibilities and the uniform applied field.
    pub magnetic: Option<(MagneticParams, Vec3)>,
    /// Uniform body force.
    pub forcing: Option<Vec3>,
    /// Solver settings without the grid-dependent forcing and field.
    pub solver: SolverConfig,
    pub init: InitSpec,
    pub seed: u64,
    pub diag: DiagSpec,
    pub steady_levels: Vec<usize>,
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_entries(parse_entries(text)?)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        for key in entries.keys() {
            if !is_known_key(key) {
                return Err(invalid(key, "unknown key"));
            }
        }
        let e = Entries(&entries);

        let domain = match e.raw("grid.domain") {
            None => DomainKind::Periodic,
            Some(s) => DomainKind::parse(s).ok_or_else(|| invalid("grid.domain", format!("`{s}` is not periodic or dirichlet")))?,
        };
        let n = e.count("grid.n")?.unwrap_or(16);
        let dims = [
            e.count("grid.nx")?.unwrap_or(n),
            e.count("grid.ny")?.unwrap_or(n),
            e.count("grid.nz")?.unwrap_or(n),
        ];
        let length = e.positive("grid.length")?.unwrap_or(1.0);
        let lengths = [
            e.positive("grid.lx")?.unwrap_or(length),
            e.positive("grid.ly")?.unwrap_or(length),
            e.positive("grid.lz")?.unwrap_or(length),
        ];
        let grid = grid_for(dims, lengths, domain).map_err(|err| invalid("grid", err))?;

        let k = |name: &str| e.real(name).map(|x| x.unwrap_or(1.0));
        let frank = FrankConstants::new(k("frank.K1")?, k("frank.K2")?, k("frank.K3")?).map_err(|err| invalid("frank", err))?;

        let leslie = if e.any_with("leslie.") {
            let mut mu = [0.0; 6];
            for (i, m) in mu.iter_mut().enumerate() {
                let key = format!("leslie.mu{}", i + 1);
                *m = e.real(&key)?.ok_or_else(|| invalid(&key, "required when any leslie.* key is given"))?;
            }
            let lambda = e.real("leslie.lambda")?.ok_or_else(|| invalid("leslie.lambda", "required when any leslie.* key is given"))?;
            let l = LeslieCoefficients::new(mu, lambda);
            let report = validate_coefficients(&l);
            if !report.is_valid() {
                return Err(invalid("leslie", report));
            }
            Some(l)
        } else {
            None
        };

        let magnetic = if e.any_with("magnetic.") {
            let need = |key: &str| invalid(key, "required when any magnetic.* key is given");
            let chi_par = e.real("magnetic.chi_par")?.ok_or_else(|| need("magnetic.chi_par"))?;
            let chi_perp = e.real("magnetic.chi_perp")?.ok_or_else(|| need("magnetic.chi_perp"))?;
            let h = e.vector("magnetic.H")?.ok_or_else(|| need("magnetic.H"))?;
            let m = MagneticParams::new(chi_par, chi_perp).map_err(|err| invalid("magnetic", err))?;
            Some((m, h))
        } else {
            None
        };
        let forcing = e.vector("forcing.g")?;

        let defaults = SolverConfig::default();
        let scheme = match e.raw("solver.scheme") {
            None => defaults.scheme,
            Some(s) => Scheme::parse(s)
                .ok_or_else(|| invalid("solver.scheme", format!("`{s}` is not projected-explicit or rotation-exponential")))?,
        };
        let solver = SolverConfig {
            dt: e.positive("solver.dt")?,
            cfl_factor: e.real("solver.cfl")?.unwrap_or(defaults.cfl_factor),
            max_steps: e.count("solver.max_steps")?.unwrap_or(defaults.max_steps),
            steady_tol: e.real("solver.steady_tol")?.unwrap_or(defaults.steady_tol),
            scheme,
            forcing: None,
            magnetic: None,
            sample_every: e.count("solver.sample_every")?.unwrap_or(defaults.sample_every),
            sample_error: e.real("solver.sample_error")?.unwrap_or(defaults.sample_error),
        };
        solver.validate(&grid).map_err(|err| invalid("solver", err))?;

        let director = match e.raw("init.director").unwrap_or("random") {
            "random" => DirectorKind::Random,
            "uniform" => DirectorKind::Uniform,
            "helix" => DirectorKind::Helix,
            s => return Err(invalid("init.director", format!("`{s}` is not random, uniform or helix"))),
        };
        let mean = match e.vector("init.mean")? {
            Some(m) if m.norm() == 0.0 => return Err(invalid("init.mean", "must be nonzero")),
            m => m.map(Vec3::normalized),
        };
        let base = DirectorInit::default();
        let amplitude = e.real("init.amplitude")?.unwrap_or(base.amplitude);
        if !(0.0..1.0).contains(&amplitude) {
            return Err(invalid("init.amplitude", format!("{amplitude} must lie in [0, 1)")));
        }
        let modes = e.count("init.modes")?.unwrap_or(base.modes as usize);
        if !(1..=16).contains(&modes) {
            return Err(invalid("init.modes", format!("{modes} must lie in 1..=16")));
        }
        let random_velocity = match e.raw("init.velocity").unwrap_or("zero") {
            "zero" => false,
            "random" => true,
            s => return Err(invalid("init.velocity", format!("`{s}` is not zero or random"))),
        };
        let init = InitSpec {
            director,
            mean,
            amplitude,
            modes: modes as i32,
            smoothness: e.real("init.smoothness")?.unwrap_or(1.0),
            boundary: e.unit("init.boundary")?,
            taper: e.flag("init.taper")?.unwrap_or(false),
            random_velocity,
            velocity_scale: e.real("init.velocity_scale")?.unwrap_or(1.0),
        };
        if init.boundary.is_some() && domain != DomainKind::Dirichlet {
            return Err(invalid("init.boundary", "only applies to dirichlet grids"));
        }

        let pair = match e.raw("diag.pair").unwrap_or("constant") {
            "self" => PairChoice::Own,
            "constant" => PairChoice::Constant,
            s => return Err(invalid("diag.pair", format!("`{s}` is not self or constant"))),
        };
        let diag = DiagSpec {
            c: e.positive("diag.C")?.unwrap_or(1.0),
            k: e.positive("diag.k")?,
            tol: e.real("diag.tol")?.unwrap_or(1e-3),
            theta_coefficient: e.real("diag.theta_coefficient")?,
            pair,
            pair_director: e.unit("diag.pair_director")?,
            pair_field: e.vector("diag.pair_field")?,
        };
        if diag.tol < 0.0 {
            return Err(invalid("diag.tol", format!("{} must be >= 0", diag.tol)));
        }
        if diag.theta_coefficient.is_some_and(|t| t < 0.0) {
            return Err(invalid("diag.theta_coefficient", "must be >= 0"));
        }
        if diag.pair_field.is_some() && magnetic.is_none() {
            return Err(invalid("diag.pair_field", "needs the magnetic.* section"));
        }

        let steady_levels = match e.raw("steady.levels") {
            None => vec![8, 12, 16],
            Some(s) => s
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|p| !p.is_empty())
                .map(|p| match p.parse::<usize>() {
                    Ok(n) if n >= 4 => Ok(n),
                    _ => Err(invalid("steady.levels", format!("`{p}` is not a node count >= 4"))),
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        if steady_levels.is_empty() {
            return Err(invalid("steady.levels", "needs at least one level"));
        }

        Ok(RunConfig {
            dims,
            lengths,
            domain,
            grid,
            frank,
            leslie,
            magnetic,
            forcing,
            solver,
            init,
            seed: e.parse("seed", "a nonnegative integer")?.unwrap_or(0),
            diag,
            steady_levels,
            entries,
        })
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    /// Grid with `n` nodes per axis and the configured lengths and domain.
    pub fn grid_with_nodes(&self, n: usize) -> Result<Grid, FieldError> {
        grid_for([n; 3], self.lengths, self.domain)
    }

    pub fn magnetic_setup(&self, grid: &Grid) -> Option<MagneticSetup> {
        self.magnetic.map(|(m, h)| MagneticSetup::uniform(m, *grid, h))
    }

    /// Solver settings with the forcing and applied field sampled on `grid`.
    pub fn solver_for(&self, grid: &Grid) -> SolverConfig {
        SolverConfig {
            forcing: self.forcing.map(|g| Field::constant(*grid, g)),
            magnetic: self.magnetic_setup(grid),
            ..self.solver.clone()
        }
    }

    pub fn initial_director(&self, grid: &Grid) -> Result<DirectorField, FieldError> {
        let s = &self.init;
        let d = match s.director {
            DirectorKind::Random => {
                let opts = DirectorInit { mean: s.mean, amplitude: s.amplitude, modes: s.modes, taper: s.taper };
                random_unit_director_with(grid, self.seed, s.smoothness, opts)
            }
            DirectorKind::Uniform => DirectorField::uniform(*grid, s.mean.unwrap_or(Vec3::e(2)))?,
            DirectorKind::Helix => helix_director(grid)?,
        };
        match s.boundary {
            Some(b) if grid.kind == DomainKind::Dirichlet => d.with_boundary_value(b),
            _ => Ok(d),
        }
    }

    /// Random divergence-free start when configured; the seed is offset so
    /// that it differs from the director's stream.
    pub fn initial_velocity(&self, grid: &Grid) -> Option<VelocityField> {
        if !self.init.random_velocity {
            return None;
        }
        let v = random_divfree_velocity(grid, self.seed.wrapping_add(1), self.init.smoothness);
        let scale = self.init.velocity_scale;
        Some(VelocityField::from_trusted(v.into_field().map(|x| *x * scale)))
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_entries(BTreeMap::new()).expect("defaults are valid")
    }
}

fn grid_for(dims: [usize; 3], lengths: [f64; 3], domain: DomainKind) -> Result<Grid, FieldError> {
    let mut spacing = [0.0; 3];
    for a in 0..3 {
        let cells = match domain {
            DomainKind::Periodic => dims[a],
            DomainKind::Dirichlet => dims[a].saturating_sub(1).max(1),
        };
        spacing[a] = lengths[a] / cells as f64;
    }
    Grid::new(dims, spacing, domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.grid, Grid::cube(16, 1.0, DomainKind::Periodic).unwrap());
        assert!(c.leslie.is_none() && c.magnetic.is_none());
        assert_eq!(c.diag.c, 1.0);
        assert!(c.echo().is_empty());
    }

    #[test]
    fn entries_and_echo() {
        let text = "grid.n = 8 # nodes\ngrid.domain=dirichlet\ninit.boundary = 0, 0, 1\nfrank.K2 = 0.5\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.grid, Grid::cube(8, 1.0, DomainKind::Dirichlet).unwrap());
        assert_eq!(c.frank.moduli(), [1.0, 0.5, 1.0]);
        assert_eq!(c.init.boundary, Some(Vec3::e(2)));
        assert_eq!(c.echo(), vec!["frank.K2 = 0.5", "grid.domain = dirichlet", "grid.n = 8", "init.boundary = 0, 0, 1"]);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = RunConfig::parse("grid.n = 8\nfrank.K4 = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }), "{err}");
        let err = RunConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { line: 2, .. }), "{err}");
        assert!(RunConfig::parse("seed 1\n").is_err());
    }

    #[test]
    fn module_constraints_are_checked() {
        let leslie = "leslie.mu1 = 1\nleslie.mu2 = 0.3\nleslie.mu3 = 0.2\nleslie.mu5 = 1\nleslie.mu6 = 1\nleslie.lambda = 0.5\n";
        let err = RunConfig::parse(&format!("{leslie}leslie.mu4 = 0\n")).unwrap_err();
        assert!(err.to_string().contains("μ4 > 0"), "{err}");
        assert!(RunConfig::parse(&format!("{leslie}leslie.mu4 = 2\n")).unwrap().leslie.is_some());
        let err = RunConfig::parse(leslie).unwrap_err();
        assert!(err.to_string().contains("leslie.mu4"), "{err}");
        assert!(RunConfig::parse("frank.K1 = -1\n").is_err());
        assert!(RunConfig::parse("magnetic.chi_par = 1\nmagnetic.chi_perp = -2\nmagnetic.H = 0 0 1\n").is_err());
        assert!(RunConfig::parse("magnetic.chi_par = -1\n").is_err());
        assert!(RunConfig::parse("grid.n = 3\n").is_err());
        assert!(RunConfig::parse("solver.sample_every = 0\n").is_err());
        assert!(RunConfig::parse("init.boundary = 0 0 2\ngrid.domain = dirichlet\n").is_err());
        assert!(RunConfig::parse("diag.C = 0\n").is_err());
        assert!(RunConfig::parse("init.amplitude = 1\n").is_err());
    }

    #[test]
    fn initial_data_is_seeded() {
        let c = RunConfig::parse("grid.n = 6\nseed = 4\ninit.velocity = random\ninit.velocity_scale = 0.5\n").unwrap();
        let g = c.grid;
        assert_eq!(c.initial_director(&g).unwrap(), c.initial_director(&g).unwrap());
        let v = c.initial_velocity(&g).unwrap();
        let rms = (v.field().l2_norm_sq() / g.volume()).sqrt();
        assert!((rms - 0.5).abs() < 1e-12);
    }
}
