//! Time integrators: the projected gradient flow of the director, the
//! coupled director/velocity evolution on periodic boxes, and a driver that
//! runs either one to a steady state.

mod coupled;
mod gradient;

pub use coupled::{coupled_step, CoupledFlow};
pub use gradient::{gradient_flow_step, GradientFlow};

use thiserror::Error;

use crate::fields::{
    DirectorField, Field, FieldError, Grid, StepRecord, Trajectory, TrajectorySample, VelocityField,
};
use crate::frank::{density_with_derivatives, FrankConstants, MagneticParams};
use crate::leslie::{validate_coefficients, LeslieCoefficients, ValidationReport};
use crate::tensor::{cross_matrix, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `d ← normalize(d + dt·rate)`
    #[default]
    ProjectedExplicit,
    /// Rotation of `d` towards the rate by the angle `dt·|rate|`.
    RotationExponential,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ProjectedExplicit => "projected-explicit",
            Scheme::RotationExponential => "rotation-exponential",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "projected-explicit" => Some(Scheme::ProjectedExplicit),
            "rotation-exponential" => Some(Scheme::RotationExponential),
            _ => None,
        }
    }
}

/// Susceptibilities plus a time-constant applied field.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticSetup {
    pub params: MagneticParams,
    pub field: Field<Vec3>,
}

impl MagneticSetup {
    pub fn uniform(params: MagneticParams, grid: Grid, h: Vec3) -> Self {
        MagneticSetup { params, field: Field::constant(grid, h) }
    }

    pub(crate) fn pair(&self) -> (&MagneticParams, &Field<Vec3>) {
        (&self.params, &self.field)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Time step; half the stability bound when `None`.
    pub dt: Option<f64>,
    pub cfl_factor: f64,
    pub max_steps: usize,
    /// Threshold on `‖d×q‖` (and on `‖(∇v)_sym‖` for coupled runs).
    pub steady_tol: f64,
    pub scheme: Scheme,
    /// Time-constant body force.
    pub forcing: Option<Field<Vec3>>,
    pub magnetic: Option<MagneticSetup>,
    /// Field samples are stored at least every this many steps.
    pub sample_every: usize,
    /// Extra samples are stored whenever `(t − t_last)·|D − D_last|` exceeds
    /// this fraction of the initial total energy, `D` being the dissipation
    /// rate; keeps trapezoidal time integrals of the samples accurate through
    /// fast transients. Zero disables it.
    pub sample_error: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: None,
            cfl_factor: 1.0,
            max_steps: 100_000,
            steady_tol: 1e-6,
            scheme: Scheme::ProjectedExplicit,
            forcing: None,
            magnetic: None,
            sample_every: 10,
            sample_error: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, grid: &Grid) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad(format!("dt = {dt} must be positive"));
            }
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return bad(format!("cfl_factor = {} must lie in (0, 1]", self.cfl_factor));
        }
        if !(self.steady_tol.is_finite() && self.steady_tol > 0.0) {
            return bad(format!("steady_tol = {} must be positive", self.steady_tol));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.sample_error.is_finite() && self.sample_error >= 0.0) {
            return bad(format!("sample_error = {} must be nonnegative", self.sample_error));
        }
        if let Some(g) = &self.forcing {
            if g.grid != *grid {
                return Err(SolverError::Field(FieldError::GridMismatch));
            }
            if let Some(node) = g.first_nonfinite() {
                return Err(SolverError::NonFinite { node });
            }
        }
        if let Some(m) = &self.magnetic {
            if m.field.grid != *grid {
                return Err(SolverError::Field(FieldError::GridMismatch));
            }
            if let Some(node) = m.field.first_nonfinite() {
                return Err(SolverError::NonFinite { node });
            }
        }
        Ok(())
    }

    pub(crate) fn magnetic_pair(&self) -> Option<(&MagneticParams, &Field<Vec3>)> {
        self.magnetic.as_ref().map(MagneticSetup::pair)
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("invalid Leslie coefficients, {0}")]
    Coefficients(ValidationReport),
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no steady state after {steps} steps (|d x q| = {dxq_norm:e}, |(grad v)_sym| = {sym_grad_norm:e})")]
    NoConvergence { steps: usize, dxq_norm: f64, sym_grad_norm: f64, trajectory: Box<Trajectory> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Time after the step.
    pub time: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `dt·D_n` with `D_n` the dissipation rate of the old state.
    pub dissipation: f64,
    pub norm_drift: f64,
    /// Discrete divergence of the new velocity (zero for gradient flow).
    pub divergence_residual: f64,
}

/// Explicit stability estimate
/// `cfl·min(h²/(4(k1+k2+k3+k4+4k5) + μ-scale), 1/(2|χ|·|H|²), h/|v|)`.
pub fn stability_bound(
    grid: &Grid,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    magnetic: Option<&MagneticSetup>,
    max_speed: f64,
    cfl_factor: f64,
) -> f64 {
    let h = grid.min_spacing();
    let mu_scale = l.map_or(0.0, |l| {
        let [mu1, _, _, _, mu5, mu6] = l.mu;
        4.0 * (mu1.abs() + (mu5 + mu6).abs() + l.lambda * l.lambda + l.lambda.abs())
    });
    let stiff = 4.0 * c.stiffness() + mu_scale;
    let mut bound = if stiff > 0.0 { h * h / stiff } else { f64::INFINITY };
    if let Some(m) = magnetic {
        let hmax = m.field.max_norm();
        let chi = m.params.chi_par.abs() + m.params.chi_perp.abs();
        if hmax > 0.0 {
            bound = bound.min(1.0 / (2.0 * chi * hmax * hmax));
        }
    }
    if max_speed > 0.0 {
        bound = bound.min(h / max_speed);
    }
    cfl_factor * bound
}

pub(crate) fn resolve_dt(cfg: &SolverConfig, bound: f64) -> Result<f64, SolverError> {
    match cfg.dt {
        Some(dt) if dt > bound => Err(SolverError::CflViolation { dt, bound }),
        Some(dt) => Ok(dt),
        None if bound.is_finite() => Ok(0.5 * bound),
        None => Err(SolverError::InvalidConfig("no stability bound applies; set dt explicitly".into())),
    }
}

pub(crate) fn check_coefficients(l: &LeslieCoefficients) -> Result<(), SolverError> {
    let report = validate_coefficients(l);
    if report.is_valid() {
        Ok(())
    } else {
        Err(SolverError::Coefficients(report))
    }
}

/// Moves every interior node along its tangential rate. Boundary nodes of a
/// Dirichlet grid are copied unchanged.
pub(crate) fn advance_director(
    d: &DirectorField,
    rate: &[Vec3],
    dt: f64,
    scheme: Scheme,
) -> Result<DirectorField, SolverError> {
    let grid = *d.grid();
    let dv = d.values();
    let values = grid.map_nodes(|i| {
        if grid.is_boundary(i) {
            return dv[i];
        }
        let r = rate[i];
        match scheme {
            Scheme::ProjectedExplicit => (dv[i] + r * dt).normalized(),
            Scheme::RotationExponential => {
                let speed = r.norm();
                if speed == 0.0 {
                    return dv[i];
                }
                let (s, c) = (dt * speed).sin_cos();
                (dv[i] * c + r * (s / speed)).normalized()
            }
        }
    });
    let field = Field { grid, values };
    if let Some(node) = field.first_nonfinite() {
        return Err(SolverError::NonFinite { node });
    }
    Ok(DirectorField::from_trusted(field))
}

/// `d × q` with `q` the solver's variational derivative.
pub(crate) fn cross_field(grid: &Grid, d: &[Vec3], q: &[Vec3]) -> Field<Vec3> {
    Field { grid: *grid, values: grid.map_nodes(|i| d[i].cross(q[i])) }
}

/// Common interface of the two integrators used by [`run_to_steady`].
pub(crate) trait Integrator {
    fn dt(&self) -> f64;
    fn record(&self) -> StepRecord;
    fn sample(&self) -> TrajectorySample;
    fn advance(&mut self) -> Result<StepReport, SolverError>;
    fn coupled(&self) -> bool;
}

/// Runs the gradient flow (no velocity and no Leslie coefficients) or the
/// coupled system until `‖d×q‖` and, for coupled runs, `‖(∇v)_sym‖` fall to
/// `steady_tol`. A velocity without coefficients is a configuration error;
/// coefficients without a velocity start the coupled run at rest.
pub fn run_to_steady(
    d: DirectorField,
    v: Option<VelocityField>,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    match (v, l) {
        (Some(_), None) => Err(SolverError::InvalidConfig("a velocity field needs Leslie coefficients".into())),
        (None, None) => drive(GradientFlow::new(d, c, cfg)?, cfg),
        (v, Some(l)) => {
            let v = v.unwrap_or_else(|| VelocityField::zeros(*d.grid()));
            drive(CoupledFlow::new(v, d, c, l, cfg)?, cfg)
        }
    }
}

fn drive(mut it: impl Integrator, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    let mut traj = Trajectory::new(it.sample().d.grid, it.dt());
    let converged = |r: &StepRecord, coupled: bool| {
        r.dxq_norm <= cfg.steady_tol && (!coupled || r.sym_grad_norm <= cfg.steady_tol)
    };
    let mut steps = 0;
    let mut record = it.record();
    traj.records.push(record);
    traj.samples.push(it.sample());
    let mut last_sampled = 0;
    let mut last = record;
    let budget = cfg.sample_error * record.total().abs();
    while !converged(&record, it.coupled()) {
        if steps == cfg.max_steps {
            if last_sampled != steps {
                traj.samples.push(it.sample());
            }
            return Err(SolverError::NoConvergence {
                steps,
                dxq_norm: record.dxq_norm,
                sym_grad_norm: record.sym_grad_norm,
                trajectory: Box::new(traj),
            });
        }
        it.advance()?;
        steps += 1;
        record = it.record();
        traj.records.push(record);
        let drift = (record.time - last.time) * (record.dissipation - last.dissipation).abs();
        if steps % cfg.sample_every == 0 || (budget > 0.0 && drift > budget) {
            traj.samples.push(it.sample());
            last_sampled = steps;
            last = record;
        }
    }
    if last_sampled != steps {
        traj.samples.push(it.sample());
    }
    traj.converged = true;
    Ok(traj)
}

/// Strong-form Euler-Lagrange residual field
/// `−div(d×F_S) + Σ_j ∂_j d × (F_S)_{:,j} + d×F_h` with central differences.
/// Zero on Dirichlet boundary nodes.
pub fn euler_lagrange_field(d: &DirectorField, c: &FrankConstants, magnetic: Option<&MagneticSetup>) -> Field<Vec3> {
    let grid = *d.grid();
    let dv = d.values();
    let parts: Vec<(Mat3, Vec3)> = grid.map_nodes(|i| {
        let g = grid.grad_at(dv, i);
        let (_, fs, fh) = density_with_derivatives(dv[i], &g, c);
        let mut local = dv[i].cross(fh);
        for j in 0..3 {
            local += g.col(j).cross(fs.col(j));
        }
        (cross_matrix(dv[i]).matmul(&fs), local)
    });
    let flux: Vec<Mat3> = parts.iter().map(|p| p.0).collect();
    let values = grid.map_nodes(|i| {
        if grid.is_boundary(i) {
            return Vec3::ZERO;
        }
        let mut div = Vec3::ZERO;
        for j in 0..3 {
            div += grid.d1(&flux, i, j).col(j);
        }
        let mut r = parts[i].1 - div;
        if let Some(m) = magnetic {
            r += dv[i].cross(m.params.q_addition(dv[i], m.field.values[i]));
        }
        r
    });
    Field { grid, values }
}

/// `‖d×q‖_L2` through the strong-form expansion.
pub fn euler_lagrange_residual(d: &DirectorField, c: &FrankConstants) -> f64 {
    euler_lagrange_field(d, c, None).l2_norm()
}
