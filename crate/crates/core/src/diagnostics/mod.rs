//! Relative energy, relative dissipation, the potential `K`, the residual
//! operator `A`, and inequality checks along stored trajectories.

mod checks;
mod functionals;

pub use checks::{
    dissipative_inequality_check, energy_inequality_check, energy_inequality_from_records,
    magnetic_inequality_check, shifted_energy_equality_check, CertifyOptions, EnergyReport,
    RelativeEnergyReport, ShiftedEnergyReport,
};
pub use functionals::{
    magnetic_coupling_vector, magnetic_relative_energy, operator_a, potential_k, relative_dissipation,
    relative_energy, relative_energy_parts, PairNorms,
};

use thiserror::Error;

use crate::fields::{DirectorField, Field, FieldError, Grid, Trajectory, VelocityField, UNIT_TOL};
use crate::frank::{compact_variational_derivative, FrankConstants};
use crate::solvers::MagneticSetup;
use crate::tensor::Vec3;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("pair sample times do not match the trajectory (sample {index}: {expected} vs {found})")]
    MisalignedTimes { index: usize, expected: f64, found: f64 },
    #[error("test pair lacks required derivatives: {0}")]
    InsufficientRegularity(String),
    #[error("relative energy forms disagree: tensor {tensor:e}, expanded {expanded:e}")]
    FormMismatch { tensor: f64, expanded: f64 },
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error("test director is not unit length (|d| = {norm})")]
    NonUnitPair { norm: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A test pair at one time: `ṽ`, `d̃`, their time derivatives, `q̃` and
/// `d̃×q̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairState {
    pub time: f64,
    pub v: Field<Vec3>,
    pub d: Field<Vec3>,
    pub dt_v: Field<Vec3>,
    pub dt_d: Field<Vec3>,
    pub q: Field<Vec3>,
    pub dxq: Field<Vec3>,
}

#[derive(Clone, Debug, PartialEq)]
enum PairKind {
    Constant { d: Vec3 },
    Stationary { v: Field<Vec3>, d: Field<Vec3> },
    Sampled { states: Vec<PairState> },
}

/// Test functions `(ṽ, d̃)` compared against a trajectory, with an optional
/// time-constant applied field `H̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestPair {
    kind: PairKind,
    field: Option<MagneticSetup>,
}

impl TestPair {
    /// `(0, d₀)` with constant unit `d₀`.
    pub fn constant(d: Vec3) -> Result<Self, DiagnosticsError> {
        let norm = d.norm();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(DiagnosticsError::NonUnitPair { norm });
        }
        Ok(TestPair { kind: PairKind::Constant { d }, field: None })
    }

    /// Time-independent sampled pair.
    pub fn stationary(v: VelocityField, d: DirectorField) -> Result<Self, DiagnosticsError> {
        if v.grid() != d.grid() {
            return Err(DiagnosticsError::GridMismatch);
        }
        Ok(TestPair { kind: PairKind::Stationary { v: v.into_field(), d: d.into_field() }, field: None })
    }

    /// The trajectory's own states. Time derivatives are finite differences
    /// between samples; `q̃` is the tangential part recovered from the stored
    /// `d×q`.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, DiagnosticsError> {
        let s = &traj.samples;
        if s.len() < 2 {
            return Err(DiagnosticsError::InsufficientRegularity(
                "time derivatives need at least two samples".into(),
            ));
        }
        let grid = traj.grid;
        let n = s.len();
        let diff = |a: &Field<Vec3>, b: &Field<Vec3>, dt: f64| Field {
            grid,
            values: a.values.iter().zip(&b.values).map(|(x, y)| (*x - *y) * (1.0 / dt)).collect(),
        };
        let states = (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let span = s[hi].time - s[lo].time;
                let q = Field {
                    grid,
                    values: s[i].d.values.iter().zip(&s[i].dxq.values).map(|(d, x)| -d.cross(*x)).collect(),
                };
                PairState {
                    time: s[i].time,
                    v: s[i].v.clone(),
                    d: s[i].d.clone(),
                    dt_v: diff(&s[hi].v, &s[lo].v, span),
                    dt_d: diff(&s[hi].d, &s[lo].d, span),
                    q,
                    dxq: s[i].dxq.clone(),
                }
            })
            .collect();
        Ok(TestPair { kind: PairKind::Sampled { states }, field: None })
    }

    /// Attaches the pair's applied field `H̃`.
    pub fn with_field(mut self, field: MagneticSetup) -> Self {
        self.field = Some(field);
        self
    }

    pub fn field(&self) -> Option<&MagneticSetup> {
        self.field.as_ref()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, PairKind::Constant { .. })
    }

    /// Pair at sample `index` (time `time`) of a trajectory on `grid`.
    pub fn state(&self, index: usize, time: f64, grid: &Grid, c: &FrankConstants) -> Result<PairState, DiagnosticsError> {
        let magnetic = self.field.as_ref().map(|m| (&m.params, &m.field));
        if let Some(m) = &self.field {
            if m.field.grid != *grid {
                return Err(DiagnosticsError::GridMismatch);
            }
        }
        let zeros = Field::zeros(*grid);
        let with_dxq = |mut st: PairState| {
            st.dxq = Field { grid: *grid, values: st.d.values.iter().zip(&st.q.values).map(|(d, q)| d.cross(*q)).collect() };
            st
        };
        match &self.kind {
            PairKind::Constant { d } => {
                let q = match magnetic {
                    Some((m, h)) => h.map(|hv| m.q_addition(*d, *hv)),
                    None => zeros.clone(),
                };
                Ok(with_dxq(PairState {
                    time,
                    v: zeros.clone(),
                    d: Field::constant(*grid, *d),
                    dt_v: zeros.clone(),
                    dt_d: zeros.clone(),
                    q,
                    dxq: zeros,
                }))
            }
            PairKind::Stationary { v, d } => {
                if v.grid != *grid {
                    return Err(DiagnosticsError::GridMismatch);
                }
                let q = compact_variational_derivative(&DirectorField::from_trusted(d.clone()), c, magnetic);
                Ok(with_dxq(PairState {
                    time,
                    v: v.clone(),
                    d: d.clone(),
                    dt_v: zeros.clone(),
                    dt_d: zeros.clone(),
                    q,
                    dxq: zeros,
                }))
            }
            PairKind::Sampled { states } => {
                let st = states.get(index).ok_or(DiagnosticsError::MisalignedTimes {
                    index,
                    expected: time,
                    found: f64::NAN,
                })?;
                if st.v.grid != *grid {
                    return Err(DiagnosticsError::GridMismatch);
                }
                if (st.time - time).abs() > 1e-12 * (1.0 + time.abs()) {
                    return Err(DiagnosticsError::MisalignedTimes { index, expected: time, found: st.time });
                }
                Ok(st.clone())
            }
        }
    }

    /// `sup_t ‖∇d̃ ⊗ d̃‖_∞` over every state of the pair.
    pub fn gradient_sup(&self, grid: &Grid) -> f64 {
        let sup = |d: &Field<Vec3>| {
            let g = d.grid;
            g.map_nodes(|i| g.grad_at(&d.values, i).norm_sq().sqrt() * d.values[i].norm())
                .into_iter()
                .fold(0.0, f64::max)
        };
        match &self.kind {
            PairKind::Constant { .. } => 0.0,
            PairKind::Stationary { d, .. } => {
                debug_assert_eq!(d.grid, *grid);
                sup(d)
            }
            PairKind::Sampled { states } => states.iter().map(|s| sup(&s.d)).fold(0.0, f64::max),
        }
    }
}
