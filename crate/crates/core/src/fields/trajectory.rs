//! Time-stamped field samples plus per-step scalar records.

use super::{FieldError, Grid, Snapshot};
use crate::fields::Field;
use crate::tensor::Vec3;

/// Fields at one sample time. `v` is zero for gradient-flow runs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub d: Field<Vec3>,
    pub v: Field<Vec3>,
    pub dxq: Field<Vec3>,
}

/// Scalar record of one state along a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub elastic: f64,
    pub magnetic: f64,
    pub kinetic: f64,
    /// Dissipation rate of the state (viscous terms plus `‖d×q‖²`).
    pub dissipation: f64,
    /// `(g, v)`.
    pub forcing_power: f64,
    pub dxq_norm: f64,
    pub sym_grad_norm: f64,
}

impl StepRecord {
    pub fn total(&self) -> f64 {
        self.elastic + self.magnetic + self.kinetic
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    pub records: Vec<StepRecord>,
    pub converged: bool,
}

impl Trajectory {
    pub fn new(grid: Grid, dt: f64) -> Self {
        Trajectory { grid, dt, samples: Vec::new(), records: Vec::new(), converged: false }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    pub fn to_snapshots(&self, provenance: &[String]) -> Vec<Snapshot> {
        self.samples
            .iter()
            .map(|s| Snapshot {
                grid: self.grid,
                time: s.time,
                d: s.d.clone(),
                v: Some(s.v.clone()),
                dxq: Some(s.dxq.clone()),
                provenance: provenance.to_vec(),
            })
            .collect()
    }

    /// Rebuilds the sampled part from snapshot records; `dxq` is required and
    /// a missing velocity is read as zero. Scalar records are left empty.
    pub fn from_snapshots(snaps: Vec<Snapshot>) -> Result<Self, FieldError> {
        let first = snaps.first().ok_or_else(|| FieldError::Malformed { offset: 0, message: "empty trajectory".into() })?;
        let grid = first.grid;
        let mut samples = Vec::with_capacity(snaps.len());
        for s in snaps {
            if s.grid != grid {
                return Err(FieldError::GridMismatch);
            }
            let dxq = s.dxq.ok_or_else(|| FieldError::Malformed { offset: 0, message: "missing section `dxq`".into() })?;
            let v = s.v.unwrap_or_else(|| Field::zeros(grid));
            samples.push(TrajectorySample { time: s.time, d: s.d, v, dxq });
        }
        let dt = if samples.len() > 1 { samples[1].time - samples[0].time } else { 0.0 };
        Ok(Trajectory { grid, dt, samples, records: Vec::new(), converged: false })
    }
}
