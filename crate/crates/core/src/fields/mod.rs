//! Grid-sampled fields on a box, finite-difference operators, the spectral
//! Leray projection, random initial data and snapshot I/O.

mod io;
mod ops;
mod random;
mod spectral;
mod trajectory;

pub use io::{
    format_timeseries, parse_records, read_snapshot, read_trajectory_file, write_snapshot, write_timeseries, write_trajectory_file, Snapshot, TimeSeriesRow,
    SNAPSHOT_MAGIC, TIMESERIES_HEADER,
};
pub use ops::{curl, div, div_mat, grad, grad_scalar, hessian};
pub use random::{
    helix_director, random_divfree_velocity, random_unit_director, random_unit_director_with,
    DirectorInit,
};
pub use spectral::{leray_project, Spectral};
pub use trajectory::{StepRecord, Trajectory, TrajectorySample};

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use thiserror::Error;

use crate::tensor::{Mat3, Tensor3, Vec3};

/// Tolerance on `| |d| − 1 |` for a valid director node.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("director is not unit length at node {node} (|d| = {norm})")]
    NonUnitDirector { node: usize, norm: f64 },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("operation requires a periodic domain")]
    UnsupportedDomain,
    #[error("value count {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Periodic,
    Dirichlet,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Periodic => "periodic",
            DomainKind::Dirichlet => "dirichlet",
        }
    }

    pub fn parse(s: &str) -> Option<DomainKind> {
        match s {
            "periodic" => Some(DomainKind::Periodic),
            "dirichlet" => Some(DomainKind::Dirichlet),
            _ => None,
        }
    }
}

/// Uniform box grid. Periodic nodes sit at cell centres `(i+½)h` with
/// `L = n h`; Dirichlet nodes sit at `i h` including both walls, `L = (n−1) h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub kind: DomainKind,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], kind: DomainKind) -> Result<Grid, FieldError> {
        for a in 0..3 {
            if dims[a] < 4 {
                return Err(FieldError::InvalidGrid(format!("dims[{a}] = {} < 4", dims[a])));
            }
            if !(spacing[a].is_finite() && spacing[a] > 0.0) {
                return Err(FieldError::InvalidGrid(format!("spacing[{a}] = {} must be positive", spacing[a])));
            }
        }
        Ok(Grid { dims, spacing, kind })
    }

    /// Cube with `n` nodes per axis and edge length `length`.
    pub fn cube(n: usize, length: f64, kind: DomainKind) -> Result<Grid, FieldError> {
        let cells = match kind {
            DomainKind::Periodic => n,
            DomainKind::Dirichlet => n.saturating_sub(1).max(1),
        };
        let h = length / cells as f64;
        Grid::new([n; 3], [h; 3], kind)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [1, self.dims[0], self.dims[0] * self.dims[1]]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn lengths(&self) -> [f64; 3] {
        let mut l = [0.0; 3];
        for a in 0..3 {
            let cells = match self.kind {
                DomainKind::Periodic => self.dims[a],
                DomainKind::Dirichlet => self.dims[a] - 1,
            };
            l[a] = cells as f64 * self.spacing[a];
        }
        l
    }

    pub fn volume(&self) -> f64 {
        let l = self.lengths();
        l[0] * l[1] * l[2]
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let off = match self.kind {
            DomainKind::Periodic => 0.5,
            DomainKind::Dirichlet => 0.0,
        };
        Vec3([
            (c[0] as f64 + off) * self.spacing[0],
            (c[1] as f64 + off) * self.spacing[1],
            (c[2] as f64 + off) * self.spacing[2],
        ])
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        if self.kind == DomainKind::Periodic {
            return false;
        }
        let c = self.coords(idx);
        (0..3).any(|a| c[a] == 0 || c[a] == self.dims[a] - 1)
    }

    /// Quadrature weight of a node: cell volume for periodic grids, tensor
    /// trapezoid weights for Dirichlet grids.
    pub fn weight(&self, idx: usize) -> f64 {
        let h = self.spacing;
        let mut w = h[0] * h[1] * h[2];
        if self.kind == DomainKind::Dirichlet {
            let c = self.coords(idx);
            for a in 0..3 {
                if c[a] == 0 || c[a] == self.dims[a] - 1 {
                    w *= 0.5;
                }
            }
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Evaluates `f` at every node in parallel; output order is node order.
    pub fn map_nodes<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        (0..self.len()).into_par_iter().map(f).collect()
    }

    /// Quadrature `Σ w_i f_i` with a fixed pairwise reduction order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let prod: Vec<f64> = f.iter().enumerate().map(|(i, x)| self.weight(i) * x).collect();
        pairwise_sum(&prod)
    }

    /// Quadrature of `f(node)` evaluated in parallel.
    pub fn integrate_with(&self, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
        let vals = self.map_nodes(|i| self.weight(i) * f(i));
        pairwise_sum(&vals)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Pairwise (tree) summation; the order depends only on the slice length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Values that finite-difference stencils can act on.
pub trait Linear: Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl Linear for f64 {}
impl Linear for Vec3 {}
impl Linear for Mat3 {}
impl Linear for Tensor3 {}

#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub grid: Grid,
    pub values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;
pub type MatrixField = Field<Mat3>;

impl<T: Clone> Field<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Field { grid, values: vec![value; grid.len()] }
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> Result<(), FieldError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }
}

impl<T: Send + Sync> Field<T> {
    pub fn map<U: Send>(&self, f: impl Fn(&T) -> U + Sync + Send) -> Field<U> {
        Field { grid: self.grid, values: self.values.par_iter().map(f).collect() }
    }
}

impl Field<Vec3> {
    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, Vec3::ZERO)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.integrate_with(|i| self.values[i].norm_sq())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn inner(&self, other: &Field<Vec3>) -> Result<f64, FieldError> {
        self.same_grid(other)?;
        Ok(self.grid.integrate_with(|i| self.values[i].dot(other.values[i])))
    }

    pub fn first_nonfinite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

impl Field<Mat3> {
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.integrate_with(|i| self.values[i].norm_sq())
    }
}

impl Field<f64> {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Unit-length director field. On Dirichlet grids the values held at
/// boundary nodes are the (time-constant) boundary data.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectorField(Field<Vec3>);

impl DirectorField {
    pub fn new(field: Field<Vec3>) -> Result<Self, FieldError> {
        for (node, d) in field.values.iter().enumerate() {
            if !d.is_finite() {
                return Err(FieldError::NonFinite { node });
            }
            let norm = d.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(FieldError::NonUnitDirector { node, norm });
            }
        }
        Ok(DirectorField(field))
    }

    /// Normalizes every node, then validates.
    pub fn normalized(mut field: Field<Vec3>) -> Result<Self, FieldError> {
        for v in field.values.iter_mut() {
            *v = v.normalized();
        }
        Self::new(field)
    }

    pub fn uniform(grid: Grid, d: Vec3) -> Result<Self, FieldError> {
        Self::new(Field::constant(grid, d))
    }

    /// Replaces all Dirichlet boundary nodes by `d`.
    pub fn with_boundary_value(self, d: Vec3) -> Result<Self, FieldError> {
        let mut f = self.0;
        let grid = f.grid;
        for (i, v) in f.values.iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *v = d;
            }
        }
        Self::new(f)
    }

    pub fn grid(&self) -> &Grid {
        &self.0.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.0.values
    }

    pub fn field(&self) -> &Field<Vec3> {
        &self.0
    }

    pub fn into_field(self) -> Field<Vec3> {
        self.0
    }

    /// Largest `| |d| − 1 |` over all nodes.
    pub fn max_norm_drift(&self) -> f64 {
        self.0.values.iter().fold(0.0, |m, d| m.max((d.norm() - 1.0).abs()))
    }

    pub(crate) fn from_trusted(field: Field<Vec3>) -> Self {
        DirectorField(field)
    }
}

/// Velocity field. Constructors do not project; use
/// [`leray_project`] or [`VelocityField::projected`].
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField(Field<Vec3>);

impl VelocityField {
    pub fn new(field: Field<Vec3>) -> Result<Self, FieldError> {
        if let Some(node) = field.first_nonfinite() {
            return Err(FieldError::NonFinite { node });
        }
        if field.grid.kind == DomainKind::Dirichlet {
            for (node, v) in field.values.iter().enumerate() {
                if field.grid.is_boundary(node) && *v != Vec3::ZERO {
                    return Err(FieldError::InvalidGrid(format!(
                        "velocity must vanish on the boundary (node {node})"
                    )));
                }
            }
        }
        Ok(VelocityField(field))
    }

    pub fn zeros(grid: Grid) -> Self {
        VelocityField(Field::zeros(grid))
    }

    pub fn projected(field: Field<Vec3>) -> Result<Self, FieldError> {
        Ok(VelocityField(leray_project(&field)?))
    }

    pub fn grid(&self) -> &Grid {
        &self.0.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.0.values
    }

    pub fn field(&self) -> &Field<Vec3> {
        &self.0
    }

    pub fn into_field(self) -> Field<Vec3> {
        self.0
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.0.l2_norm_sq()
    }

    /// Max-norm of the central-difference divergence.
    pub fn divergence_residual(&self) -> f64 {
        div(&self.0).max_abs()
    }

    pub(crate) fn from_trusted(field: Field<Vec3>) -> Self {
        VelocityField(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = Grid::cube(4, 1.0, DomainKind::Periodic).unwrap();
        assert_eq!(g.index(1, 2, 3), 1 + 4 * (2 + 4 * 3));
        assert_eq!(g.coords(g.index(1, 2, 3)), [1, 2, 3]);
        assert_eq!(g.spacing, [0.25; 3]);
        assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-15);
        let g = Grid::cube(5, 1.0, DomainKind::Dirichlet).unwrap();
        assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-15);
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(g.index(1, 1, 1)));
        assert!(Grid::cube(3, 1.0, DomainKind::Periodic).is_err());
    }

    #[test]
    fn director_validation() {
        let g = Grid::cube(4, 1.0, DomainKind::Periodic).unwrap();
        let mut f = Field::constant(g, Vec3::e(2));
        f.values[7] = Vec3::new(0.0, 0.0, 1.1);
        match DirectorField::new(f) {
            Err(FieldError::NonUnitDirector { node, .. }) => assert_eq!(node, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairwise_sum_is_sum() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&x), 499500.0);
    }
}
