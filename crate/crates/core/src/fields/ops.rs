//! Second-order finite-difference operators.
//!
//! Interior and periodic nodes use central differences. Dirichlet boundary
//! nodes use second-order one-sided stencils. Pure second derivatives use the
//! compact three-point stencil, mixed ones the product of first differences.

use super::{DomainKind, Field, Grid, Linear};
use crate::tensor::{Mat3, Tensor3, Vec3};

/// Up to three terms `w (f[a] − f[b])` given as (a, b, w) node coordinates
/// along one axis. Difference form keeps constants exactly in the kernel.
type Stencil = [(usize, usize, f64); 3];

#[inline]
fn wrap(c: isize, n: usize) -> usize {
    c.rem_euclid(n as isize) as usize
}

impl Grid {
    #[inline]
    pub(crate) fn first_stencil(&self, c: usize, axis: usize) -> Stencil {
        let n = self.dims[axis];
        let inv = 0.5 / self.spacing[axis];
        match self.kind {
            DomainKind::Periodic => [(wrap(c as isize + 1, n), wrap(c as isize - 1, n), inv), (c, c, 0.0), (c, c, 0.0)],
            DomainKind::Dirichlet => {
                if c == 0 {
                    // −3f0 + 4f1 − f2 = 3(f1 − f0) + (f1 − f2)
                    [(1, 0, 3.0 * inv), (1, 2, inv), (c, c, 0.0)]
                } else if c == n - 1 {
                    [(n - 1, n - 2, 3.0 * inv), (n - 3, n - 2, inv), (c, c, 0.0)]
                } else {
                    [(c + 1, c - 1, inv), (c, c, 0.0), (c, c, 0.0)]
                }
            }
        }
    }

    #[inline]
    pub(crate) fn second_stencil(&self, c: usize, axis: usize) -> Stencil {
        let n = self.dims[axis];
        let h = self.spacing[axis];
        let inv = 1.0 / (h * h);
        match self.kind {
            DomainKind::Periodic => {
                [(wrap(c as isize + 1, n), c, inv), (wrap(c as isize - 1, n), c, inv), (c, c, 0.0)]
            }
            DomainKind::Dirichlet => {
                if c == 0 {
                    // 2f0 − 5f1 + 4f2 − f3 = 2(f0 − f1) + 3(f2 − f1) + (f2 − f3)
                    [(0, 1, 2.0 * inv), (2, 1, 3.0 * inv), (2, 3, inv)]
                } else if c == n - 1 {
                    [(n - 1, n - 2, 2.0 * inv), (n - 3, n - 2, 3.0 * inv), (n - 3, n - 4, inv)]
                } else {
                    [(c + 1, c, inv), (c - 1, c, inv), (c, c, 0.0)]
                }
            }
        }
    }

    /// Node index obtained by moving node `idx` to coordinate `c` along `axis`.
    #[inline]
    pub(crate) fn along(&self, idx: usize, coords: [usize; 3], axis: usize, c: usize) -> usize {
        let s = self.strides()[axis];
        idx + c * s - coords[axis] * s
    }

    /// First derivative of `f` along `axis` at node `idx`.
    #[inline]
    pub fn d1<T: Linear>(&self, f: &[T], idx: usize, axis: usize) -> T {
        let coords = self.coords(idx);
        let mut acc = T::default();
        for (a, b, w) in self.first_stencil(coords[axis], axis) {
            if w != 0.0 {
                acc = acc + (f[self.along(idx, coords, axis, a)] - f[self.along(idx, coords, axis, b)]) * w;
            }
        }
        acc
    }

    /// Second derivative `∂_a ∂_b f` at node `idx`.
    #[inline]
    pub fn d2<T: Linear>(&self, f: &[T], idx: usize, a: usize, b: usize) -> T {
        let coords = self.coords(idx);
        let mut acc = T::default();
        if a == b {
            for (p, m, w) in self.second_stencil(coords[a], a) {
                if w != 0.0 {
                    acc = acc + (f[self.along(idx, coords, a, p)] - f[self.along(idx, coords, a, m)]) * w;
                }
            }
        } else {
            for (p, m, w) in self.first_stencil(coords[a], a) {
                if w != 0.0 {
                    let jp = self.along(idx, coords, a, p);
                    let jm = self.along(idx, coords, a, m);
                    acc = acc + (self.d1(f, jp, b) - self.d1(f, jm, b)) * w;
                }
            }
        }
        acc
    }

    /// Central (or boundary one-sided) gradient of a vector field at a node,
    /// `G[i][a] = ∂_a f_i`.
    #[inline]
    pub fn grad_at(&self, f: &[Vec3], idx: usize) -> Mat3 {
        Mat3::from_cols([self.d1(f, idx, 0), self.d1(f, idx, 1), self.d1(f, idx, 2)])
    }

    /// All second derivatives of a vector field at a node,
    /// `H.get(i,a,b) = ∂_a ∂_b f_i`.
    #[inline]
    pub fn hessian_at(&self, f: &[Vec3], idx: usize) -> Tensor3 {
        let mut h = Tensor3::ZERO;
        for a in 0..3 {
            for b in a..3 {
                let v = self.d2(f, idx, a, b);
                for i in 0..3 {
                    h.set(i, a, b, v.0[i]);
                    h.set(i, b, a, v.0[i]);
                }
            }
        }
        h
    }
}

pub fn grad_scalar(f: &Field<f64>) -> Field<Vec3> {
    let g = f.grid;
    Field { grid: g, values: g.map_nodes(|i| Vec3([g.d1(&f.values, i, 0), g.d1(&f.values, i, 1), g.d1(&f.values, i, 2)])) }
}

/// Gradient of a vector field, `G[i][a] = ∂_a f_i`.
pub fn grad(f: &Field<Vec3>) -> Field<Mat3> {
    let g = f.grid;
    Field { grid: g, values: g.map_nodes(|i| g.grad_at(&f.values, i)) }
}

pub fn div(f: &Field<Vec3>) -> Field<f64> {
    let g = f.grid;
    Field {
        grid: g,
        values: g.map_nodes(|i| (0..3).map(|a| g.d1(&f.values, i, a).0[a]).sum()),
    }
}

/// Row divergence `(div M)_i = Σ_j ∂_j M_ij`.
pub fn div_mat(f: &Field<Mat3>) -> Field<Vec3> {
    let g = f.grid;
    Field {
        grid: g,
        values: g.map_nodes(|i| {
            let mut out = Vec3::ZERO;
            for j in 0..3 {
                let dm = g.d1(&f.values, i, j);
                for r in 0..3 {
                    out.0[r] += dm.0[r][j];
                }
            }
            out
        }),
    }
}

pub fn curl(f: &Field<Vec3>) -> Field<Vec3> {
    let g = f.grid;
    Field {
        grid: g,
        values: g.map_nodes(|i| {
            let dx = g.d1(&f.values, i, 0);
            let dy = g.d1(&f.values, i, 1);
            let dz = g.d1(&f.values, i, 2);
            Vec3([dy.0[2] - dz.0[1], dz.0[0] - dx.0[2], dx.0[1] - dy.0[0]])
        }),
    }
}

/// Second derivatives of each component, `H.get(i,a,b) = ∂_a ∂_b f_i`.
pub fn hessian(f: &Field<Vec3>) -> Field<Tensor3> {
    let g = f.grid;
    Field { grid: g, values: g.map_nodes(|i| g.hessian_at(&f.values, i)) }
}
