//! Field-level energy and variational derivative.
//!
//! The discrete energy evaluates the density at every node once per
//! combination of one-sided differences (forward or backward along each
//! axis) and averages; Dirichlet wall nodes only use the differences that stay
//! inside the box. The averaged form has an exact, cheap gradient (used by the
//! solvers) and no checkerboard null modes. A second, independent path
//! evaluates `q` pointwise from central first and compact second differences.

use super::{density_with_derivatives, kform_q, FrankConstants, MagneticParams};
use crate::fields::{pairwise_sum, DirectorField, DomainKind, Field, Grid};
use crate::tensor::{Mat3, Vec3};

/// Forward differences `(d[i+e_a] − d[i]) / h_a` for each axis. On Dirichlet
/// grids the entry at the last node of an axis is unused.
fn forward_differences(grid: &Grid, d: &[Vec3]) -> [Vec<Vec3>; 3] {
    [0, 1, 2].map(|a| {
        let inv = 1.0 / grid.spacing[a];
        let n = grid.dims[a];
        grid.map_nodes(|i| {
            let c = grid.coords(i);
            let next = if c[a] + 1 < n {
                grid.along(i, c, a, c[a] + 1)
            } else if grid.kind == DomainKind::Periodic {
                grid.along(i, c, a, 0)
            } else {
                return Vec3::ZERO;
            };
            (d[next] - d[i]) * inv
        })
    })
}

/// Allowed difference directions per axis at a node: bit 0 forward, bit 1 backward.
#[inline]
fn allowed(grid: &Grid, c: [usize; 3], a: usize) -> u8 {
    if grid.kind == DomainKind::Periodic {
        return 3;
    }
    if c[a] == 0 {
        1
    } else if c[a] == grid.dims[a] - 1 {
        2
    } else {
        3
    }
}

/// The one-sided gradient samples at a node, each `(forward mask, G)` where
/// bit `a` of the mask is set when column `a` is a forward difference.
pub fn one_sided_gradients(grid: &Grid, fwd: &[Vec<Vec3>; 3], idx: usize) -> Vec<(u8, Mat3)> {
    let c = grid.coords(idx);
    let mut cols: [[Option<Vec3>; 2]; 3] = [[None; 2]; 3];
    for a in 0..3 {
        let al = allowed(grid, c, a);
        if al & 1 != 0 {
            cols[a][0] = Some(fwd[a][idx]);
        }
        if al & 2 != 0 {
            let prev = if c[a] > 0 { grid.along(idx, c, a, c[a] - 1) } else { grid.along(idx, c, a, grid.dims[a] - 1) };
            cols[a][1] = Some(fwd[a][prev]);
        }
    }
    let mut out = Vec::with_capacity(8);
    for s in 0..8u8 {
        let pick = |a: usize| cols[a][((s >> a) & 1) as usize];
        if let (Some(x), Some(y), Some(z)) = (pick(0), pick(1), pick(2)) {
            // bit set in `s` means backward; report the forward mask
            out.push((!s & 7, Mat3::from_cols([x, y, z])));
        }
    }
    out
}

/// One-sided gradient samples of a whole field, for diagnostics.
pub(crate) fn gradient_samples(d: &Field<Vec3>) -> Vec<Vec<(u8, Mat3)>> {
    let fwd = forward_differences(&d.grid, &d.values);
    d.grid.map_nodes(|i| one_sided_gradients(&d.grid, &fwd, i))
}

#[inline]
fn density(d: Vec3, g: &Mat3, c: &FrankConstants) -> f64 {
    let [k1, k2, k3, k4, k5] = c.k;
    let tr = g.trace();
    let cu = crate::tensor::levi_contract(&g.transpose());
    let dc = d.dot(cu);
    0.5 * k1 * tr * tr
        + 0.5 * k2 * cu.norm_sq()
        + 0.5 * k3 * d.norm_sq() * tr * tr
        + 0.5 * k4 * dc * dc
        + 0.5 * k5 * d.cross(cu).norm_sq()
}

/// Discrete Oseen-Frank energy.
pub fn field_energy(d: &DirectorField, c: &FrankConstants) -> f64 {
    let grid = *d.grid();
    let fwd = forward_differences(&grid, d.values());
    let vals = grid.map_nodes(|i| {
        let samples = one_sided_gradients(&grid, &fwd, i);
        let inv = 1.0 / samples.len() as f64;
        let s: f64 = samples.iter().map(|(_, g)| density(d.values()[i], g, c)).sum();
        grid.weight(i) * s * inv
    });
    pairwise_sum(&vals)
}

/// Magnetic part `∫ −(χ∥/2)(d·H)² − (χ⊥/2)|d×H|²`.
pub fn magnetic_energy(d: &DirectorField, m: &MagneticParams, h: &Field<Vec3>) -> f64 {
    let grid = *d.grid();
    grid.integrate_with(|i| m.density(d.values()[i], h.values[i]))
}

/// Energy together with its exact L²-gradient.
#[derive(Clone, Debug)]
pub struct EnergyGradient {
    pub elastic: f64,
    pub magnetic: f64,
    /// `∂E/∂d_i / w_i`; zero on Dirichlet boundary nodes.
    pub q: Vec<Vec3>,
}

impl EnergyGradient {
    pub fn energy(&self) -> f64 {
        self.elastic + self.magnetic
    }
}

struct NodeTerms {
    energy: f64,
    fh: Vec3,
    plus: [Vec3; 3],
    minus: [Vec3; 3],
}

/// Exact gradient of [`field_energy`] (plus the magnetic energy when a field
/// is given), scaled by the inverse quadrature weight.
pub fn energy_gradient(
    d: &DirectorField,
    c: &FrankConstants,
    magnetic: Option<(&MagneticParams, &Field<Vec3>)>,
) -> EnergyGradient {
    let grid = *d.grid();
    let dv = d.values();
    let fwd = forward_differences(&grid, dv);
    let terms: Vec<NodeTerms> = grid.map_nodes(|i| {
        let samples = one_sided_gradients(&grid, &fwd, i);
        let wc = grid.weight(i) / samples.len() as f64;
        let mut t = NodeTerms { energy: 0.0, fh: Vec3::ZERO, plus: [Vec3::ZERO; 3], minus: [Vec3::ZERO; 3] };
        for (mask, g) in &samples {
            let (f, fs, fh) = density_with_derivatives(dv[i], g, c);
            t.energy += f;
            t.fh += fh;
            for a in 0..3 {
                let col = fs.col(a) * wc;
                if mask & (1 << a) != 0 {
                    t.plus[a] += col;
                } else {
                    t.minus[a] += col;
                }
            }
        }
        t.energy *= wc;
        t.fh = t.fh * wc;
        t
    });
    let elastic = pairwise_sum(&terms.iter().map(|t| t.energy).collect::<Vec<_>>());

    let q = grid.map_nodes(|j| {
        if grid.is_boundary(j) {
            return Vec3::ZERO;
        }
        let c3 = grid.coords(j);
        let mut acc = terms[j].fh;
        for a in 0..3 {
            let inv = 1.0 / grid.spacing[a];
            let n = grid.dims[a];
            let prev = if c3[a] > 0 { Some(grid.along(j, c3, a, c3[a] - 1)) } else if grid.kind == DomainKind::Periodic { Some(grid.along(j, c3, a, n - 1)) } else { None };
            let next = if c3[a] + 1 < n { Some(grid.along(j, c3, a, c3[a] + 1)) } else if grid.kind == DomainKind::Periodic { Some(grid.along(j, c3, a, 0)) } else { None };
            // forward differences: node j enters its own (−) and its left neighbour's (+)
            acc -= terms[j].plus[a] * inv;
            if let Some(p) = prev {
                acc += terms[p].plus[a] * inv;
            }
            // backward differences: node j enters its own (+) and its right neighbour's (−)
            acc += terms[j].minus[a] * inv;
            if let Some(nx) = next {
                acc -= terms[nx].minus[a] * inv;
            }
        }
        acc * (1.0 / grid.weight(j))
    });

    let (magnetic_energy, q) = match magnetic {
        Some((m, h)) => {
            let e = grid.integrate_with(|i| m.density(dv[i], h.values[i]));
            let q = q
                .iter()
                .enumerate()
                .map(|(i, qi)| if grid.is_boundary(i) { *qi } else { *qi + m.q_addition(dv[i], h.values[i]) })
                .collect();
            (e, q)
        }
        None => (0.0, q),
    };
    EnergyGradient { elastic, magnetic: magnetic_energy, q }
}

/// Pointwise `q` from central first and compact second differences, plus the
/// magnetic terms when a field is given. Zero on Dirichlet boundary nodes.
pub fn compact_variational_derivative(
    d: &DirectorField,
    c: &FrankConstants,
    magnetic: Option<(&MagneticParams, &Field<Vec3>)>,
) -> Field<Vec3> {
    let grid = *d.grid();
    let dv = d.values();
    let values = grid.map_nodes(|i| {
        if grid.is_boundary(i) {
            return Vec3::ZERO;
        }
        let g = grid.grad_at(dv, i);
        let h2 = grid.hessian_at(dv, i);
        let mut q = kform_q(dv[i], &g, &h2, c);
        if let Some((m, h)) = magnetic {
            q += m.q_addition(dv[i], h.values[i]);
        }
        q
    });
    Field { grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_unit_director;

    #[test]
    fn constant_director_has_zero_energy() {
        for kind in [DomainKind::Periodic, DomainKind::Dirichlet] {
            let g = Grid::cube(5, 1.0, kind).unwrap();
            let d = DirectorField::uniform(g, Vec3::new(0.0, 0.6, 0.8)).unwrap();
            let c = FrankConstants::new(1.0, 2.0, 3.0).unwrap();
            assert_eq!(field_energy(&d, &c), 0.0);
            let eg = energy_gradient(&d, &c, None);
            assert!(eg.q.iter().all(|q| *q == Vec3::ZERO));
        }
    }

    #[test]
    fn gradient_matches_energy_differences() {
        for kind in [DomainKind::Periodic, DomainKind::Dirichlet] {
            let g = Grid::cube(6, 1.0, kind).unwrap();
            let d = random_unit_director(&g, 5, 1.0);
            let c = FrankConstants::new(1.0, 0.7, 1.6).unwrap();
            let eg = energy_gradient(&d, &c, None);
            assert!((eg.elastic - field_energy(&d, &c)).abs() < 1e-12 * eg.elastic);
            let node = g.index(2, 3, 1);
            for comp in 0..3 {
                let eps = 1e-6;
                let bump = |s: f64| {
                    let mut f = d.field().clone();
                    f.values[node].0[comp] += s * eps;
                    field_energy(&DirectorField::from_trusted(f), &c)
                };
                let fd = (bump(1.0) - bump(-1.0)) / (2.0 * eps);
                let exact = eg.q[node].0[comp] * g.weight(node);
                assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{kind:?} {comp}: {fd} vs {exact}");
            }
        }
    }
}
