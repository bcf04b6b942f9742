//! Seeded random initial data and analytic test directors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{curl, leray_project, DirectorField, DomainKind, Field, FieldError, Grid, VelocityField};
use crate::tensor::Vec3;

/// Options for [`random_unit_director_with`].
#[derive(Clone, Copy, Debug)]
pub struct DirectorInit {
    /// Mean direction; a random unit vector when `None`.
    pub mean: Option<Vec3>,
    /// Size of the perturbation relative to the (unit) mean, below 1 so that
    /// the normalization never divides by a vanishing vector.
    pub amplitude: f64,
    /// Highest wavenumber per axis in the synthesis.
    pub modes: i32,
    /// On Dirichlet grids, damps the perturbation by `Π sin²(πx_a/L_a)` so the
    /// field equals the mean on the walls and meets it smoothly.
    pub taper: bool,
}

impl Default for DirectorInit {
    fn default() -> Self {
        DirectorInit { mean: None, amplitude: 0.9, modes: 3, taper: false }
    }
}

fn normal_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3([rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
}

/// Random trigonometric polynomial with amplitudes `(1+|m|²)^(−smoothness)`.
fn synthesize(grid: &Grid, rng: &mut ChaCha8Rng, smoothness: f64, modes: i32) -> Field<Vec3> {
    let mut terms = Vec::new();
    for mz in -modes..=modes {
        for my in -modes..=modes {
            for mx in -modes..=modes {
                let a = normal_vec(rng);
                let b = normal_vec(rng);
                if mx == 0 && my == 0 && mz == 0 {
                    continue;
                }
                let m2 = (mx * mx + my * my + mz * mz) as f64;
                let w = (1.0 + m2).powf(-smoothness);
                terms.push(([mx as f64, my as f64, mz as f64], a * w, b * w));
            }
        }
    }
    let l = grid.lengths();
    let values = grid.map_nodes(|i| {
        let x = grid.position(i);
        let mut u = Vec3::ZERO;
        for (m, a, b) in &terms {
            let phase = 2.0 * PI * (m[0] * x[0] / l[0] + m[1] * x[1] / l[1] + m[2] * x[2] / l[2]);
            let (s, c) = phase.sin_cos();
            u += *a * c + *b * s;
        }
        u
    });
    Field { grid: *grid, values }
}

pub fn random_unit_director(grid: &Grid, seed: u64, smoothness: f64) -> DirectorField {
    random_unit_director_with(grid, seed, smoothness, DirectorInit::default())
}

pub fn random_unit_director_with(grid: &Grid, seed: u64, smoothness: f64, opts: DirectorInit) -> DirectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = match opts.mean {
        Some(m) => m.normalized(),
        None => normal_vec(&mut rng).normalized(),
    };
    let mut u = synthesize(grid, &mut rng, smoothness, opts.modes);
    if opts.taper && grid.kind == DomainKind::Dirichlet {
        for (i, x) in u.values.iter_mut().enumerate() {
            *x = *x * wall_bump(grid, i);
        }
    }
    let umax = u.max_norm();
    let scale = if umax > 0.0 { opts.amplitude / umax } else { 0.0 };
    let values = u.values.iter().map(|x| (mean + *x * scale).normalized()).collect();
    DirectorField::new(Field { grid: *grid, values }).expect("perturbation below unit length keeps nodes nonzero")
}

fn wall_bump(grid: &Grid, i: usize) -> f64 {
    let l = grid.lengths();
    let x = grid.position(i);
    (0..3).map(|a| (PI * x[a] / l[a]).sin().powi(2)).product()
}

/// Divergence-free random velocity with unit root-mean-square speed.
pub fn random_divfree_velocity(grid: &Grid, seed: u64, smoothness: f64) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = synthesize(grid, &mut rng, smoothness, 3);
    let mut v = match grid.kind {
        DomainKind::Periodic => leray_project(&u).expect("periodic grid"),
        DomainKind::Dirichlet => {
            // stream function vanishing to second order at the walls
            let psi = Field { grid: *grid, values: (0..grid.len()).map(|i| u.values[i] * wall_bump(grid, i)).collect() };
            let mut v = curl(&psi);
            for (i, x) in v.values.iter_mut().enumerate() {
                if grid.is_boundary(i) {
                    *x = Vec3::ZERO;
                }
            }
            v
        }
    };
    let rms = (v.l2_norm_sq() / grid.volume()).sqrt();
    if rms > 0.0 {
        for x in v.values.iter_mut() {
            *x = *x * (1.0 / rms);
        }
    }
    VelocityField::from_trusted(v)
}

/// Twisted director `(cos 2πz/L, sin 2πz/L, 0)`; on the unit box its energy
/// density is `2π² K2` everywhere.
pub fn helix_director(grid: &Grid) -> Result<DirectorField, FieldError> {
    let lz = grid.lengths()[2];
    let values = (0..grid.len())
        .map(|i| {
            let z = grid.position(i)[2];
            let t = 2.0 * PI * z / lz;
            Vec3::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    DirectorField::new(Field { grid: *grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_fields_repeat() {
        let g = Grid::cube(6, 1.0, DomainKind::Periodic).unwrap();
        assert_eq!(random_unit_director(&g, 7, 1.0), random_unit_director(&g, 7, 1.0));
        assert_ne!(random_unit_director(&g, 7, 1.0), random_unit_director(&g, 8, 1.0));
        assert_eq!(random_divfree_velocity(&g, 3, 1.0), random_divfree_velocity(&g, 3, 1.0));
    }

    #[test]
    fn velocity_is_divergence_free() {
        let g = Grid::cube(8, 1.0, DomainKind::Periodic).unwrap();
        let v = random_divfree_velocity(&g, 11, 1.0);
        assert!(v.divergence_residual() < 1e-10);
        let g = Grid::cube(8, 1.0, DomainKind::Dirichlet).unwrap();
        let v = random_divfree_velocity(&g, 11, 1.0);
        assert!(VelocityField::new(v.into_field()).is_ok());
    }
}
