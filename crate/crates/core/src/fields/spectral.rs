//! Discrete Fourier tools on periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{DomainKind, Field, FieldError, Grid};
use crate::tensor::Vec3;

/// FFT plans for one periodic grid plus the discrete derivative symbols.
pub struct Spectral {
    grid: Grid,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    /// Central-difference symbol `sin(2π m/n)/h` per axis and frequency.
    central: [Vec<f64>; 3],
    /// Compact second-difference symbol `(2 sin(π m/n)/h)²`.
    compact: [Vec<f64>; 3],
}

impl Spectral {
    pub fn new(grid: &Grid) -> Result<Self, FieldError> {
        if grid.kind != DomainKind::Periodic {
            return Err(FieldError::UnsupportedDomain);
        }
        let mut planner = FftPlanner::new();
        let fwd = [0, 1, 2].map(|a| planner.plan_fft_forward(grid.dims[a]));
        let inv = [0, 1, 2].map(|a| planner.plan_fft_inverse(grid.dims[a]));
        let central = [0, 1, 2].map(|a| {
            let n = grid.dims[a];
            (0..n).map(|m| (2.0 * PI * m as f64 / n as f64).sin() / grid.spacing[a]).collect()
        });
        let compact = [0, 1, 2].map(|a| {
            let n = grid.dims[a];
            (0..n)
                .map(|m| {
                    let s = 2.0 * (PI * m as f64 / n as f64).sin() / grid.spacing[a];
                    s * s
                })
                .collect()
        });
        Ok(Spectral { grid: *grid, fwd, inv, central, compact })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let [nx, ny, nz] = self.grid.dims;
        let plans = if inverse { &self.inv } else { &self.fwd };
        for line in data.chunks_mut(nx) {
            plans[0].process(line);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); ny.max(nz)];
        for k in 0..nz {
            for i in 0..nx {
                for j in 0..ny {
                    buf[j] = data[i + nx * (j + ny * k)];
                }
                plans[1].process(&mut buf[..ny]);
                for j in 0..ny {
                    data[i + nx * (j + ny * k)] = buf[j];
                }
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                for k in 0..nz {
                    buf[k] = data[i + nx * (j + ny * k)];
                }
                plans[2].process(&mut buf[..nz]);
                for k in 0..nz {
                    data[i + nx * (j + ny * k)] = buf[k];
                }
            }
        }
        if inverse {
            let s = 1.0 / self.grid.len() as f64;
            for x in data.iter_mut() {
                *x *= s;
            }
        }
    }

    /// Component-wise forward transform of a vector field.
    pub fn forward(&self, f: &Field<Vec3>) -> [Vec<Complex64>; 3] {
        [0, 1, 2].map(|c| {
            let mut data: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(v.0[c], 0.0)).collect();
            self.transform(&mut data, false);
            data
        })
    }

    pub fn inverse(&self, mut spec: [Vec<Complex64>; 3]) -> Field<Vec3> {
        for s in spec.iter_mut() {
            self.transform(s, true);
        }
        let values = (0..self.grid.len()).map(|i| Vec3([spec[0][i].re, spec[1][i].re, spec[2][i].re])).collect();
        Field { grid: self.grid, values }
    }

    fn mode(&self, idx: usize) -> [usize; 3] {
        self.grid.coords(idx)
    }

    /// Applies `I − ξξᵀ/|ξ|²` with the central-difference symbol in place.
    pub fn project_spectrum(&self, spec: &mut [Vec<Complex64>; 3]) {
        for idx in 0..self.grid.len() {
            let m = self.mode(idx);
            let xi = [self.central[0][m[0]], self.central[1][m[1]], self.central[2][m[2]]];
            let xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            if xi2 == 0.0 {
                continue;
            }
            let dot = spec[0][idx] * xi[0] + spec[1][idx] * xi[1] + spec[2][idx] * xi[2];
            for a in 0..3 {
                spec[a][idx] -= dot * (xi[a] / xi2);
            }
        }
    }

    /// Symbol of the compact negative Laplacian at node-ordered mode `idx`.
    pub fn neg_laplacian_symbol(&self, idx: usize) -> f64 {
        let m = self.mode(idx);
        self.compact[0][m[0]] + self.compact[1][m[1]] + self.compact[2][m[2]]
    }

    /// Projects `f`, then solves `(1 − κ Δ_h) u = P f` mode by mode.
    pub fn project_and_smooth(&self, f: &Field<Vec3>, kappa: f64) -> Field<Vec3> {
        let mut spec = self.forward(f);
        self.project_spectrum(&mut spec);
        if kappa != 0.0 {
            for idx in 0..self.grid.len() {
                let s = 1.0 / (1.0 + kappa * self.neg_laplacian_symbol(idx));
                for c in spec.iter_mut() {
                    c[idx] *= s;
                }
            }
        }
        self.inverse(spec)
    }

    pub fn project(&self, f: &Field<Vec3>) -> Field<Vec3> {
        self.project_and_smooth(f, 0.0)
    }

    /// Trigonometric interpolation onto a grid with `factor` times as many
    /// nodes per axis (zero padding in Fourier space).
    pub fn refine(&self, f: &Field<Vec3>, factor: usize) -> Result<Field<Vec3>, FieldError> {
        let fine_grid = Grid::new(
            [0, 1, 2].map(|a| self.grid.dims[a] * factor),
            [0, 1, 2].map(|a| self.grid.spacing[a] / factor as f64),
            DomainKind::Periodic,
        )?;
        let fine = Spectral::new(&fine_grid)?;
        let spec = self.forward(f);
        let [nx, ny, nz] = self.grid.dims;
        let mut out: [Vec<Complex64>; 3] = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); fine_grid.len()]);
        let scale = (factor * factor * factor) as f64;
        // coarse node offset of (i+½)h_c vs fine (i'+½)h_f shifts the phase
        let shift = |m: isize, n: usize, a: usize| -> Complex64 {
            let h_c = self.grid.spacing[a];
            let h_f = fine_grid.spacing[a];
            let delta = 0.5 * h_f - 0.5 * h_c;
            let l = n as f64 * h_c;
            let theta = 2.0 * PI * m as f64 * delta / l;
            Complex64::new(theta.cos(), theta.sin())
        };
        let signed = |m: usize, n: usize| -> Option<isize> {
            let m = m as isize;
            let n = n as isize;
            if 2 * m < n {
                Some(m)
            } else if 2 * m > n {
                Some(m - n)
            } else {
                None // drop the Nyquist mode
            }
        };
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let (Some(mi), Some(mj), Some(mk)) = (signed(i, nx), signed(j, ny), signed(k, nz)) else {
                        continue;
                    };
                    let src = i + nx * (j + ny * k);
                    let fi = wrap_mode(mi, fine_grid.dims[0]);
                    let fj = wrap_mode(mj, fine_grid.dims[1]);
                    let fk = wrap_mode(mk, fine_grid.dims[2]);
                    let dst = fi + fine_grid.dims[0] * (fj + fine_grid.dims[1] * fk);
                    let ph = shift(mi, nx, 0) * shift(mj, ny, 1) * shift(mk, nz, 2);
                    for c in 0..3 {
                        out[c][dst] = spec[c][src] * ph * scale;
                    }
                }
            }
        }
        Ok(fine.inverse(out))
    }
}

fn wrap_mode(m: isize, n: usize) -> usize {
    m.rem_euclid(n as isize) as usize
}

/// Removes the discrete-gradient part of a periodic velocity field.
pub fn leray_project(v: &Field<Vec3>) -> Result<Field<Vec3>, FieldError> {
    Ok(Spectral::new(&v.grid)?.project(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grad_scalar;

    #[test]
    fn gradient_fields_are_removed() {
        let g = Grid::cube(8, 1.0, DomainKind::Periodic).unwrap();
        let phi = Field {
            grid: g,
            values: (0..g.len())
                .map(|i| {
                    let x = g.position(i);
                    (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + (2.0 * PI * x[2]).cos()
                })
                .collect(),
        };
        let v = grad_scalar(&phi);
        let p = leray_project(&v).unwrap();
        assert!(p.max_norm() < 1e-10);
    }

    #[test]
    fn refine_reproduces_smooth_field() {
        let g = Grid::cube(8, 1.0, DomainKind::Periodic).unwrap();
        let f = |x: Vec3| Vec3::new((2.0 * PI * x[0]).sin(), (2.0 * PI * (x[1] + x[2])).cos(), 0.5);
        let coarse = Field { grid: g, values: (0..g.len()).map(|i| f(g.position(i))).collect() };
        let fine = Spectral::new(&g).unwrap().refine(&coarse, 2).unwrap();
        for i in 0..fine.grid.len() {
            assert!((fine.values[i] - f(fine.grid.position(i))).max_abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_unsupported() {
        let g = Grid::cube(8, 1.0, DomainKind::Dirichlet).unwrap();
        assert!(matches!(leray_project(&Field::zeros(g)), Err(FieldError::UnsupportedDomain)));
    }
}
