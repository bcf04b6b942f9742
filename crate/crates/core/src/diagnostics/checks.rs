//! Inequality checks along stored trajectories, with trapezoidal time
//! quadrature on the sample times.

use super::functionals::{
    magnetic_coupling_vector, magnetic_relative_energy, operator_a, potential_k, relative_dissipation,
    relative_energy, theta_cross_term,
};
use super::{DiagnosticsError, TestPair};
use crate::fields::{DirectorField, Field, Trajectory};
use crate::frank::{field_energy, FrankConstants, MagneticParams};
use crate::leslie::{viscous_dissipation, LeslieCoefficients};
use crate::tensor::Vec3;

/// Constants of the certification: `C` in the potential, the coercivity `k`
/// and the coefficient of the initial `‖d(0) − d̃(0)‖²` term.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    pub c: f64,
    /// Defaults to `min{k1, k2}/2`.
    pub k: Option<f64>,
    /// Defaults to `|Θ|²/(2k)`; the factor multiplying `sup‖∇d̃⊗d̃‖²`.
    pub theta_coefficient: Option<f64>,
    pub forcing: Option<Field<Vec3>>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { c: 1.0, k: None, theta_coefficient: None, forcing: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelativeEnergyReport {
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    pub w: Vec<f64>,
    pub k: Vec<f64>,
    /// `∫₀ᵗ K` at each sample.
    pub integral_k: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs − lhs`
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub c: f64,
    pub k_coercivity: f64,
    pub theta_coefficient: f64,
    /// `θ sup‖∇d̃⊗d̃‖² ‖d(0) − d̃(0)‖²` plus the initial `Θ` cross term.
    pub initial_correction: f64,
}

impl RelativeEnergyReport {
    /// `½E(t) + ∫₀ᵗ W`, the unweighted Lyapunov functional.
    pub fn lyapunov_series(&self) -> Vec<f64> {
        let w_int = cumulative_trapezoid(&self.times, &self.w);
        self.e.iter().zip(&w_int).map(|(e, w)| 0.5 * e + w).collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.min_margin >= -tol
    }
}

/// Signed margins of the total energy inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation_integral: Vec<f64>,
    pub forcing_integral: Vec<f64>,
    /// `E(0) + ∫⟨g,v⟩ − E(t) − ∫D`
    pub margin: Vec<f64>,
    pub min_margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedEnergyReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs_residual: f64,
}

fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for n in 0..f.len() {
        if n > 0 {
            acc += 0.5 * (t[n] - t[n - 1]) * (f[n] + f[n - 1]);
        }
        out.push(acc);
    }
    out
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn require_samples(traj: &Trajectory) -> Result<(), DiagnosticsError> {
    if traj.samples.is_empty() {
        return Err(DiagnosticsError::InsufficientRegularity("trajectory has no samples".into()));
    }
    if traj.samples.iter().any(|s| s.d.grid != traj.grid || s.v.grid != traj.grid || s.dxq.grid != traj.grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    Ok(())
}

fn sub(a: &Field<Vec3>, b: &Field<Vec3>) -> Field<Vec3> {
    Field { grid: a.grid, values: a.values.iter().zip(&b.values).map(|(x, y)| *x - *y).collect() }
}

fn certify(
    traj: &Trajectory,
    pair: &TestPair,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    opts: &CertifyOptions,
    magnetic: Option<(&MagneticParams, &Field<Vec3>)>,
) -> Result<RelativeEnergyReport, DiagnosticsError> {
    require_samples(traj)?;
    let grid = traj.grid;
    if let Some(g) = &opts.forcing {
        if g.grid != grid {
            return Err(DiagnosticsError::GridMismatch);
        }
    }
    let k_coercivity = opts.k.unwrap_or_else(|| c.coercivity());
    if !(k_coercivity > 0.0 && opts.c.is_finite() && opts.c > 0.0) {
        return Err(DiagnosticsError::InvalidConstant(format!(
            "need C > 0 and k > 0 (C = {}, k = {k_coercivity})",
            opts.c
        )));
    }
    let theta_sq = c.theta_norm_sq();
    let theta_coefficient = opts.theta_coefficient.unwrap_or(theta_sq / (2.0 * k_coercivity));
    let sup = pair.gradient_sup(&grid);
    let coupling = theta_sq / k_coercivity * sup * sup;

    // field data: (params, H, H̃, K factor, ‖H − H̃‖²)
    let field = match magnetic {
        Some((m, h)) => {
            if h.grid != grid {
                return Err(DiagnosticsError::GridMismatch);
            }
            let ht = match pair.field() {
                Some(s) if s.field.grid != grid => return Err(DiagnosticsError::GridMismatch),
                Some(s) => s.field.clone(),
                None => Field::zeros(grid),
            };
            let ht_max = ht.max_norm();
            let h_l3 = grid.integrate_with(|i| h.values[i].norm().powi(3)).cbrt();
            let factor = 1.0 + ht_max * ht_max + h_l3 * h_l3 * ht_max * ht_max;
            let mismatch = sub(h, &ht).l2_norm_sq();
            Some((m, h, ht, factor, mismatch))
        }
        None => None,
    };

    let n = traj.samples.len();
    let (mut e, mut w, mut k, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut initial_correction = 0.0;
    for (idx, s) in traj.samples.iter().enumerate() {
        let st = pair.state(idx, s.time, &grid, c)?;
        let en = match &field {
            Some((m, h, ht, ..)) => magnetic_relative_energy(&s.v, &s.d, h, &st, ht, c, m)?,
            None => relative_energy(&s.v, &s.d, &st, c)?,
        };
        let wn = relative_dissipation(&s.v, &s.d, &s.dxq, &st, l)?;
        let kn = potential_k(&st, &s.d, sup, opts.c)?;
        let kn = match &field {
            Some((.., factor, _)) => factor * kn,
            None => kn,
        };
        let (a1, a2) = operator_a(&st, l, opts.forcing.as_ref())?;
        let a_h = match &field {
            Some((m, h, ht, ..)) => Some(magnetic_coupling_vector(&s.d, h, &st, ht, m)?),
            None => None,
        };
        let vdiff = sub(&st.v, &s.v);
        let dir = grid.map_nodes(|i| {
            let d = s.d.values[i];
            let mut x = d.cross(st.q.values[i]) - s.dxq.values[i] + d.cross(st.d.values[i]) * coupling;
            if let Some(ah) = &a_h {
                x -= ah.values[i];
            }
            x
        });
        let an = a1.inner(&vdiff)? + a2.inner(&Field { grid, values: dir })?;
        if idx == 0 {
            let dd = sub(&s.d, &st.d).l2_norm_sq();
            initial_correction = theta_coefficient * sup * sup * dd + theta_cross_term(&s.d, &st.d, c);
        }
        e.push(en);
        w.push(wn);
        k.push(kn);
        a.push(an);
    }

    let times = traj.times();
    let integral_k = cumulative_trapezoid(&times, &k);
    let (mut lhs, mut rhs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    // S_n = ∫₀^{t_n} f(s) exp(∫ₛ^{t_n} K) ds, advanced by the trapezoid rule
    let (mut sw, mut sa) = (0.0, 0.0);
    for j in 0..n {
        if j > 0 {
            let growth = (integral_k[j] - integral_k[j - 1]).exp();
            let h = times[j] - times[j - 1];
            sw = sw * growth + 0.5 * h * (w[j - 1] * growth + w[j]);
            sa = sa * growth + 0.5 * h * (a[j - 1] * growth + a[j]);
        }
        let weight = integral_k[j].exp();
        let mut left = 0.5 * e[j] + 0.5 * sw;
        if let Some((.., mismatch)) = &field {
            left += (1.0 - weight) * mismatch;
        }
        lhs.push(left);
        rhs.push((e[0] + initial_correction) * weight + sa);
    }
    let margin: Vec<f64> = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
    Ok(RelativeEnergyReport {
        times,
        min_margin: min_of(&margin),
        e,
        w,
        k,
        integral_k,
        lhs,
        rhs,
        margin,
        c: opts.c,
        k_coercivity,
        theta_coefficient,
        initial_correction,
    })
}

/// Relative energy inequality of a trajectory against a test pair.
pub fn dissipative_inequality_check(
    traj: &Trajectory,
    pair: &TestPair,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    opts: &CertifyOptions,
) -> Result<RelativeEnergyReport, DiagnosticsError> {
    certify(traj, pair, c, l, opts, None)
}

/// Relative energy inequality with the applied field `h` of the trajectory and
/// the pair's own `H̃` (zero when the pair carries none). Both fields are
/// constant in time.
pub fn magnetic_inequality_check(
    traj: &Trajectory,
    pair: &TestPair,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    opts: &CertifyOptions,
    m: &MagneticParams,
    h: &Field<Vec3>,
) -> Result<RelativeEnergyReport, DiagnosticsError> {
    certify(traj, pair, c, l, opts, Some((m, h)))
}

fn dissipation_density(grid: &crate::fields::Grid, v: &[Vec3], d: &[Vec3], dxq: &[Vec3], l: Option<&LeslieCoefficients>) -> f64 {
    grid.integrate_with(|i| {
        let mut x = dxq[i].norm_sq();
        if let Some(l) = l {
            x += viscous_dissipation(d[i], &grid.grad_at(v, i).sym(), l);
        }
        x
    })
}

fn energy_report(times: Vec<f64>, energy: Vec<f64>, diss: &[f64], power: &[f64]) -> EnergyReport {
    let dissipation_integral = cumulative_trapezoid(&times, diss);
    let forcing_integral = cumulative_trapezoid(&times, power);
    let margin: Vec<f64> = (0..times.len())
        .map(|n| energy[0] + forcing_integral[n] - energy[n] - dissipation_integral[n])
        .collect();
    EnergyReport { min_margin: min_of(&margin), times, energy, dissipation_integral, forcing_integral, margin }
}

/// `½‖v‖² + F(d) + ∫D ≤ ½‖v₀‖² + F(d₀) + ∫⟨g,v⟩`, recomputed from the stored
/// samples.
pub fn energy_inequality_check(
    traj: &Trajectory,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    g: Option<&Field<Vec3>>,
) -> Result<EnergyReport, DiagnosticsError> {
    require_samples(traj)?;
    let grid = traj.grid;
    if g.is_some_and(|g| g.grid != grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let mut energy = Vec::new();
    let mut diss = Vec::new();
    let mut power = Vec::new();
    for s in &traj.samples {
        let f = field_energy(&DirectorField::from_trusted(s.d.clone()), c);
        energy.push(0.5 * s.v.l2_norm_sq() + f);
        diss.push(dissipation_density(&grid, &s.v.values, &s.d.values, &s.dxq.values, l));
        power.push(match g {
            Some(g) => g.inner(&s.v)?,
            None => 0.0,
        });
    }
    Ok(energy_report(traj.times(), energy, &diss, &power))
}

/// Same inequality from the per-step scalar records of a run.
pub fn energy_inequality_from_records(traj: &Trajectory) -> Result<EnergyReport, DiagnosticsError> {
    let r = &traj.records;
    if r.is_empty() {
        return Err(DiagnosticsError::InsufficientRegularity("trajectory has no step records".into()));
    }
    let diss: Vec<f64> = r.iter().map(|x| x.dissipation).collect();
    let power: Vec<f64> = r.iter().map(|x| x.forcing_power).collect();
    Ok(energy_report(r.iter().map(|x| x.time).collect(), r.iter().map(|x| x.total()).collect(), &diss, &power))
}

/// Both sides of the shifted energy equality with the trajectory as its own
/// test pair:
/// `½‖ṽ‖² + F(d̃) + ∫D̃ = ½‖ṽ₀‖² + F(d̃₀) + ∫[⟨g,ṽ⟩ + (A₁,ṽ) + (A₂,d̃×q̃)]`.
pub fn shifted_energy_equality_check(
    traj: &Trajectory,
    c: &FrankConstants,
    l: Option<&LeslieCoefficients>,
    g: Option<&Field<Vec3>>,
) -> Result<ShiftedEnergyReport, DiagnosticsError> {
    require_samples(traj)?;
    let grid = traj.grid;
    if g.is_some_and(|g| g.grid != grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let times = traj.times();
    let n = times.len();
    let (mut energy, mut diss, mut source) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    if n == 1 {
        let s = &traj.samples[0];
        let e = 0.5 * s.v.l2_norm_sq() + field_energy(&DirectorField::from_trusted(s.d.clone()), c);
        return Ok(ShiftedEnergyReport { times, lhs: vec![e], rhs: vec![e], residual: vec![0.0], max_abs_residual: 0.0 });
    }
    let pair = TestPair::from_trajectory(traj)?;
    for (idx, s) in traj.samples.iter().enumerate() {
        let st = pair.state(idx, s.time, &grid, c)?;
        energy.push(0.5 * st.v.l2_norm_sq() + field_energy(&DirectorField::from_trusted(st.d.clone()), c));
        diss.push(dissipation_density(&grid, &st.v.values, &st.d.values, &st.dxq.values, l));
        let (a1, a2) = operator_a(&st, l, g)?;
        let mut r = a1.inner(&st.v)? + a2.inner(&st.dxq)?;
        if let Some(g) = g {
            r += g.inner(&st.v)?;
        }
        source.push(r);
    }
    let di = cumulative_trapezoid(&times, &diss);
    let si = cumulative_trapezoid(&times, &source);
    let lhs: Vec<f64> = (0..n).map(|j| energy[j] + di[j]).collect();
    let rhs: Vec<f64> = (0..n).map(|j| energy[0] + si[j]).collect();
    let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let max_abs_residual = residual.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    Ok(ShiftedEnergyReport { times, lhs, rhs, residual, max_abs_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_unit_director, DomainKind, Grid};
    use crate::solvers::{run_to_steady, SolverConfig};

    fn short_gradient_run(n: usize, steps: usize) -> (Trajectory, FrankConstants) {
        let g = Grid::cube(n, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::new(1.0, 0.8, 1.2).unwrap();
        let cfg = SolverConfig { max_steps: steps, sample_every: 1, ..Default::default() };
        let d = random_unit_director(&g, 3, 1.0);
        let traj = match run_to_steady(d, None, &c, None, &cfg) {
            Ok(t) => t,
            Err(crate::solvers::SolverError::NoConvergence { trajectory, .. }) => *trajectory,
            Err(e) => panic!("{e}"),
        };
        (traj, c)
    }

    #[test]
    fn self_certification_is_exact() {
        let (traj, c) = short_gradient_run(6, 20);
        let pair = TestPair::from_trajectory(&traj).unwrap();
        let r = dissipative_inequality_check(&traj, &pair, &c, None, &CertifyOptions::default()).unwrap();
        assert!(r.min_margin >= -1e-10, "{}", r.min_margin);
        assert!(r.e.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn constant_pair_margin_starts_at_half_energy() {
        let (traj, c) = short_gradient_run(6, 20);
        let d0 = Vec3::e(2);
        let pair = TestPair::constant(d0).unwrap();
        let r = dissipative_inequality_check(&traj, &pair, &c, None, &CertifyOptions::default()).unwrap();
        assert!((r.margin[0] - (0.5 * r.e[0] + r.initial_correction)).abs() <= 1e-14 * (1.0 + r.e[0]));
        assert!(r.k.iter().all(|k| *k == 1.0));
        assert!(r.min_margin >= 0.0);
        let lyap = r.lyapunov_series();
        assert!(lyap.iter().all(|x| *x <= r.e[0] + r.initial_correction + 1e-3));
    }

    #[test]
    fn exponential_weights_compose() {
        let (traj, c) = short_gradient_run(5, 12);
        let pair = TestPair::from_trajectory(&traj).unwrap();
        let r = dissipative_inequality_check(&traj, &pair, &c, None, &CertifyOptions::default()).unwrap();
        let ik = &r.integral_k;
        for s in 0..ik.len() {
            for t in s..ik.len() {
                let lhs = ik[t].exp();
                let rhs = ik[s].exp() * (ik[t] - ik[s]).exp();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
        }
    }

    #[test]
    fn zero_data_energy_check_is_trivial() {
        let g = Grid::cube(4, 1.0, DomainKind::Periodic).unwrap();
        let d = crate::fields::DirectorField::uniform(g, Vec3::e(0)).unwrap();
        let c = FrankConstants::one_constant(1.0).unwrap();
        let l = LeslieCoefficients::new([1.0, 0.3, 0.2, 2.0, 1.0, 1.0], 0.5);
        let traj = run_to_steady(d, Some(crate::fields::VelocityField::zeros(g)), &c, Some(&l), &SolverConfig::default())
            .unwrap();
        let r = energy_inequality_check(&traj, &c, Some(&l), None).unwrap();
        assert!(r.margin.iter().all(|m| *m == 0.0));
    }
}
