//! Projected gradient flow `∂t d = −(I − d⊗d) q` of the director.

use super::{
    advance_director, cross_field, resolve_dt, stability_bound, Integrator, SolverConfig, SolverError, StepReport,
};
use crate::fields::{DirectorField, Field, StepRecord, TrajectorySample};
use crate::frank::{energy_gradient, EnergyGradient, FrankConstants};
use crate::tensor::Vec3;

/// Gradient-flow integrator; caches the energy gradient of the current state.
pub struct GradientFlow<'a> {
    c: &'a FrankConstants,
    cfg: &'a SolverConfig,
    dt: f64,
    time: f64,
    d: DirectorField,
    eg: EnergyGradient,
    tangential: Vec<Vec3>,
}

fn tangential(d: &[Vec3], q: &[Vec3]) -> Vec<Vec3> {
    d.iter().zip(q).map(|(d, q)| *q - *d * d.dot(*q)).collect()
}

impl<'a> GradientFlow<'a> {
    pub fn new(d: DirectorField, c: &'a FrankConstants, cfg: &'a SolverConfig) -> Result<Self, SolverError> {
        let grid = *d.grid();
        cfg.validate(&grid)?;
        let bound = stability_bound(&grid, c, None, cfg.magnetic.as_ref(), 0.0, cfg.cfl_factor);
        let dt = resolve_dt(cfg, bound)?;
        let eg = energy_gradient(&d, c, cfg.magnetic_pair());
        let tangential = tangential(d.values(), &eg.q);
        Ok(GradientFlow { c, cfg, dt, time: 0.0, d, eg, tangential })
    }

    pub fn director(&self) -> &DirectorField {
        &self.d
    }

    pub fn into_director(self) -> DirectorField {
        self.d
    }

    pub fn energy(&self) -> f64 {
        self.eg.energy()
    }

    /// `‖(I − d⊗d) q‖² = ‖d×q‖²`.
    pub fn dissipation_rate(&self) -> f64 {
        let grid = self.d.grid();
        grid.integrate_with(|i| self.tangential[i].norm_sq())
    }

    pub fn step(&mut self) -> Result<StepReport, SolverError> {
        let rate: Vec<Vec3> = self.tangential.iter().map(|x| -*x).collect();
        let energy_before = self.energy();
        let dissipation = self.dt * self.dissipation_rate();
        let d = advance_director(&self.d, &rate, self.dt, self.cfg.scheme)?;
        self.eg = energy_gradient(&d, self.c, self.cfg.magnetic_pair());
        self.tangential = tangential(d.values(), &self.eg.q);
        self.d = d;
        self.time += self.dt;
        Ok(StepReport {
            time: self.time,
            energy_before,
            energy_after: self.energy(),
            dissipation,
            norm_drift: self.d.max_norm_drift(),
            divergence_residual: 0.0,
        })
    }
}

impl Integrator for GradientFlow<'_> {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn record(&self) -> StepRecord {
        let rate = self.dissipation_rate();
        StepRecord {
            time: self.time,
            elastic: self.eg.elastic,
            magnetic: self.eg.magnetic,
            kinetic: 0.0,
            dissipation: rate,
            forcing_power: 0.0,
            dxq_norm: rate.sqrt(),
            sym_grad_norm: 0.0,
        }
    }

    fn sample(&self) -> TrajectorySample {
        let grid = *self.d.grid();
        TrajectorySample {
            time: self.time,
            d: self.d.field().clone(),
            v: Field::zeros(grid),
            dxq: cross_field(&grid, self.d.values(), &self.eg.q),
        }
    }

    fn advance(&mut self) -> Result<StepReport, SolverError> {
        self.step()
    }

    fn coupled(&self) -> bool {
        false
    }
}

/// One gradient-flow step from `d`.
pub fn gradient_flow_step(
    d: &DirectorField,
    c: &FrankConstants,
    cfg: &SolverConfig,
) -> Result<(DirectorField, StepReport), SolverError> {
    let mut flow = GradientFlow::new(d.clone(), c, cfg)?;
    let report = flow.step()?;
    Ok((flow.into_director(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_unit_director, DomainKind, Grid};
    use crate::solvers::Scheme;

    #[test]
    fn descent_and_unit_norm() {
        let g = Grid::cube(8, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::new(1.0, 0.8, 1.3).unwrap();
        for scheme in [Scheme::ProjectedExplicit, Scheme::RotationExponential] {
            let cfg = SolverConfig { scheme, ..Default::default() };
            let mut flow = GradientFlow::new(random_unit_director(&g, 2, 1.0), &c, &cfg).unwrap();
            for _ in 0..20 {
                let r = flow.step().unwrap();
                assert!(r.energy_after <= r.energy_before + 1e-10 * (1.0 + r.energy_before));
                assert!(r.norm_drift <= 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_boundary_is_untouched() {
        let g = Grid::cube(6, 1.0, DomainKind::Dirichlet).unwrap();
        let d = random_unit_director(&g, 4, 1.0).with_boundary_value(Vec3::e(2)).unwrap();
        let c = FrankConstants::one_constant(1.0).unwrap();
        let (d1, _) = gradient_flow_step(&d, &c, &SolverConfig::default()).unwrap();
        for i in 0..g.len() {
            if g.is_boundary(i) {
                assert_eq!(d1.values()[i], d.values()[i]);
            }
        }
    }
}
