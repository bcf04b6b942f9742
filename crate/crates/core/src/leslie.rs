//! Leslie and Ericksen stresses, the corotational rate and the algebraic
//! dissipation identity.

use std::fmt;

use thiserror::Error;

use crate::frank::{density_with_derivatives, FrankConstants, PointState};
use crate::tensor::{cross_matrix, Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeslieError {
    #[error("director is not unit length (|d| = {norm})")]
    NonUnitDirector { norm: f64 },
    #[error("Parodi relation lambda = mu2 + mu3 is violated; identity residual {residual:e}")]
    ParodiViolation { residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeslieCoefficients {
    pub mu: [f64; 6],
    pub lambda: f64,
}

impl LeslieCoefficients {
    pub fn new(mu: [f64; 6], lambda: f64) -> Self {
        LeslieCoefficients { mu, lambda }
    }

    /// Newtonian fluid with viscosity `mu4` and no director coupling.
    pub fn newtonian(mu4: f64) -> Self {
        LeslieCoefficients { mu: [0.0, 0.0, 0.0, mu4, 0.0, 0.0], lambda: 0.0 }
    }

    pub fn parodi_holds(&self) -> bool {
        let rhs = self.mu[1] + self.mu[2];
        (self.lambda - rhs).abs() <= 1e-12 * (1.0 + self.lambda.abs() + rhs.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientViolation {
    Mu1Positive,
    Mu4Positive,
    Mu5Mu6Lambda,
    Parodi,
    NonFinite,
}

impl fmt::Display for CoefficientViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientViolation::Mu1Positive => "μ1 > 0",
            CoefficientViolation::Mu4Positive => "μ4 > 0",
            CoefficientViolation::Mu5Mu6Lambda => "μ5 + μ6 − λ² > 0",
            CoefficientViolation::Parodi => "λ = μ2 + μ3",
            CoefficientViolation::NonFinite => "finite coefficients",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<CoefficientViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.violations.iter().map(|v| format!("\"{v}\"")).collect();
        write!(f, "violated constraints: {}", list.join(", "))
    }
}

pub fn validate_coefficients(c: &LeslieCoefficients) -> ValidationReport {
    let mut violations = Vec::new();
    if !(c.mu.iter().all(|x| x.is_finite()) && c.lambda.is_finite()) {
        violations.push(CoefficientViolation::NonFinite);
        return ValidationReport { violations };
    }
    let [mu1, _, _, mu4, mu5, mu6] = c.mu;
    if mu1 <= 0.0 {
        violations.push(CoefficientViolation::Mu1Positive);
    }
    if mu4 <= 0.0 {
        violations.push(CoefficientViolation::Mu4Positive);
    }
    if mu5 + mu6 - c.lambda * c.lambda <= 0.0 {
        violations.push(CoefficientViolation::Mu5Mu6Lambda);
    }
    if !c.parodi_holds() {
        violations.push(CoefficientViolation::Parodi);
    }
    ValidationReport { violations }
}

/// Pointwise flow quantities. `dv[i][j] = ∂_j v_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowPointState {
    pub d: Vec3,
    pub dv: Mat3,
    pub dt_d: Vec3,
    pub conv_d: Vec3,
    pub q: Vec3,
}

fn check_unit(d: Vec3) -> Result<(), LeslieError> {
    let norm = d.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(LeslieError::NonUnitDirector { norm });
    }
    Ok(())
}

/// `e = ∂t d + (v·∇)d − (∇v)_skw d`
pub fn corotational_rate(s: &FlowPointState) -> Vec3 {
    s.dt_d + s.conv_d - s.dv.skw().mul_vec(s.d)
}

/// Closed-form rate on solutions, `e = −[d]_×ᵀ[d]_× (λ (∇v)_sym d + q)`.
pub fn corotational_substitution(s: &FlowPointState, c: &LeslieCoefficients) -> Result<Vec3, LeslieError> {
    check_unit(s.d)?;
    Ok(substituted_rate(s.d, &s.dv.sym(), s.q, c.lambda))
}

#[inline]
pub(crate) fn substituted_rate(d: Vec3, a: &Mat3, q: Vec3, lambda: f64) -> Vec3 {
    let x = cross_matrix(d);
    -x.transpose().mul_vec(x.mul_vec(a.mul_vec(d) * lambda + q))
}

/// Leslie stress for a given corotational rate `e`.
pub fn leslie_stress(s: &FlowPointState, e: Vec3, c: &LeslieCoefficients) -> Mat3 {
    leslie_stress_parts(s.d, &s.dv.sym(), e, c)
}

#[inline]
pub(crate) fn leslie_stress_parts(d: Vec3, a: &Mat3, e: Vec3, c: &LeslieCoefficients) -> Mat3 {
    let [mu1, mu2, mu3, mu4, mu5, mu6] = c.mu;
    let ad = a.mul_vec(d);
    let dad = d.dot(ad);
    let d_ad = d.outer(ad);
    let d_e = d.outer(e);
    d.outer(d) * (mu1 * dad)
        + *a * mu4
        + d_ad.sym() * (mu5 + mu6)
        + d_e.sym() * (mu2 + mu3)
        + d_ad.skw() * c.lambda
        + d_e.skw()
}

/// Ericksen stress `(∇d)ᵀ F_S(d, ∇d)`.
pub fn ericksen_stress(s: &PointState, c: &FrankConstants) -> Mat3 {
    let (_, fs, _) = density_with_derivatives(s.d, &s.g, c);
    s.g.transpose().matmul(&fs)
}

/// Pointwise dissipation `(μ1+λ²)(d·Ad)² + μ4|A|² + (μ5+μ6−λ²)|Ad|²` of the
/// viscous part, without the `|d×q|²` term.
#[inline]
pub fn viscous_dissipation(d: Vec3, a: &Mat3, c: &LeslieCoefficients) -> f64 {
    let [mu1, _, _, mu4, mu5, mu6] = c.mu;
    let l2 = c.lambda * c.lambda;
    let ad = a.mul_vec(d);
    (mu1 + l2) * d.dot(ad).powi(2) + mu4 * a.norm_sq() + (mu5 + mu6 - l2) * ad.norm_sq()
}

/// Signed difference between the two sides of the dissipation identity
/// `T^L:∇v − (d×Wd)·(d×q) + λ(d×Ad)·(d×q) = (μ1+λ²)(d·Ad)² + μ4|A|² + (μ5+μ6−λ²)|Ad|²`
/// with `e` from [`corotational_substitution`].
pub fn dissipation_identity_residual(s: &FlowPointState, c: &LeslieCoefficients) -> Result<f64, LeslieError> {
    let e = corotational_substitution(s, c)?;
    let a = s.dv.sym();
    let w = s.dv.skw();
    let t = leslie_stress(s, e, c);
    let dxq = s.d.cross(s.q);
    let lhs = t.ddot(&s.dv) - s.d.cross(w.mul_vec(s.d)).dot(dxq) + c.lambda * s.d.cross(a.mul_vec(s.d)).dot(dxq);
    Ok(lhs - viscous_dissipation(s.d, &a, c))
}

/// Absolute identity residual; an error when Parodi's relation fails.
pub fn dissipation_identity_check(s: &FlowPointState, c: &LeslieCoefficients) -> Result<f64, LeslieError> {
    let r = dissipation_identity_residual(s, c)?;
    if !c.parodi_holds() {
        return Err(LeslieError::ParodiViolation { residual: r.abs() });
    }
    Ok(r.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs() -> LeslieCoefficients {
        LeslieCoefficients::new([1.0, 0.5, 0.5, 1.0, 1.0, 1.0], 1.0)
    }

    #[test]
    fn rate_examples() {
        let s = FlowPointState::default();
        assert_eq!(corotational_rate(&s), Vec3::ZERO);
        let s = FlowPointState { dt_d: Vec3::e(0), conv_d: Vec3::e(1), ..Default::default() };
        assert_eq!(corotational_rate(&s), Vec3::new(1.0, 1.0, 0.0));
        let dv = Mat3([[0.0, 2.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let d = Vec3::e(0);
        let s = FlowPointState { d, dv, dt_d: dv.skw().mul_vec(d), ..Default::default() };
        assert_eq!(corotational_rate(&s), Vec3::ZERO);
    }

    #[test]
    fn substitution_examples() {
        let c = coeffs();
        let s = FlowPointState { d: Vec3::e(2), ..Default::default() };
        assert_eq!(corotational_substitution(&s, &c).unwrap(), Vec3::ZERO);
        let s = FlowPointState { d: Vec3::e(2), q: Vec3::e(2) * 3.0, ..Default::default() };
        assert_eq!(corotational_substitution(&s, &c).unwrap(), Vec3::ZERO);
        let s = FlowPointState { d: Vec3::e(2), dv: Mat3::diag(1.0, -1.0, 0.0), ..Default::default() };
        assert_eq!(corotational_substitution(&s, &c).unwrap(), Vec3::ZERO);
        let s = FlowPointState { d: Vec3::new(0.0, 0.0, 2.0), ..Default::default() };
        assert!(corotational_substitution(&s, &c).is_err());
    }

    #[test]
    fn stress_examples() {
        let s = FlowPointState { d: Vec3::e(2), ..Default::default() };
        assert_eq!(leslie_stress(&s, Vec3::ZERO, &coeffs()), Mat3::ZERO);
        let dv = Mat3([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.3, 0.0, 0.0]]);
        let s = FlowPointState { d: Vec3::e(2), dv, ..Default::default() };
        assert_eq!(leslie_stress(&s, Vec3::ZERO, &LeslieCoefficients::newtonian(1.0)), dv.sym());
        let e3 = Vec3::e(2);
        let s = FlowPointState { d: e3, dv: e3.outer(e3), ..Default::default() };
        let c = LeslieCoefficients::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0);
        assert_eq!(leslie_stress(&s, Vec3::ZERO, &c), e3.outer(e3));
    }

    #[test]
    fn ericksen_trace() {
        let c = FrankConstants::from_reduced([1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let s = PointState::new(Vec3::e(2), Mat3::IDENTITY);
        assert_eq!(ericksen_stress(&s, &c).trace(), 9.0);
        assert_eq!(ericksen_stress(&PointState::new(Vec3::e(2), Mat3::ZERO), &c), Mat3::ZERO);
    }

    #[test]
    fn validation_examples() {
        assert!(validate_coefficients(&coeffs()).is_valid());
        let mut c = coeffs();
        c.mu[3] = 0.0;
        let r = validate_coefficients(&c);
        assert_eq!(r.violations, vec![CoefficientViolation::Mu4Positive]);
        assert!(r.to_string().contains("μ4 > 0"));
        let c = LeslieCoefficients::new([1.0, 1.0, 1.0, 1.0, 1.5, 1.5], 2.0);
        assert_eq!(validate_coefficients(&c).violations, vec![CoefficientViolation::Mu5Mu6Lambda]);
    }
}
