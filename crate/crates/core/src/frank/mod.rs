//! Oseen-Frank elastic energy: pointwise density, its partial derivatives,
//! the variational derivative `q`, and the magnetic extension.

mod field;

pub use field::{
    compact_variational_derivative, energy_gradient, field_energy, magnetic_energy,
    one_sided_gradients, EnergyGradient,
};
pub(crate) use field::gradient_samples;

use thiserror::Error;

use crate::tensor::{
    apply_lambda, apply_theta, build_lambda, build_theta, contract_4_2, contract_6_3,
    cross_matrix, levi, levi_contract, Mat3, Tensor3, Tensor4, Tensor6, TensorError, Vec3,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrankError {
    #[error("elastic modulus {name} = {value} must be positive and finite")]
    NonpositiveModulus { name: &'static str, value: f64 },
    #[error("elastic constant {name} = {value} must be nonnegative and finite")]
    NegativeConstant { name: &'static str, value: f64 },
    #[error("susceptibilities violate {constraint} (chi_par = {chi_par}, chi_perp = {chi_perp})")]
    Susceptibility { constraint: &'static str, chi_par: f64, chi_perp: f64 },
    #[error("second derivatives of the director are required")]
    MissingSecondDerivatives,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Elastic constants. Stores the reformulated constants k1..k5; the moduli
/// K1, K2, K3 are recovered on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrankConstants {
    pub k: [f64; 5],
}

impl FrankConstants {
    /// Splay, twist and bend moduli K1, K2, K3.
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self, FrankError> {
        for (name, value) in [("K1", k1), ("K2", k2), ("K3", k3)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(FrankError::NonpositiveModulus { name, value });
            }
        }
        let kk2 = 0.5 * k2.min(k3);
        Ok(FrankConstants { k: [0.5 * k1, kk2, 0.5 * k1, k2 - kk2, k3 - kk2] })
    }

    pub fn one_constant(k: f64) -> Result<Self, FrankError> {
        Self::new(k, k, k)
    }

    /// Sets k1..k5 directly (each must be nonnegative).
    pub fn from_reduced(k: [f64; 5]) -> Result<Self, FrankError> {
        const NAMES: [&str; 5] = ["k1", "k2", "k3", "k4", "k5"];
        for (name, &value) in NAMES.iter().zip(k.iter()) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(FrankError::NegativeConstant { name, value });
            }
        }
        Ok(FrankConstants { k })
    }

    /// (K1, K2, K3)
    pub fn moduli(&self) -> [f64; 3] {
        [2.0 * self.k[0], self.k[1] + self.k[3], self.k[1] + self.k[4]]
    }

    pub fn lambda(&self) -> Tensor4 {
        build_lambda(self.k[0], self.k[1]).expect("constants validated at construction")
    }

    pub fn theta(&self) -> Tensor6 {
        build_theta(self.k[2], self.k[3], self.k[4]).expect("constants validated at construction")
    }

    /// Default coercivity constant min{k1,k2}/2.
    pub fn coercivity(&self) -> f64 {
        0.5 * self.k[0].min(self.k[1])
    }

    /// Squared Frobenius norm `|Θ|²` of the sixth-order tensor.
    pub fn theta_norm_sq(&self) -> f64 {
        self.theta().norm_sq()
    }

    /// Sum used by the explicit stability estimate.
    pub fn stiffness(&self) -> f64 {
        let k = &self.k;
        k[0] + k[1] + k[2] + k[3] + 4.0 * k[4]
    }
}

/// Magnetic susceptibilities (both negative, parallel above perpendicular).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagneticParams {
    pub chi_par: f64,
    pub chi_perp: f64,
}

impl MagneticParams {
    pub fn new(chi_par: f64, chi_perp: f64) -> Result<Self, FrankError> {
        let err = |constraint| Err(FrankError::Susceptibility { constraint, chi_par, chi_perp });
        if !(chi_par.is_finite() && chi_perp.is_finite()) {
            return err("finite values");
        }
        if chi_par >= 0.0 {
            return err("chi_par < 0");
        }
        if chi_perp >= 0.0 {
            return err("chi_perp < 0");
        }
        if chi_par - chi_perp <= 0.0 {
            return err("chi_par - chi_perp > 0");
        }
        Ok(MagneticParams { chi_par, chi_perp })
    }

    /// Added terms of the magnetic variational derivative.
    pub fn q_addition(&self, d: Vec3, h: Vec3) -> Vec3 {
        h * (-self.chi_par * d.dot(h)) + h.cross(h.cross(d)) * self.chi_perp
    }

    pub fn density(&self, d: Vec3, h: Vec3) -> f64 {
        let dh = d.dot(h);
        -0.5 * self.chi_par * dh * dh - 0.5 * self.chi_perp * d.cross(h).norm_sq()
    }
}

/// Pointwise sample of the director and its derivatives.
///
/// `g[i][j] = ∂_j d_i`, `h2.get(i,j,k) = ∂_j ∂_k d_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointState {
    pub d: Vec3,
    pub g: Mat3,
    pub h2: Option<Tensor3>,
    pub h_field: Option<Vec3>,
}

impl PointState {
    pub fn new(d: Vec3, g: Mat3) -> Self {
        PointState { d, g, h2: None, h_field: None }
    }

    pub fn with_second(mut self, h2: Tensor3) -> Self {
        self.h2 = Some(h2);
        self
    }

    pub fn with_field(mut self, h: Vec3) -> Self {
        self.h_field = Some(h);
        self
    }

    pub fn div(&self) -> f64 {
        self.g.trace()
    }

    pub fn curl(&self) -> Vec3 {
        levi_contract(&self.g.transpose())
    }
}

pub fn energy_density_raw(s: &PointState, c: &FrankConstants) -> f64 {
    let [k1, k2, k3, k4, k5] = c.k;
    let div = s.div();
    let curl = s.curl();
    let dd = s.d.norm_sq();
    0.5 * k1 * div * div
        + 0.5 * k2 * curl.norm_sq()
        + 0.5 * k3 * dd * div * div
        + 0.5 * k4 * s.d.dot(curl).powi(2)
        + 0.5 * k5 * s.d.cross(curl).norm_sq()
}

/// `½ (G:Λ:G + G⊗d ⋮ Θ ⋮ G⊗d)` through the structured contractions.
pub fn energy_density_tensor(s: &PointState, c: &FrankConstants) -> f64 {
    let [k1, k2, k3, k4, k5] = c.k;
    let x = Tensor3::mat_vec_outer(&s.g, s.d);
    let lg = apply_lambda(k1, k2, &s.g);
    let tx = apply_theta(k3, k4, k5, &x);
    0.5 * (s.g.ddot(&lg) + crate::tensor::full_contract_3_3(&x, &tx))
}

/// Same quadratic form as [`energy_density_tensor`] with dense tensors.
pub fn energy_density_dense(s: &PointState, lambda: &Tensor4, theta: &Tensor6) -> f64 {
    let x = Tensor3::mat_vec_outer(&s.g, s.d);
    0.5 * (s.g.ddot(&contract_4_2(lambda, &s.g))
        + crate::tensor::full_contract_3_3(&x, &contract_6_3(theta, &x)))
}

/// Density together with its partial derivatives in `S = ∇d` and in `h = d`.
#[inline]
pub fn density_with_derivatives(d: Vec3, g: &Mat3, c: &FrankConstants) -> (f64, Mat3, Vec3) {
    let [k1, k2, k3, k4, k5] = c.k;
    let tr = g.trace();
    let cu = levi_contract(&g.transpose());
    let dd = d.norm_sq();
    let dc = d.dot(cu);
    let cxd = cu.cross(d);
    let dxc = -cxd;
    let energy = 0.5 * k1 * tr * tr
        + 0.5 * k2 * cu.norm_sq()
        + 0.5 * k3 * dd * tr * tr
        + 0.5 * k4 * dc * dc
        + 0.5 * k5 * dxc.norm_sq();

    let mut fs = cross_matrix(cu) * k2 + cross_matrix(d) * (k4 * dc);
    let iso = k1 * tr + k3 * tr * dd;
    for i in 0..3 {
        fs.0[i][i] += iso;
    }
    // 2 k5 ((c×d)⊗d)_skw
    let w = cxd;
    for i in 0..3 {
        for j in 0..3 {
            fs.0[i][j] += k5 * (w.0[i] * d.0[j] - d.0[i] * w.0[j]);
        }
    }
    let fh = d * (k3 * tr * tr) + cu * (k4 * dc) + (d * cu.norm_sq() - cu * dc) * k5;
    (energy, fs, fh)
}

pub fn df_ds(s: &PointState, c: &FrankConstants) -> Mat3 {
    density_with_derivatives(s.d, &s.g, c).1
}

pub fn df_dh(s: &PointState, c: &FrankConstants) -> Vec3 {
    density_with_derivatives(s.d, &s.g, c).2
}

fn second(s: &PointState) -> Result<&Tensor3, FrankError> {
    s.h2.as_ref().ok_or(FrankError::MissingSecondDerivatives)
}

/// Variational derivative in tensor form,
/// `q = −div(Λ:∇d) − div(d·Θ⋮∇d⊗d) + ∇d:Θ⋮∇d⊗d`, expanded by the product rule.
pub fn variational_derivative_point(s: &PointState, c: &FrankConstants) -> Result<Vec3, FrankError> {
    let h2 = second(s)?;
    let [k1, k2, k3, k4, k5] = c.k;
    let (d, g) = (s.d, &s.g);
    let x = Tensor3::mat_vec_outer(g, d);
    let tx = apply_theta(k3, k4, k5, &x);

    let mut q = Vec3::ZERO;
    // −div(Λ:∇d): Λ:∂_j G is linear, so apply it to each slice.
    for j in 0..3 {
        let dg = Mat3::from_fn(|a, b| h2.get(a, b, j));
        let l = apply_lambda(k1, k2, &dg);
        for i in 0..3 {
            q.0[i] -= l.0[i][j];
        }
    }
    // −div(d·Θ⋮X) = −Σ_jk G_kj (Θ⋮X)_ijk − Σ_jk d_k (Θ⋮∂_j X)_ijk
    for j in 0..3 {
        let dx = Tensor3::from_fn(|l, m, n| h2.get(l, m, j) * d.0[n] + g.0[l][m] * g.0[n][j]);
        let tdx = apply_theta(k3, k4, k5, &dx);
        for i in 0..3 {
            for k in 0..3 {
                q.0[i] -= g.0[k][j] * tx.get(i, j, k) + d.0[k] * tdx.get(i, j, k);
            }
        }
    }
    // + ∇d : Θ⋮X
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                q.0[k] += g.0[i][j] * tx.get(i, j, k);
            }
        }
    }
    Ok(q)
}

/// Variational derivative written in the splay/twist/bend constants with
/// div/curl operators expanded in (d, ∇d, ∇²d).
pub fn variational_derivative_kform(s: &PointState, c: &FrankConstants) -> Result<Vec3, FrankError> {
    let h2 = second(s)?;
    Ok(kform_q(s.d, &s.g, h2, c))
}

#[inline]
pub(crate) fn kform_q(d: Vec3, g: &Mat3, h2: &Tensor3, c: &FrankConstants) -> Vec3 {
    let [k1, k2, k3, k4, k5] = c.k;
    let div = g.trace();
    let cu = levi_contract(&g.transpose());
    let dd = d.norm_sq();

    let mut grad_div = Vec3::ZERO;
    let mut lap = Vec3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            grad_div.0[i] += h2.get(j, j, i);
            lap.0[i] += h2.get(i, j, j);
        }
    }
    let curl_curl = grad_div - lap;
    let gt_d = g.tmul_vec(d);
    let grad_div_dd = grad_div * dd + gt_d * (2.0 * div);

    // s = d·curl d and its gradient
    let s = d.dot(cu);
    let mut grad_s = g.tmul_vec(cu);
    for j in 0..3 {
        // ∂_j curl_i = Σ ε_ikl ∂_j ∂_k d_l
        let mut dcurl = Vec3::ZERO;
        for i in 0..3 {
            for kk in 0..3 {
                for l in 0..3 {
                    let e = levi(i, kk, l);
                    if e != 0.0 {
                        dcurl.0[i] += e * h2.get(l, kk, j);
                    }
                }
            }
        }
        grad_s.0[j] += d.dot(dcurl);
    }
    let div_k4 = d.cross(grad_s) - cu * s;

    // div((W d ⊗ d)_skw) with W = (∇d)_skw
    let w = g.skw();
    let u = w.mul_vec(d);
    let mut grad_u = Mat3::ZERO; // [i][j] = ∂_j u_i
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 0.0;
            for kk in 0..3 {
                let dw = 0.5 * (h2.get(i, kk, j) - h2.get(kk, i, j));
                v += dw * d.0[kk] + w.0[i][kk] * g.0[kk][j];
            }
            grad_u.0[i][j] = v;
        }
    }
    let div_u = grad_u.trace();
    let div_k5 = (grad_u.mul_vec(d) + u * div - g.mul_vec(u) - d * div_u) * 0.5;

    let wtw_d = w.transpose().mul_vec(u);
    grad_div * (-k1) + curl_curl * k2 - grad_div_dd * k3 - div_k4 * k4 - div_k5 * (4.0 * k5)
        + d * (k3 * div * div)
        + cu * (k4 * s)
        + wtw_d * (4.0 * k5)
}

/// Tensor form of `q` evaluated with dense Λ and Θ.
pub fn variational_derivative_dense(
    s: &PointState,
    lambda: &Tensor4,
    theta: &Tensor6,
) -> Result<Vec3, FrankError> {
    let h2 = second(s)?;
    let (d, g) = (s.d, &s.g);
    let x = Tensor3::mat_vec_outer(g, d);
    let tx = contract_6_3(theta, &x);
    let mut q = Vec3::ZERO;
    for i in 0..3 {
        let mut acc = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    acc -= lambda.get(i, j, k, l) * h2.get(k, l, j);
                }
            }
        }
        for j in 0..3 {
            for k in 0..3 {
                acc -= g.0[k][j] * tx.get(i, j, k);
                let mut inner = 0.0;
                for l in 0..3 {
                    for m in 0..3 {
                        for n in 0..3 {
                            let dx = h2.get(l, m, j) * d.0[n] + g.0[l][m] * g.0[n][j];
                            inner += theta.get(i, j, k, l, m, n) * dx;
                        }
                    }
                }
                acc -= d.0[k] * inner;
            }
        }
        q.0[i] = acc;
    }
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                q.0[k] += g.0[i][j] * tx.get(i, j, k);
            }
        }
    }
    Ok(q)
}

/// Magnetic density `−(χ∥/2)(d·H)² − (χ⊥/2)|d×H|²`; zero when no field is set.
pub fn magnetic_density(s: &PointState, m: &MagneticParams) -> f64 {
    match s.h_field {
        Some(h) => m.density(s.d, h),
        None => 0.0,
    }
}

/// `q_H = q − χ∥(d·H)H + χ⊥ H×(H×d)`.
pub fn variational_derivative_magnetic(
    s: &PointState,
    c: &FrankConstants,
    m: &MagneticParams,
) -> Result<Vec3, FrankError> {
    let q = variational_derivative_point(s, c)?;
    Ok(match s.h_field {
        Some(h) => q + m.q_addition(s.d, h),
        None => q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(d: Vec3, g: Mat3) -> PointState {
        PointState::new(d, g)
    }

    #[test]
    fn reduced_constants() {
        let c = FrankConstants::new(2.0, 1.0, 3.0).unwrap();
        assert_eq!(c.k, [1.0, 0.5, 1.0, 0.5, 2.5]);
        assert_eq!(c.moduli(), [2.0, 1.0, 3.0]);
        let c = FrankConstants::new(2.0, 4.0, 3.0).unwrap();
        assert_eq!(c.k, [1.0, 1.5, 1.0, 2.5, 1.5]);
        assert!(FrankConstants::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn density_examples() {
        let c = FrankConstants::new(2.0, 1.0, 1.0).unwrap();
        let s = state(Vec3::e(2), Mat3::ZERO);
        assert_eq!(energy_density_raw(&s, &c), 0.0);
        assert_eq!(energy_density_tensor(&s, &c), 0.0);
        // d = e3, G = e1⊗e1: div 1, curl 0
        let s = state(Vec3::e(2), Vec3::e(0).outer(Vec3::e(0)));
        assert_eq!(energy_density_raw(&s, &c), 1.0);
        assert!((energy_density_tensor(&s, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let c = FrankConstants::from_reduced([1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let s = state(Vec3::new(0.3, 0.4, 0.5), Mat3::IDENTITY);
        assert_eq!(df_ds(&s, &c), Mat3::IDENTITY * 3.0);
        let c = FrankConstants::from_reduced([0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let s = state(Vec3::e(2), Mat3::IDENTITY);
        assert_eq!(df_dh(&s, &c), Vec3::e(2) * 9.0);
        let s = state(Vec3::e(2), Mat3::ZERO);
        assert_eq!(df_ds(&s, &c), Mat3::ZERO);
        assert_eq!(df_dh(&s, &c), Vec3::ZERO);
    }

    #[test]
    fn q_requires_second_derivatives() {
        let c = FrankConstants::one_constant(1.0).unwrap();
        let s = state(Vec3::e(2), Mat3::ZERO);
        assert_eq!(variational_derivative_point(&s, &c), Err(FrankError::MissingSecondDerivatives));
        let s = s.with_second(Tensor3::ZERO);
        assert_eq!(variational_derivative_point(&s, &c).unwrap(), Vec3::ZERO);
    }

    #[test]
    fn magnetic_examples() {
        let m = MagneticParams::new(-1.0, -2.0).unwrap();
        let s = state(Vec3::e(0), Mat3::ZERO).with_field(Vec3::e(2));
        assert_eq!(magnetic_density(&s, &m), 1.0);
        let s0 = state(Vec3::e(0), Mat3::ZERO).with_field(Vec3::ZERO);
        assert_eq!(magnetic_density(&s0, &m), 0.0);
        assert!(MagneticParams::new(-2.0, -1.0).is_err());
        assert!(MagneticParams::new(1.0, -1.0).is_err());
        // aligned uniform director: d × q_H = 0
        let c = FrankConstants::one_constant(1.0).unwrap();
        let h = Vec3::new(0.0, 0.0, 2.0);
        let s = state(Vec3::e(2), Mat3::ZERO).with_field(h).with_second(Tensor3::ZERO);
        let qh = variational_derivative_magnetic(&s, &c, &m).unwrap();
        assert_eq!(s.d.cross(qh), Vec3::ZERO);
        assert_eq!(qh, Vec3::e(2) * 4.0);
    }
}
