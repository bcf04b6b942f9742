//! Small dense tensors on R³ and the contractions used by the elastic energy.
//!
//! Index convention: `Mat3` is row-major, `m.0[i][j]` is entry (i,j). Higher
//! order tensors are flat arrays with the last index fastest.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("constant {name} = {value} must be nonnegative and finite")]
    NegativeConstant { name: &'static str, value: f64 },
    #[error("cross-matrix product identity violated by {deviation:e}")]
    IdentityViolation { deviation: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn e(axis: usize) -> Self {
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        Vec3(v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Returns `self / |self|`; the zero vector is returned unchanged.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn outer(self, o: Vec3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.0[i] * o.0[j];
            }
        }
        Mat3(m)
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = f(i, j);
            }
        }
        Mat3(m)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Builds a matrix whose column `a` is `cols[a]`.
    pub fn from_cols(cols: [Vec3; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| cols[j].0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3(self.0[i])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[j][i])
    }

    pub fn sym(&self) -> Mat3 {
        Mat3::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }

    pub fn skw(&self) -> Mat3 {
        Mat3::from_fn(|i, j| 0.5 * (self.0[i][j] - self.0[j][i]))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3([self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v)])
    }

    /// `selfᵀ v`
    pub fn tmul_vec(&self, v: Vec3) -> Vec3 {
        Vec3([self.col(0).dot(v), self.col(1).dot(v), self.col(2).dot(v)])
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }

    /// Frobenius product `A : B`.
    pub fn ddot(&self, o: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * o.0[i][j];
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        Mat3::from_fn(|i, j| -self.0[i][j])
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] * s)
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, o: Mat3) {
        *self = *self + o;
    }
}

/// Third-order tensor, entry (i,j,k) at `9i + 3j + k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor3(pub [f64; 27]);

impl Default for Tensor3 {
    fn default() -> Self {
        Tensor3([0.0; 27])
    }
}

impl Tensor3 {
    pub const ZERO: Tensor3 = Tensor3([0.0; 27]);

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[9 * i + 3 * j + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, x: f64) {
        self.0[9 * i + 3 * j + k] = x;
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Tensor3 {
        let mut t = [0.0; 27];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t[9 * i + 3 * j + k] = f(i, j, k);
                }
            }
        }
        Tensor3(t)
    }

    /// `A ⊗ h`, entry (i,j,k) = A_ij h_k.
    pub fn mat_vec_outer(a: &Mat3, h: Vec3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| a.0[i][j] * h.0[k])
    }

    /// Product `Γ · A` over the last index: (Γ·A)_ijk = Σ_l Γ_ijl A_lk.
    pub fn dot_mat(&self, a: &Mat3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| (0..3).map(|l| self.get(i, j, l) * a.0[l][k]).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, o: Tensor3) -> Tensor3 {
        let mut t = self.0;
        for (a, b) in t.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        Tensor3(t)
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(self, o: Tensor3) -> Tensor3 {
        let mut t = self.0;
        for (a, b) in t.iter_mut().zip(o.0.iter()) {
            *a -= b;
        }
        Tensor3(t)
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Tensor3;
    fn mul(self, s: f64) -> Tensor3 {
        let mut t = self.0;
        for a in t.iter_mut() {
            *a *= s;
        }
        Tensor3(t)
    }
}

/// Fourth-order tensor, entry (i,j,k,l) at `27i + 9j + 3k + l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4(pub [f64; 81]);

impl Tensor4 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[27 * i + 9 * j + 3 * k + l]
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Tensor4 {
        let mut t = [0.0; 81];
        for (n, x) in t.iter_mut().enumerate() {
            *x = f(n / 27, (n / 9) % 3, (n / 3) % 3, n % 3);
        }
        Tensor4(t)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// Fifth-order tensor, entry (i,j,k,l,m) at `81i + 27j + 9k + 3l + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor5(pub Box<[f64; 243]>);

impl Tensor5 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.0[81 * i + 27 * j + 9 * k + 3 * l + m]
    }
}

/// Sixth-order tensor, entry (i,j,k,l,m,n) at `243i + 81j + 27k + 9l + 3m + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor6(pub Box<[f64; 729]>);

impl Tensor6 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize, n: usize) -> f64 {
        self.0[243 * i + 81 * j + 27 * k + 9 * l + 3 * m + n]
    }

    pub fn from_fn(f: impl Fn([usize; 6]) -> f64) -> Tensor6 {
        let mut t = Box::new([0.0; 729]);
        for (n, x) in t.iter_mut().enumerate() {
            let idx = [n / 243, (n / 81) % 3, (n / 27) % 3, (n / 9) % 3, (n / 3) % 3, n % 3];
            *x = f(idx);
        }
        Tensor6(t)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Levi-Civita symbol ε_ijk.
#[inline]
pub fn levi(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn levi_civita() -> Tensor3 {
    Tensor3::from_fn(levi)
}

/// Skew matrix `[h]_×` with `[h]_× b = h × b`.
pub fn cross_matrix(h: Vec3) -> Mat3 {
    let [h1, h2, h3] = h.0;
    Mat3([[0.0, -h3, h2], [h3, 0.0, -h1], [-h2, h1, 0.0]])
}

/// Left inverse of [`cross_matrix`]: reads entries (3,2), (1,3), (2,1).
pub fn vee(a: &Mat3) -> Vec3 {
    Vec3([a.0[2][1], a.0[0][2], a.0[1][0]])
}

/// Computes `[a]_×ᵀ [b]_×` and checks it against `(a·b) I − b ⊗ a`.
pub fn cross_matrix_product_identity(a: Vec3, b: Vec3) -> Result<Mat3, TensorError> {
    let prod = cross_matrix(a).transpose().matmul(&cross_matrix(b));
    let closed = Mat3::IDENTITY * a.dot(b) - b.outer(a);
    let deviation = (prod - closed).max_abs();
    let scale = 1.0 + a.norm() * b.norm();
    if deviation > 1e-14 * scale {
        return Err(TensorError::IdentityViolation { deviation });
    }
    Ok(prod)
}

fn check_constant(name: &'static str, value: f64) -> Result<(), TensorError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(TensorError::NegativeConstant { name, value })
    }
}

/// Dense 4th-order splay/twist tensor
/// Λ_ijkl = k1 δij δkl + k2 (δik δjl − δil δjk).
pub fn build_lambda(k1: f64, k2: f64) -> Result<Tensor4, TensorError> {
    check_constant("k1", k1)?;
    check_constant("k2", k2)?;
    Ok(Tensor4::from_fn(|i, j, k, l| {
        k1 * delta(i, j) * delta(k, l) + k2 * (delta(i, k) * delta(j, l) - delta(i, l) * delta(j, k))
    }))
}

/// Dense 6th-order tensor carrying the k3, k4, k5 terms, literal Kronecker form.
pub fn build_theta(k3: f64, k4: f64, k5: f64) -> Result<Tensor6, TensorError> {
    check_constant("k3", k3)?;
    check_constant("k4", k4)?;
    check_constant("k5", k5)?;
    Ok(Tensor6::from_fn(|[i, j, k, l, m, n]| {
        let d = delta;
        k3 * d(i, j) * d(l, m) * d(k, n)
            + k4 * (d(k, n) * d(j, m) * d(i, l) + d(k, m) * d(j, l) * d(i, n) + d(k, l) * d(j, n) * d(i, m)
                - d(k, n) * d(j, l) * d(i, m)
                - d(k, m) * d(j, n) * d(i, l)
                - d(k, l) * d(j, m) * d(i, n))
            + k5 * (d(i, l) * d(m, n) * d(j, k) - d(m, i) * d(l, n) * d(j, k) - d(l, j) * d(m, n) * d(i, k)
                + d(j, m) * d(l, n) * d(i, k))
    }))
}

/// Γ : A, contracting the last two indices.
pub fn contract_3_2(g: &Tensor3, a: &Mat3) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..3 {
            for k in 0..3 {
                *o += g.get(i, j, k) * a.0[j][k];
            }
        }
    }
    Vec3(out)
}

/// Λ : A
pub fn contract_4_2(t: &Tensor4, a: &Mat3) -> Mat3 {
    Mat3::from_fn(|i, j| {
        let mut s = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                s += t.get(i, j, k, l) * a.0[k][l];
            }
        }
        s
    })
}

/// Θ ⋮ Γ, contracting the last three indices of Θ.
pub fn contract_6_3(t: &Tensor6, g: &Tensor3) -> Tensor3 {
    let mut out = [0.0; 27];
    for (ijk, o) in out.iter_mut().enumerate() {
        let row = &t.0[27 * ijk..27 * ijk + 27];
        *o = row.iter().zip(g.0.iter()).map(|(a, b)| a * b).sum();
    }
    Tensor3(out)
}

/// A : Θ, contracting the first two indices of Θ.
pub fn contract_2_6(a: &Mat3, t: &Tensor6) -> Tensor4 {
    let mut out = [0.0; 81];
    for i in 0..3 {
        for j in 0..3 {
            let w = a.0[i][j];
            let base = 243 * i + 81 * j;
            for (o, x) in out.iter_mut().zip(t.0[base..base + 81].iter()) {
                *o += w * x;
            }
        }
    }
    Tensor4(out)
}

/// a · Θ, contracting the third index of Θ: (a·Θ)_ijlmn = Σ_k a_k Θ_ijklmn.
pub fn contract_1_6(a: Vec3, t: &Tensor6) -> Tensor5 {
    let mut out = Box::new([0.0; 243]);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let base = 243 * i + 81 * j + 27 * k;
                let ob = 81 * i + 27 * j;
                for r in 0..27 {
                    out[ob + r] += a.0[k] * t.0[base + r];
                }
            }
        }
    }
    Tensor5(out)
}

/// X ⋮ Y
pub fn full_contract_3_3(x: &Tensor3, y: &Tensor3) -> f64 {
    x.0.iter().zip(y.0.iter()).map(|(a, b)| a * b).sum()
}

/// Υ : A, i.e. (Υ:A)_i = Σ_jk ε_ijk A_jk.
pub fn levi_contract(a: &Mat3) -> Vec3 {
    let m = &a.0;
    Vec3([m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]])
}

/// Structured Λ : A = k1 tr(A) I + k2 (A − Aᵀ).
pub fn apply_lambda(k1: f64, k2: f64, a: &Mat3) -> Mat3 {
    Mat3::IDENTITY * (k1 * a.trace()) + (*a - a.transpose()) * k2
}

/// Structured Θ ⋮ Y using the Kronecker structure of Θ.
pub fn apply_theta(k3: f64, k4: f64, k5: f64, y: &Tensor3) -> Tensor3 {
    // partial traces
    let mut t12 = [0.0; 3]; // Σ_l Y_llk
    let mut t23 = [0.0; 3]; // Σ_m Y_imm
    let mut t13 = [0.0; 3]; // Σ_l Y_lil
    for a in 0..3 {
        for l in 0..3 {
            t12[a] += y.get(l, l, a);
            t23[a] += y.get(a, l, l);
            t13[a] += y.get(l, a, l);
        }
    }
    Tensor3::from_fn(|i, j, k| {
        let alt = y.get(i, j, k) + y.get(j, k, i) + y.get(k, i, j)
            - y.get(j, i, k)
            - y.get(i, k, j)
            - y.get(k, j, i);
        let k5_part = delta(j, k) * (t23[i] - t13[i]) - delta(i, k) * (t23[j] - t13[j]);
        k3 * delta(i, j) * t12[k] + k4 * alt + k5 * k5_part
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_matrix_of_e1() {
        let m = cross_matrix(Vec3::e(0));
        assert_eq!(m, Mat3([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]));
        assert_eq!(cross_matrix(Vec3::ZERO), Mat3::ZERO);
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(4.0, 5.0, 6.0);
        assert_eq!(cross_matrix(a).mul_vec(b), Vec3::new(-3.0, 6.0, -3.0));
    }

    #[test]
    fn vee_examples() {
        assert_eq!(vee(&cross_matrix(Vec3::new(1.0, 2.0, 3.0))), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(vee(&Mat3::IDENTITY), Vec3::ZERO);
        let mut a = Mat3::ZERO;
        a.0[2][1] = 5.0;
        assert_eq!(vee(&a), Vec3::new(5.0, 0.0, 0.0));
    }

    #[test]
    fn product_identity_examples() {
        let e1 = Vec3::e(0);
        let e2 = Vec3::e(1);
        assert_eq!(cross_matrix_product_identity(e1, e1).unwrap(), Mat3::diag(0.0, 1.0, 1.0));
        let m = cross_matrix_product_identity(e1, e2).unwrap();
        let mut expect = Mat3::ZERO;
        expect.0[1][0] = -1.0;
        assert_eq!(m, expect);
        assert_eq!(cross_matrix_product_identity(Vec3::ZERO, e2).unwrap(), Mat3::ZERO);
    }

    #[test]
    fn lambda_examples() {
        let l = build_lambda(1.0, 0.0).unwrap();
        let i = Mat3::IDENTITY;
        assert_eq!(i.ddot(&contract_4_2(&l, &i)), 9.0);

        let l = build_lambda(0.0, 1.0).unwrap();
        let mut s = Mat3::ZERO;
        s.0[0][1] = 1.0;
        s.0[1][0] = -1.0;
        let mut oracle = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        oracle += s.0[a][b] * l.get(a, b, c, d) * s.0[c][d];
                    }
                }
            }
        }
        assert_eq!(oracle, 4.0);
        assert_eq!(s.ddot(&contract_4_2(&l, &s)), oracle);

        let l = build_lambda(2.0, 3.0).unwrap();
        let ab = Vec3::e(0).outer(Vec3::e(1));
        assert_eq!(ab.ddot(&contract_4_2(&l, &ab)), 3.0);
        assert!(build_lambda(-1.0, 1.0).is_err());
    }

    #[test]
    fn theta_examples() {
        let t = build_theta(0.0, 0.0, 0.0).unwrap();
        assert!(t.0.iter().all(|&x| x == 0.0));
        let t = build_theta(1.0, 0.0, 0.0).unwrap();
        let x = Tensor3::mat_vec_outer(&Mat3::IDENTITY, Vec3::e(2));
        assert_eq!(full_contract_3_3(&x, &contract_6_3(&t, &x)), 9.0);
        assert!(build_theta(1.0, -0.5, 0.0).is_err());
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(levi_contract(&Vec3::e(0).outer(Vec3::e(1))), Vec3::e(2));
        let l = build_lambda(1.0, 1.0).unwrap();
        assert_eq!(contract_4_2(&l, &Mat3::ZERO), Mat3::ZERO);
        let mut x = Tensor3::ZERO;
        x.set(0, 1, 2, 2.0);
        assert_eq!(full_contract_3_3(&x, &x), 4.0);
        let eps = levi_civita();
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(1.5, 0.7, -0.4);
        let via = contract_3_2(&eps, &a.outer(b));
        assert!((via - a.cross(b)).max_abs() < 1e-15);
    }
}
