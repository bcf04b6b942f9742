//! Pointwise-in-time functionals comparing a state `(v, d, d×q)` with a test
//! pair state.

use super::{DiagnosticsError, PairState};
use crate::fields::{pairwise_sum, Field, Grid};
use crate::frank::{gradient_samples, FrankConstants, MagneticParams};
use crate::leslie::{leslie_stress_parts, substituted_rate, LeslieCoefficients};
use crate::tensor::{apply_lambda, apply_theta, full_contract_3_3, levi_contract, Mat3, Tensor3, Vec3};

fn check_grid(grid: &Grid, fields: &[&Field<Vec3>]) -> Result<(), DiagnosticsError> {
    if fields.iter().all(|f| f.grid == *grid) {
        Ok(())
    } else {
        Err(DiagnosticsError::GridMismatch)
    }
}

/// Weighted node average over aligned one-sided gradient samples of `d` and
/// `d̃`; the quadrature matches the discrete Oseen-Frank energy.
fn sample_average<const N: usize>(
    d: &Field<Vec3>,
    dt: &Field<Vec3>,
    f: impl Fn(Vec3, &Mat3, Vec3, &Mat3) -> [f64; N] + Sync + Send,
) -> [f64; N] {
    let grid = d.grid;
    let gs = gradient_samples(d);
    let gt = gradient_samples(dt);
    let per_node = grid.map_nodes(|i| {
        let (a, b) = (&gs[i], &gt[i]);
        let mut acc = [0.0; N];
        for ((ma, ga), (mb, gb)) in a.iter().zip(b) {
            debug_assert_eq!(ma, mb);
            let r = f(d.values[i], ga, dt.values[i], gb);
            for k in 0..N {
                acc[k] += r[k];
            }
        }
        let w = grid.weight(i) / a.len() as f64;
        acc.map(|x| x * w)
    });
    std::array::from_fn(|k| pairwise_sum(&per_node.iter().map(|r| r[k]).collect::<Vec<_>>()))
}

/// Elastic part of the relative energy as `(tensor form, expanded form)`.
fn elastic_parts(d: &Field<Vec3>, dt: &Field<Vec3>, c: &FrankConstants) -> [f64; 2] {
    let [k1, k2, k3, k4, k5] = c.k;
    sample_average(d, dt, |d, g, dt, gt| {
        let dg = *g - *gt;
        let x = Tensor3::mat_vec_outer(g, d) - Tensor3::mat_vec_outer(gt, dt);
        let tensor = dg.ddot(&apply_lambda(k1, k2, &dg)) + full_contract_3_3(&x, &apply_theta(k3, k4, k5, &x));

        let dtr = dg.trace();
        let dskw = dg.skw();
        let splay = d * g.trace() - dt * gt.trace();
        let (cu, cut) = (levi_contract(&g.transpose()), levi_contract(&gt.transpose()));
        let twist = d.dot(cu) - dt.dot(cut);
        let bend = g.skw().mul_vec(d) - gt.skw().mul_vec(dt);
        let expanded = k1 * dtr * dtr
            + 2.0 * k2 * dskw.norm_sq()
            + k3 * splay.norm_sq()
            + k4 * twist * twist
            + 4.0 * k5 * bend.norm_sq();
        [0.5 * tensor, 0.5 * expanded]
    })
}

/// Relative energy split as `(tensor form, expanded form, ½‖v − ṽ‖²)`; the
/// first two include only the elastic part.
pub fn relative_energy_parts(
    v: &Field<Vec3>,
    d: &Field<Vec3>,
    pair: &PairState,
    c: &FrankConstants,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    check_grid(&d.grid, &[v, &pair.v, &pair.d])?;
    let [tensor, expanded] = elastic_parts(d, &pair.d, c);
    let kinetic = 0.5 * d.grid.integrate_with(|i| (v.values[i] - pair.v.values[i]).norm_sq());
    Ok((tensor, expanded, kinetic))
}

/// `½‖v − ṽ‖² + ½(∇d − ∇d̃ : Λ : ∇d − ∇d̃) + ½(∇d⊗d − ∇d̃⊗d̃ ⋮ Θ ⋮ ∇d⊗d − ∇d̃⊗d̃)`.
///
/// The sum-of-squares expansion is evaluated alongside; a disagreement beyond
/// `1e-11` (relative) is an error.
pub fn relative_energy(
    v: &Field<Vec3>,
    d: &Field<Vec3>,
    pair: &PairState,
    c: &FrankConstants,
) -> Result<f64, DiagnosticsError> {
    let (tensor, expanded, kinetic) = relative_energy_parts(v, d, pair, c)?;
    if (tensor - expanded).abs() > 1e-11 * tensor.abs().max(expanded.abs()) {
        return Err(DiagnosticsError::FormMismatch { tensor, expanded });
    }
    Ok(kinetic + tensor)
}

/// `E − (χ∥/2)‖d·H − d̃·H̃‖² − (χ⊥/2)‖d×H − d̃×H̃‖²`.
pub fn magnetic_relative_energy(
    v: &Field<Vec3>,
    d: &Field<Vec3>,
    h: &Field<Vec3>,
    pair: &PairState,
    h_tilde: &Field<Vec3>,
    c: &FrankConstants,
    m: &MagneticParams,
) -> Result<f64, DiagnosticsError> {
    check_grid(&d.grid, &[h, h_tilde])?;
    let e = relative_energy(v, d, pair, c)?;
    let grid = d.grid;
    let dot = grid.integrate_with(|i| {
        (d.values[i].dot(h.values[i]) - pair.d.values[i].dot(h_tilde.values[i])).powi(2)
    });
    let cross = grid.integrate_with(|i| {
        (d.values[i].cross(h.values[i]) - pair.d.values[i].cross(h_tilde.values[i])).norm_sq()
    });
    Ok(e - 0.5 * m.chi_par * dot - 0.5 * m.chi_perp * cross)
}

/// `a_{H,H̃} = χ∥(d×H − d̃×H̃)(d̃·H̃) − χ⊥(d·H − d̃·H̃)(H̃×d̃) + χ⊥(H·(d − d̃))(H̃×d̃)`.
pub fn magnetic_coupling_vector(
    d: &Field<Vec3>,
    h: &Field<Vec3>,
    pair: &PairState,
    h_tilde: &Field<Vec3>,
    m: &MagneticParams,
) -> Result<Field<Vec3>, DiagnosticsError> {
    check_grid(&d.grid, &[h, &pair.d, h_tilde])?;
    let grid = d.grid;
    let values = grid.map_nodes(|i| {
        let (d, h, dt, ht) = (d.values[i], h.values[i], pair.d.values[i], h_tilde.values[i]);
        let htxdt = ht.cross(dt);
        (d.cross(h) - dt.cross(ht)) * (m.chi_par * dt.dot(ht)) - htxdt * (m.chi_perp * (d.dot(h) - dt.dot(ht)))
            + htxdt * (m.chi_perp * h.dot(d - dt))
    });
    Ok(Field { grid, values })
}

/// `(μ1+λ²)‖d·Ad − d̃·Ãd̃‖² + (μ5+μ6−λ²)‖Ad − Ãd̃‖² + μ4‖A − Ã‖² + ‖d×q − d̃×q̃‖²`
/// with `A = (∇v)_sym`. Without coefficients only the last term remains.
pub fn relative_dissipation(
    v: &Field<Vec3>,
    d: &Field<Vec3>,
    dxq: &Field<Vec3>,
    pair: &PairState,
    l: Option<&LeslieCoefficients>,
) -> Result<f64, DiagnosticsError> {
    let grid = d.grid;
    check_grid(&grid, &[v, dxq, &pair.v, &pair.d, &pair.dxq])?;
    Ok(grid.integrate_with(|i| {
        let mut w = (dxq.values[i] - pair.dxq.values[i]).norm_sq();
        if let Some(l) = l {
            let [mu1, _, _, mu4, mu5, mu6] = l.mu;
            let l2 = l.lambda * l.lambda;
            let a = grid.grad_at(&v.values, i).sym();
            let at = grid.grad_at(&pair.v.values, i).sym();
            let (d, dt) = (d.values[i], pair.d.values[i]);
            let (ad, atd) = (a.mul_vec(d), at.mul_vec(dt));
            w += (mu1 + l2) * (d.dot(ad) - dt.dot(atd)).powi(2)
                + (mu5 + mu6 - l2) * (ad - atd).norm_sq()
                + mu4 * (a - at).norm_sq();
        }
        w
    }))
}

/// The pair-dependent norms entering the potential `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairNorms {
    /// `‖ṽ‖²_∞`
    pub v_max_sq: f64,
    /// `‖ṽ‖²_{W^{1,3}}`
    pub v_w13_sq: f64,
    /// `‖∇²d̃‖²_{L³}`
    pub hess_l3_sq: f64,
    /// `‖∇d̃‖⁴_{L⁶}`
    pub grad_l6_4: f64,
    /// `‖∂t d̃‖_∞`
    pub dt_d_max: f64,
    /// `‖∂t d̃‖_{W^{1,3}}`
    pub dt_d_w13: f64,
    /// `‖(∇ṽ)_sym‖_∞`
    pub sym_max: f64,
    /// `sup_t ‖∇d̃⊗d̃‖⁴_∞ · ‖d×d̃‖²_{L³}`
    pub misalignment: f64,
}

impl PairNorms {
    pub fn compute(pair: &PairState, d: &Field<Vec3>, gradient_sup: f64) -> Result<Self, DiagnosticsError> {
        let grid = pair.d.grid;
        check_grid(&grid, &[d, &pair.v, &pair.dt_d])?;
        struct Node {
            v: f64,
            gv: f64,
            hess: f64,
            gd: f64,
            dtd: f64,
            gdtd: f64,
            sym: f64,
            mis: f64,
        }
        let nodes = grid.map_nodes(|i| {
            let gv = grid.grad_at(&pair.v.values, i);
            Node {
                v: pair.v.values[i].norm(),
                gv: gv.norm_sq().sqrt(),
                hess: grid.hessian_at(&pair.d.values, i).norm_sq().sqrt(),
                gd: grid.grad_at(&pair.d.values, i).norm_sq().sqrt(),
                dtd: pair.dt_d.values[i].norm(),
                gdtd: grid.grad_at(&pair.dt_d.values, i).norm_sq().sqrt(),
                sym: gv.sym().norm_sq().sqrt(),
                mis: d.values[i].cross(pair.d.values[i]).norm(),
            }
        });
        let lp = |f: &dyn Fn(&Node) -> f64, p: f64| -> f64 {
            let vals: Vec<f64> = nodes.iter().enumerate().map(|(i, n)| grid.weight(i) * f(n).powf(p)).collect();
            pairwise_sum(&vals)
        };
        let max = |f: &dyn Fn(&Node) -> f64| nodes.iter().map(f).fold(0.0, f64::max);
        let v_max = max(&|n| n.v);
        Ok(PairNorms {
            v_max_sq: v_max * v_max,
            v_w13_sq: (lp(&|n| n.v, 3.0) + lp(&|n| n.gv, 3.0)).powf(2.0 / 3.0),
            hess_l3_sq: lp(&|n| n.hess, 3.0).powf(2.0 / 3.0),
            grad_l6_4: lp(&|n| n.gd, 6.0).powf(4.0 / 6.0),
            dt_d_max: max(&|n| n.dtd),
            dt_d_w13: (lp(&|n| n.dtd, 3.0) + lp(&|n| n.gdtd, 3.0)).powf(1.0 / 3.0),
            sym_max: max(&|n| n.sym),
            misalignment: gradient_sup.powi(4) * lp(&|n| n.mis, 3.0).powf(2.0 / 3.0),
        })
    }

    pub fn sum(&self) -> f64 {
        self.v_max_sq
            + self.v_w13_sq
            + self.hess_l3_sq
            + self.grad_l6_4
            + self.dt_d_max
            + self.dt_d_w13
            + self.sym_max
            + self.misalignment
    }
}

/// `K = C (Σ pair norms + 1)`; `gradient_sup` is `sup_t ‖∇d̃⊗d̃‖_∞`.
pub fn potential_k(pair: &PairState, d: &Field<Vec3>, gradient_sup: f64, c: f64) -> Result<f64, DiagnosticsError> {
    let n = PairNorms::compute(pair, d, gradient_sup)?;
    Ok(c * (n.sum() + 1.0))
}

/// Residual of the equations at the pair: `(A₁, A₂)`.
///
/// `A₁ = ∂t ṽ + ½[(∇ṽ)ṽ + div(ṽ⊗ṽ)] − (∇d̃)ᵀ(I − d̃⊗d̃)q̃ − div T̃^L − g`, where the
/// elastic term equals `div T̃^E` up to a gradient and the Leslie stress uses
/// the corotational rate `−(I − d̃⊗d̃)(λÃd̃ + q̃)`.
/// `A₂ = d̃×(∂t d̃ + (ṽ·∇)d̃ − W̃d̃ + λÃd̃ + q̃)`.
pub fn operator_a(
    pair: &PairState,
    l: Option<&LeslieCoefficients>,
    g: Option<&Field<Vec3>>,
) -> Result<(Field<Vec3>, Field<Vec3>), DiagnosticsError> {
    let grid = pair.d.grid;
    check_grid(&grid, &[&pair.v, &pair.dt_v, &pair.dt_d, &pair.q])?;
    if let Some(g) = g {
        check_grid(&grid, &[g])?;
    }
    let (vv, dv) = (&pair.v.values, &pair.d.values);
    let lambda = l.map_or(0.0, |l| l.lambda);
    struct Node {
        flux: Mat3,
        local: Vec3,
        a2: Vec3,
    }
    let nodes = grid.map_nodes(|i| {
        let (v, d, q) = (vv[i], dv[i], pair.q.values[i]);
        let gv = grid.grad_at(vv, i);
        let gd = grid.grad_at(dv, i);
        let a = gv.sym();
        let pq = q - d * d.dot(q);
        let mut flux = v.outer(v) * 0.5;
        if let Some(l) = l {
            let e = substituted_rate(d, &a, q, l.lambda);
            flux = flux - leslie_stress_parts(d, &a, e, l);
        }
        let mut local = pair.dt_v.values[i] + gv.mul_vec(v) * 0.5 - gd.tmul_vec(pq);
        if let Some(g) = g {
            local -= g.values[i];
        }
        let a2 = d.cross(pair.dt_d.values[i] + gd.mul_vec(v) - gv.skw().mul_vec(d) + a.mul_vec(d) * lambda + q);
        Node { flux, local, a2 }
    });
    let flux: Vec<Mat3> = nodes.iter().map(|n| n.flux).collect();
    let a1 = grid.map_nodes(|i| {
        let mut r = nodes[i].local;
        for j in 0..3 {
            r += grid.d1(&flux, i, j).col(j);
        }
        r
    });
    Ok((Field { grid, values: a1 }, Field { grid, values: nodes.iter().map(|n| n.a2).collect() }))
}

/// `((∇d₀ − ∇d̃₀)⊗(d₀ − d̃₀) ⋮ Θ ⋮ ∇d̃₀⊗d̃₀)` with the energy's gradient samples.
pub(crate) fn theta_cross_term(d: &Field<Vec3>, dt: &Field<Vec3>, c: &FrankConstants) -> f64 {
    let [_, _, k3, k4, k5] = c.k;
    let [x] = sample_average(d, dt, |d, g, dt, gt| {
        let x = Tensor3::mat_vec_outer(&(*g - *gt), d - dt);
        let y = apply_theta(k3, k4, k5, &Tensor3::mat_vec_outer(gt, dt));
        [full_contract_3_3(&x, &y)]
    });
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TestPair;
    use crate::fields::{random_divfree_velocity, random_unit_director, DirectorField, DomainKind};
    use crate::solvers::MagneticSetup;

    fn self_pair(v: &Field<Vec3>, d: &Field<Vec3>) -> PairState {
        let z = Field::zeros(d.grid);
        PairState { time: 0.0, v: v.clone(), d: d.clone(), dt_v: z.clone(), dt_d: z.clone(), q: z.clone(), dxq: z }
    }

    #[test]
    fn relative_energy_of_self_is_zero() {
        let g = Grid::cube(6, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::new(1.0, 0.6, 1.4).unwrap();
        let d = random_unit_director(&g, 3, 1.0).into_field();
        let v = random_divfree_velocity(&g, 4, 1.0).into_field();
        assert_eq!(relative_energy(&v, &d, &self_pair(&v, &d), &c).unwrap(), 0.0);
    }

    #[test]
    fn uniform_directors_have_zero_relative_energy() {
        let g = Grid::cube(5, 1.0, DomainKind::Dirichlet).unwrap();
        let c = FrankConstants::new(1.0, 2.0, 3.0).unwrap();
        let pair = TestPair::constant(Vec3::e(0)).unwrap().state(0, 0.0, &g, &c).unwrap();
        let d = Field::constant(g, Vec3::e(2));
        assert_eq!(relative_energy(&Field::zeros(g), &d, &pair, &c).unwrap(), 0.0);
    }

    #[test]
    fn constant_pair_recovers_the_field_energy() {
        let g = Grid::cube(6, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::new(1.0, 0.6, 1.4).unwrap();
        let d = random_unit_director(&g, 8, 1.0);
        let pair = TestPair::constant(Vec3::e(2)).unwrap().state(0, 0.0, &g, &c).unwrap();
        let e = relative_energy(&Field::zeros(g), d.field(), &pair, &c).unwrap();
        let f = crate::frank::field_energy(&d, &c);
        assert!((e - f).abs() <= 1e-12 * f, "{e} vs {f}");
    }

    #[test]
    fn tensor_and_expanded_forms_agree() {
        let g = Grid::cube(6, 1.0, DomainKind::Dirichlet).unwrap();
        let c = FrankConstants::new(1.3, 0.4, 2.2).unwrap();
        let d = random_unit_director(&g, 1, 1.0).into_field();
        let dt = random_unit_director(&g, 2, 1.0).into_field();
        let pair = self_pair(&Field::zeros(g), &dt);
        let (t, e, _) = relative_energy_parts(&Field::zeros(g), &d, &pair, &c).unwrap();
        assert!(t > 0.0);
        assert!((t - e).abs() <= 1e-12 * t, "{t} vs {e}");
    }

    #[test]
    fn constant_pair_potential_is_c() {
        let g = Grid::cube(5, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::one_constant(1.0).unwrap();
        let pair = TestPair::constant(Vec3::e(1)).unwrap();
        let st = pair.state(0, 0.0, &g, &c).unwrap();
        let d = random_unit_director(&g, 4, 1.0).into_field();
        assert_eq!(potential_k(&st, &d, pair.gradient_sup(&g), 1.0).unwrap(), 1.0);
        assert_eq!(potential_k(&st, &d, pair.gradient_sup(&g), 7.5).unwrap(), 7.5);
    }

    #[test]
    fn constant_pair_residuals() {
        let g = Grid::cube(5, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::one_constant(1.0).unwrap();
        let l = LeslieCoefficients::new([1.0, 0.3, 0.2, 2.0, 1.0, 1.0], 0.5);
        let st = TestPair::constant(Vec3::e(1)).unwrap().state(0, 0.0, &g, &c).unwrap();
        let (a1, a2) = operator_a(&st, Some(&l), None).unwrap();
        assert_eq!(a1.max_norm(), 0.0);
        assert_eq!(a2.max_norm(), 0.0);
        let force = Field::constant(g, Vec3::new(0.2, -1.0, 0.5));
        let (a1, a2) = operator_a(&st, Some(&l), Some(&force)).unwrap();
        assert!(a1.values.iter().all(|x| *x == -Vec3::new(0.2, -1.0, 0.5)));
        assert_eq!(a2.max_norm(), 0.0);
    }

    #[test]
    fn manufactured_director_residual_is_second_order() {
        // In-plane director at angle φ = 2πx: F = ½(K1 cos²φ + K3 sin²φ)φ'², so
        // d̃×q̃ = −2π²(K3 − K1) sin 2φ e_y.
        let (k1, k3) = (1.0, 2.0);
        let tau = 2.0 * std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = Grid::cube(n, 1.0, DomainKind::Periodic).unwrap();
            let c = FrankConstants::new(k1, 1.0, k3).unwrap();
            let phi = |i: usize| tau * g.position(i).0[0];
            let d = DirectorField::new(Field { grid: g, values: g.map_nodes(|i| Vec3::new(phi(i).sin(), 0.0, phi(i).cos())) })
                .unwrap();
            let pair = TestPair::stationary(crate::fields::VelocityField::zeros(g), d).unwrap();
            let st = pair.state(0, 0.0, &g, &c).unwrap();
            let (_, a2) = operator_a(&st, None, None).unwrap();
            let exact = |i: usize| Vec3::new(0.0, -0.5 * tau * tau * (k3 - k1) * (2.0 * phi(i)).sin(), 0.0);
            errs.push((0..g.len()).map(|i| (a2.values[i] - exact(i)).norm()).fold(0.0, f64::max));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }

    #[test]
    fn zero_fields_leave_energy_unchanged() {
        let g = Grid::cube(5, 1.0, DomainKind::Periodic).unwrap();
        let c = FrankConstants::one_constant(1.0).unwrap();
        let m = MagneticParams::new(-1.0, -2.0).unwrap();
        let d = random_unit_director(&g, 5, 1.0).into_field();
        let zero = MagneticSetup::uniform(m, g, Vec3::ZERO);
        let pair = TestPair::constant(Vec3::e(2)).unwrap().with_field(zero.clone());
        let st = pair.state(0, 0.0, &g, &c).unwrap();
        let v = Field::zeros(g);
        let plain = relative_energy(&v, &d, &st, &c).unwrap();
        let mag = magnetic_relative_energy(&v, &d, &zero.field, &st, &zero.field, &c, &m).unwrap();
        assert_eq!(plain.to_bits(), mag.to_bits());
        let a = magnetic_coupling_vector(&d, &zero.field, &st, &zero.field, &m).unwrap();
        assert_eq!(a.max_norm(), 0.0);
    }
}
