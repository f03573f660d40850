//! Quadrature-based assembly of the energy, its first three variations, the
//! L² and H¹ Gram operators, and grid-dependent (broken) norms.
//!
//! Element contributions may be computed in parallel; they are always
//! combined in element-index order, so results do not depend on the number
//! of worker threads.

use std::sync::Arc;

use rayon::prelude::*;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::space::{combine, sup_lattice_subdivisions};
use crate::felement::{reference_lattice, FEFunction, FESpace, QuadRule};
use crate::field::ScalarField;
use crate::mesh::{Mat2, Point};
use crate::sparse::SparseOperator;

/// Per-element quadrature data: physical points, scaled weights and
/// physical basis gradients.
struct ElementQuad {
    points: Vec<Point>,
    weights: Vec<f64>,
    grads: Vec<Vec<Point>>,
}

fn element_quad(space: &FESpace, e: usize) -> ElementQuad {
    let map = space.element_map(e);
    let quad = space.quadrature();
    let table = space.table();
    let jac = map.volume_scale();
    ElementQuad {
        points: quad.points.iter().map(|&xi| map.to_physical(xi)).collect(),
        weights: quad.weights.iter().map(|w| w * jac).collect(),
        grads: table.grads.iter().map(|gq| gq.iter().map(|&g| map.push_gradient(g)).collect()).collect(),
    }
}

fn local_state(space: &FESpace, coeffs: &[f64], e: usize, q: usize, eq: &ElementQuad) -> (f64, Point) {
    let dofs = space.element_dofs(e);
    let vals = &space.table().values[q];
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for (k, &d) in dofs.iter().enumerate() {
        v += coeffs[d] * vals[k];
        g[0] += coeffs[d] * eq.grads[q][k][0];
        g[1] += coeffs[d] * eq.grads[q][k][1];
    }
    (v, g)
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn mat_vec(a: &Mat2, v: Point) -> Point {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn check_finite(v: f64, x: Point, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, location: x })
    }
}

fn per_element<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

/// Total energy `J(v) = sum_T sum_q w L(Dv, v, x)`.
pub fn energy(model: &dyn EnergyModel, v: &FEFunction) -> Result<f64> {
    let space = v.space();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut s = 0.0;
        for q in 0..eq.points.len() {
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let l = model.value(p, z, eq.points[q]);
            check_finite(l, eq.points[q], "energy density")?;
            s += eq.weights[q] * l;
        }
        Ok(s)
    })?;
    Ok(parts.iter().sum())
}

/// First variation `dJ(v)(phi_i)` for every basis function, without masking.
pub fn first_variation(model: &dyn EnergyModel, v: &FEFunction) -> Result<Vec<f64>> {
    let space = v.space();
    let nloc = space.num_local_dofs();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut local = vec![0.0; nloc];
        for q in 0..eq.points.len() {
            let x = eq.points[q];
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let dp = model.d_p(p, z, x);
            let dz = model.d_z(p, z, x);
            check_finite(dp[0] + dp[1] + dz, x, "first derivative of the Lagrangian")?;
            let vals = &space.table().values[q];
            for k in 0..nloc {
                local[k] += eq.weights[q] * (dot(dp, eq.grads[q][k]) + dz * vals[k]);
            }
        }
        Ok(local)
    })?;
    let mut r = vec![0.0; space.ndofs()];
    for (e, local) in parts.iter().enumerate() {
        for (k, &d) in space.element_dofs(e).iter().enumerate() {
            r[d] += local[k];
        }
    }
    Ok(r)
}

/// Residual vector `dJ(v)(phi_i)` with boundary entries set to zero (test
/// functions range over the space with homogeneous boundary values).
pub fn assemble_residual(model: &dyn EnergyModel, v: &FEFunction) -> Result<Vec<f64>> {
    let mut r = first_variation(model, v)?;
    v.space().mask(&mut r);
    Ok(r)
}

/// Local second-variation integrand for test/trial gradients and values.
#[inline]
fn second_variation_density(
    a: &Mat2,
    b: Point,
    c: f64,
    gi: Point,
    vi: f64,
    gj: Point,
    vj: f64,
) -> f64 {
    dot(gi, mat_vec(a, gj)) + dot(b, gi) * vj + dot(b, gj) * vi + c * vi * vj
}

/// Unmasked second variation matrix `d²J(v)(phi_i, phi_j)`.
pub fn second_variation_matrix(model: &dyn EnergyModel, v: &FEFunction) -> Result<SparseOperator> {
    let space = v.space();
    let nloc = space.num_local_dofs();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut local = vec![0.0; nloc * nloc];
        for q in 0..eq.points.len() {
            let x = eq.points[q];
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let a = model.d_pp(p, z, x);
            let b = model.d_pz(p, z, x);
            let c = model.d_zz(p, z, x);
            check_finite(a[0][0] + a[1][1] + a[0][1] + b[0] + b[1] + c, x, "second derivative of the Lagrangian")?;
            let vals = &space.table().values[q];
            let w = eq.weights[q];
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i * nloc + j] +=
                        w * second_variation_density(&a, b, c, eq.grads[q][i], vals[i], eq.grads[q][j], vals[j]);
                }
            }
        }
        Ok(local)
    })?;
    let mut op = SparseOperator::zeros(space.sparsity());
    for (e, local) in parts.iter().enumerate() {
        let dofs = space.element_dofs(e);
        for (i, &di) in dofs.iter().enumerate() {
            for (j, &dj) in dofs.iter().enumerate() {
                op.add(di, dj, local[i * nloc + j]);
            }
        }
    }
    Ok(op)
}

/// Hessian of the discrete energy with boundary rows and columns replaced
/// by those of the identity.
pub fn assemble_hessian(model: &dyn EnergyModel, v: &FEFunction) -> Result<SparseOperator> {
    let mut op = second_variation_matrix(model, v)?;
    op.mask_symmetric(v.space().boundary_mask());
    Ok(op)
}

/// Vector `d²J(v)(phi_i, w)` over all basis functions, matrix-free.
pub fn apply_second_variation(model: &dyn EnergyModel, v: &FEFunction, w: &FEFunction) -> Result<Vec<f64>> {
    same_space(v, w)?;
    let space = v.space();
    let nloc = space.num_local_dofs();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut local = vec![0.0; nloc];
        for q in 0..eq.points.len() {
            let x = eq.points[q];
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let (wz, wp) = local_state(space, w.coeffs(), e, q, &eq);
            let a = model.d_pp(p, z, x);
            let b = model.d_pz(p, z, x);
            let c = model.d_zz(p, z, x);
            let vals = &space.table().values[q];
            for i in 0..nloc {
                local[i] += eq.weights[q] * second_variation_density(&a, b, c, eq.grads[q][i], vals[i], wp, wz);
            }
        }
        Ok(local)
    })?;
    let mut r = vec![0.0; space.ndofs()];
    for (e, local) in parts.iter().enumerate() {
        for (k, &d) in space.element_dofs(e).iter().enumerate() {
            r[d] += local[k];
        }
    }
    Ok(r)
}

/// Scalar `d²J(v)(a, b)` by quadrature.
pub fn second_variation(model: &dyn EnergyModel, v: &FEFunction, a: &FEFunction, b: &FEFunction) -> Result<f64> {
    same_space(v, a)?;
    same_space(v, b)?;
    let space = v.space();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut s = 0.0;
        for q in 0..eq.points.len() {
            let x = eq.points[q];
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let (az, ap) = local_state(space, a.coeffs(), e, q, &eq);
            let (bz, bp) = local_state(space, b.coeffs(), e, q, &eq);
            let m = model.d_pp(p, z, x);
            s += eq.weights[q]
                * second_variation_density(&m, model.d_pz(p, z, x), model.d_zz(p, z, x), ap, az, bp, bz);
        }
        Ok(s)
    })?;
    Ok(parts.iter().sum())
}

/// Selects which blocks of the third variation are included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThirdOrderBlocks {
    pub ppp: bool,
    pub ppz: bool,
    pub pzz: bool,
    pub zzz: bool,
}

impl ThirdOrderBlocks {
    pub const ALL: ThirdOrderBlocks = ThirdOrderBlocks { ppp: true, ppz: true, pzz: true, zzz: true };
    /// Only the blocks that survive for semilinear Euler–Lagrange equations.
    pub const SEMILINEAR: ThirdOrderBlocks = ThirdOrderBlocks { ppp: false, ppz: false, pzz: true, zzz: true };
}

fn same_space(a: &FEFunction, b: &FEFunction) -> Result<()> {
    if a.space().same_layout(b.space()) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch("all arguments must live on the same space".into()))
    }
}

/// Third variation `d³J(v)(u, w, y)` with all eight blocks.
pub fn apply_third_variation(
    model: &dyn EnergyModel,
    v: &FEFunction,
    u: &FEFunction,
    w: &FEFunction,
    y: &FEFunction,
) -> Result<f64> {
    apply_third_variation_blocks(model, v, u, w, y, ThirdOrderBlocks::ALL)
}

pub fn apply_third_variation_blocks(
    model: &dyn EnergyModel,
    v: &FEFunction,
    u: &FEFunction,
    w: &FEFunction,
    y: &FEFunction,
    blocks: ThirdOrderBlocks,
) -> Result<f64> {
    for f in [u, w, y] {
        same_space(v, f)?;
    }
    let space = v.space();
    let parts = per_element(space.mesh().num_elements(), |e| {
        let eq = element_quad(space, e);
        let mut s = 0.0;
        for q in 0..eq.points.len() {
            let x = eq.points[q];
            let (z, p) = local_state(space, v.coeffs(), e, q, &eq);
            let (u0, u1) = local_state(space, u.coeffs(), e, q, &eq);
            let (w0, w1) = local_state(space, w.coeffs(), e, q, &eq);
            let (y0, y1) = local_state(space, y.coeffs(), e, q, &eq);
            let mut t = 0.0;
            if blocks.ppp {
                t += model.d_ppp(p, z, x, u1, w1, y1);
            }
            if blocks.ppz {
                t += model.d_ppz(p, z, x, u1, w1) * y0
                    + model.d_ppz(p, z, x, u1, y1) * w0
                    + model.d_ppz(p, z, x, w1, y1) * u0;
            }
            if blocks.pzz {
                let c = model.d_pzz(p, z, x);
                t += dot(c, u1) * w0 * y0 + dot(c, w1) * u0 * y0 + dot(c, y1) * u0 * w0;
            }
            if blocks.zzz {
                t += model.d_zzz(p, z, x) * u0 * w0 * y0;
            }
            s += eq.weights[q] * t;
        }
        Ok(s)
    })?;
    Ok(parts.iter().sum())
}

fn assemble_bilinear(space: &Arc<FESpace>, mass: f64, stiffness: f64) -> SparseOperator {
    let nloc = space.num_local_dofs();
    let parts: Vec<Vec<f64>> = (0..space.mesh().num_elements())
        .into_par_iter()
        .map(|e| {
            let eq = element_quad(space, e);
            let mut local = vec![0.0; nloc * nloc];
            for q in 0..eq.points.len() {
                let vals = &space.table().values[q];
                for i in 0..nloc {
                    for j in 0..nloc {
                        local[i * nloc + j] += eq.weights[q]
                            * (mass * vals[i] * vals[j] + stiffness * dot(eq.grads[q][i], eq.grads[q][j]));
                    }
                }
            }
            local
        })
        .collect();
    let mut op = SparseOperator::zeros(space.sparsity());
    for (e, local) in parts.iter().enumerate() {
        let dofs = space.element_dofs(e);
        for (i, &di) in dofs.iter().enumerate() {
            for (j, &dj) in dofs.iter().enumerate() {
                op.add(di, dj, local[i * nloc + j]);
            }
        }
    }
    op
}

/// L² Gram (mass) matrix, unmasked.
pub fn assemble_gram_l2(space: &Arc<FESpace>) -> SparseOperator {
    assemble_bilinear(space, 1.0, 0.0)
}

/// Stiffness matrix of the Laplacian, unmasked.
pub fn assemble_stiffness(space: &Arc<FESpace>) -> SparseOperator {
    assemble_bilinear(space, 0.0, 1.0)
}

/// Full H¹ Gram matrix (mass plus stiffness), unmasked.
pub fn assemble_gram_h1(space: &Arc<FESpace>) -> SparseOperator {
    assemble_bilinear(space, 1.0, 1.0)
}

/// What a discrete function is compared against in [`norms`].
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Zero,
    Exact(&'a dyn ScalarField),
    Discrete(&'a FEFunction),
}

/// Grid-dependent norms of `target - g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub h1_semi: f64,
    pub q: f64,
    /// `(int |e|^q + |De|^q)^{1/q}`; equals `w1inf` for `q = inf`.
    pub w1q: f64,
    /// Broken `|e|_{H^2}`; `None` unless requested.
    pub broken_h2: Option<f64>,
    /// `max(sup |e|, sup |De|)` sampled on a dense reference lattice.
    pub w1inf: f64,
}

impl NormReport {
    pub fn h1(&self) -> f64 {
        (self.l2 * self.l2 + self.h1_semi * self.h1_semi).sqrt()
    }

    /// Full `W^{2,2}` norm; requires `broken_h2`.
    pub fn w22(&self) -> Option<f64> {
        self.broken_h2.map(|b| (self.l2 * self.l2 + self.h1_semi * self.h1_semi + b * b).sqrt())
    }
}

/// Quadrature degree used for error norms.
pub fn norm_quadrature_degree(order: usize) -> usize {
    2 * order + 6
}

pub fn norms(target: Target<'_>, g: &FEFunction, q: f64, include_broken_h2: bool) -> Result<NormReport> {
    let space = g.space();
    if !(q >= 1.0) {
        return Err(Error::Precondition(format!("norm exponent q = {q} must be in [1, inf]")));
    }
    if include_broken_h2 && space.order() < 2 {
        return Err(Error::Precondition("broken H2 norm requires order >= 2".into()));
    }
    if let Target::Discrete(f) = target {
        if !f.space().same_layout(space) {
            return Err(Error::SpaceMismatch("norm target must live on the same space".into()));
        }
    }
    let dim = space.dim();
    let rule = QuadRule::for_degree(dim, norm_quadrature_degree(space.order()));
    let table = space.basis().tabulate(&rule.points);
    let lattice = space.basis().tabulate(&reference_lattice(dim, sup_lattice_subdivisions(dim, space.order())));
    let finite_q = q.is_finite();

    let eval_error = |e: usize, tab: &crate::felement::BasisTable, k: usize| -> (Point, f64, Point, Mat2) {
        let (v, gr, h) = combine(space, g.coeffs(), e, &tab.values[k], &tab.grads[k], &tab.hessians[k]);
        let x = space.element_map(e).to_physical(tab.points[k]);
        let (tv, tg, th) = match target {
            Target::Zero => (0.0, [0.0; 2], [[0.0; 2]; 2]),
            Target::Exact(f) => (f.value(x), f.gradient(x), f.hessian(x)),
            Target::Discrete(f) => combine(space, f.coeffs(), e, &tab.values[k], &tab.grads[k], &tab.hessians[k]),
        };
        let de = [tv - v, tg[0] - gr[0], tg[1] - gr[1]];
        let mut dh = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                dh[r][s] = th[r][s] - h[r][s];
            }
        }
        (x, de[0], [de[1], de[2]], dh)
    };

    // [l1, l2^2, h1^2, w1q^q, h2^2, sup]
    let parts: Vec<[f64; 6]> = (0..space.mesh().num_elements())
        .into_par_iter()
        .map(|e| {
            let jac = space.element_map(e).volume_scale();
            let mut acc = [0.0; 6];
            for k in 0..rule.len() {
                let (_, ev, eg, eh) = eval_error(e, &table, k);
                let w = rule.weights[k] * jac;
                let gn = (eg[0] * eg[0] + eg[1] * eg[1]).sqrt();
                acc[0] += w * ev.abs();
                acc[1] += w * ev * ev;
                acc[2] += w * gn * gn;
                if finite_q {
                    acc[3] += w * (ev.abs().powf(q) + gn.powf(q));
                }
                acc[4] += w * (eh[0][0] * eh[0][0] + eh[0][1] * eh[0][1] + eh[1][0] * eh[1][0] + eh[1][1] * eh[1][1]);
            }
            for k in 0..lattice.len() {
                let (_, ev, eg, _) = eval_error(e, &lattice, k);
                acc[5] = acc[5].max(ev.abs()).max((eg[0] * eg[0] + eg[1] * eg[1]).sqrt());
            }
            acc
        })
        .collect();

    let mut tot = [0.0; 6];
    for p in &parts {
        for k in 0..5 {
            tot[k] += p[k];
        }
        tot[5] = f64::max(tot[5], p[5]);
    }
    let report = NormReport {
        l1: tot[0],
        l2: tot[1].sqrt(),
        h1_semi: tot[2].sqrt(),
        q,
        w1q: if finite_q { tot[3].powf(1.0 / q) } else { tot[5] },
        broken_h2: include_broken_h2.then(|| tot[4].sqrt()),
        w1inf: tot[5],
    };
    let all = [report.l1, report.l2, report.h1_semi, report.w1q, report.w1inf, report.broken_h2.unwrap_or(0.0)];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "norm", location: [f64::NAN; 2] });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{dirichlet_potential_model, minimal_surface_model, Forcing, Potential};
    use crate::felement::{interpolate, make_space};
    use crate::field::SineSeries;
    use crate::mesh::Mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn space(dim: usize, n: usize, m: usize) -> Arc<FESpace> {
        make_space(Arc::new(Mesh::build_unit_mesh(dim, n).unwrap()), m, |_| 0.0).unwrap()
    }

    fn forcing() -> Forcing {
        Arc::new(|x: Point| 1.0 + 2.0 * x[0] - x[1])
    }

    fn models() -> Vec<Box<dyn EnergyModel>> {
        vec![
            Box::new(dirichlet_potential_model(Potential::zero(), forcing()).unwrap()),
            Box::new(dirichlet_potential_model(Potential::quartic(), forcing()).unwrap()),
            Box::new(dirichlet_potential_model(Potential::cosine(), forcing()).unwrap()),
            Box::new(minimal_surface_model()),
        ]
    }

    fn random_fn(space: &Arc<FESpace>, rng: &mut ChaCha8Rng, zero_boundary: bool) -> FEFunction {
        let mut c: Vec<f64> = (0..space.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if zero_boundary {
            space.mask(&mut c);
        }
        FEFunction::from_coeffs(space, c).unwrap()
    }

    #[test]
    fn zero_state_zero_residual() {
        let s = space(1, 4, 1);
        let m = dirichlet_potential_model(Potential::zero(), Arc::new(|_| 0.0)).unwrap();
        let r = assemble_residual(&m, &FEFunction::zeros(&s)).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn p1_stiffness_hand_assembly() {
        // h = 1/4: interior rows of (1/h) tridiag(-1, 2, -1).
        let s = space(1, 4, 1);
        let m = dirichlet_potential_model(Potential::zero(), Arc::new(|_| 0.0)).unwrap();
        let h = assemble_hessian(&m, &FEFunction::zeros(&s)).unwrap();
        let interior: Vec<usize> = (0..s.ndofs()).filter(|&i| !s.is_boundary(i)).collect();
        assert_eq!(interior.len(), 3);
        for (a, &i) in interior.iter().enumerate() {
            for (b, &j) in interior.iter().enumerate() {
                let want = match (a as i64 - b as i64).abs() {
                    0 => 8.0,
                    1 => -4.0,
                    _ => 0.0,
                };
                assert!((h.get(i, j) - want).abs() < 1e-13);
            }
        }
        for &b in s.boundary_dofs() {
            assert_eq!(h.get(b, b), 1.0);
        }
    }

    #[test]
    fn quartic_hessian_at_zero_is_stiffness() {
        let s = space(2, 3, 2);
        let z = FEFunction::zeros(&s);
        let lin = dirichlet_potential_model(Potential::zero(), forcing()).unwrap();
        let quart = dirichlet_potential_model(Potential::quartic(), forcing()).unwrap();
        let a = assemble_hessian(&lin, &z).unwrap();
        let b = assemble_hessian(&quart, &z).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn p1_mass_hand_assembly() {
        let s = space(1, 4, 1);
        let m = assemble_gram_l2(&s);
        let h = 0.25;
        let i = (0..s.ndofs()).find(|&i| (s.dof_coords()[i][0] - 0.5).abs() < 1e-15).unwrap();
        let j = (0..s.ndofs()).find(|&j| (s.dof_coords()[j][0] - 0.75).abs() < 1e-15).unwrap();
        assert!((m.get(i, i) - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((m.get(i, j) - h / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mass_total_is_domain_measure() {
        for (dim, mdeg) in [(1, 1), (1, 3), (2, 1), (2, 2), (2, 3)] {
            let s = space(dim, 3, mdeg);
            let m = assemble_gram_l2(&s);
            let ones = vec![1.0; s.ndofs()];
            assert!((m.bilinear(&ones, &ones) - 1.0).abs() < 1e-13);
            assert!(m.max_asymmetry() < 1e-15);
        }
    }

    #[test]
    fn residual_matches_energy_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 2] {
            let s = space(dim, 3, 2);
            for model in models() {
                let v = random_fn(&s, &mut rng, false);
                let r = first_variation(model.as_ref(), &v).unwrap();
                for _ in 0..20 {
                    let i = rng.gen_range(0..s.ndofs());
                    let eps = 1e-5;
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp.coeffs_mut()[i] += eps;
                    vm.coeffs_mut()[i] -= eps;
                    let fd = (energy(model.as_ref(), &vp).unwrap() - energy(model.as_ref(), &vm).unwrap()) / (2.0 * eps);
                    assert!((fd - r[i]).abs() < 1e-6 * (1.0 + r[i].abs()), "{} dof {i}", model.name());
                }
            }
        }
    }

    #[test]
    fn hessian_symmetric_and_matches_residual_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [1, 2] {
            let s = space(dim, 3, 2);
            for model in models() {
                let v = random_fn(&s, &mut rng, false);
                let h = assemble_hessian(model.as_ref(), &v).unwrap();
                assert!(h.max_asymmetry() < 1e-12);
                let dir = random_fn(&s, &mut rng, true);
                let eps = 1e-6;
                let rp = assemble_residual(model.as_ref(), &v.add_scaled(eps, &dir).unwrap()).unwrap();
                let rm = assemble_residual(model.as_ref(), &v.add_scaled(-eps, &dir).unwrap()).unwrap();
                let hv = h.apply(dir.coeffs());
                for i in 0..s.ndofs() {
                    if s.is_boundary(i) {
                        continue;
                    }
                    let fd = (rp[i] - rm[i]) / (2.0 * eps);
                    assert!((fd - hv[i]).abs() < 1e-6 * (1.0 + hv[i].abs()));
                }
            }
        }
    }

    #[test]
    fn third_variation_quartic_constant_state() {
        let s = space(1, 4, 1);
        let m = dirichlet_potential_model(Potential::quartic(), forcing()).unwrap();
        let one = interpolate(&s, |_| 1.0).unwrap();
        let t = apply_third_variation(&m, &one, &one, &one, &one).unwrap();
        assert!((t - 6.0).abs() < 1e-13);
        let lin = dirichlet_potential_model(Potential::zero(), forcing()).unwrap();
        assert_eq!(apply_third_variation(&lin, &one, &one, &one, &one).unwrap(), 0.0);
    }

    #[test]
    fn third_variation_symmetry_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in [1, 2] {
            let s = space(dim, 3, 2);
            for model in models() {
                let m = model.as_ref();
                let v = random_fn(&s, &mut rng, false);
                let fs: Vec<FEFunction> = (0..3).map(|_| random_fn(&s, &mut rng, true)).collect();
                let base = apply_third_variation(m, &v, &fs[0], &fs[1], &fs[2]).unwrap();
                for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                    let t = apply_third_variation(m, &v, &fs[perm[0]], &fs[perm[1]], &fs[perm[2]]).unwrap();
                    assert!((t - base).abs() < 1e-12 * (1.0 + base.abs()));
                }
                let eps = 1e-5;
                let hp = second_variation(m, &v.add_scaled(eps, &fs[0]).unwrap(), &fs[1], &fs[2]).unwrap();
                let hm = second_variation(m, &v.add_scaled(-eps, &fs[0]).unwrap(), &fs[1], &fs[2]).unwrap();
                let fd = (hp - hm) / (2.0 * eps);
                assert!((fd - base).abs() < 1e-5 * (1.0 + base.abs()), "{} {fd} {base}", m.name());
            }
        }
    }

    #[test]
    fn semilinear_third_variation_has_no_gradient_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = space(2, 3, 2);
        for psi in [Potential::quartic(), Potential::cosine()] {
            let m = dirichlet_potential_model(psi, forcing()).unwrap();
            let v = random_fn(&s, &mut rng, false);
            let fs: Vec<FEFunction> = (0..3).map(|_| random_fn(&s, &mut rng, false)).collect();
            let full = apply_third_variation(&m, &v, &fs[0], &fs[1], &fs[2]).unwrap();
            let reduced =
                apply_third_variation_blocks(&m, &v, &fs[0], &fs[1], &fs[2], ThirdOrderBlocks::SEMILINEAR).unwrap();
            assert!((full - reduced).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_refinement_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dim in [1, 2] {
            let s = space(dim, 4, 2);
            let fine = s.with_quadrature(QuadRule::for_degree(dim, 2 * s.quadrature().exactness_degree));
            for model in models() {
                let amp: f64 = rng.gen_range(0.2..0.5);
                let v = interpolate(&s, |x| amp * (PI * x[0]).sin() * (1.0 + x[1]) + 0.1 * x[0]).unwrap();
                let a = assemble_residual(model.as_ref(), &v).unwrap();
                let b = assemble_residual(model.as_ref(), &v.on_space(&fine).unwrap()).unwrap();
                let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                // Polynomial integrands are exact at both orders; smooth ones converge fast.
                assert!(diff / scale < 1e-3, "{} {diff} {scale}", model.name());
            }
        }
    }

    #[test]
    fn norms_of_sine() {
        let s = space(1, 64, 2);
        let f = SineSeries::product(1);
        let r = norms(Target::Exact(&f), &FEFunction::zeros(&s), 2.0, true).unwrap();
        assert!((r.l2 - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((r.h1_semi - PI / 2f64.sqrt()).abs() < 1e-6);
        assert!((r.w1q - r.h1()).abs() < 1e-12);
        assert!((r.broken_h2.unwrap() - PI * PI / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn norms_vanish_for_reproduced_linears() {
        let s = space(2, 3, 1);
        let lin = crate::field::FnField::new(|x| 1.0 + 2.0 * x[0] - x[1], |_| [2.0, -1.0], |_| [[0.0; 2]; 2]);
        let g = interpolate(&s, |x| lin.value(x)).unwrap();
        let r = norms(Target::Exact(&lin), &g, 2.0, false).unwrap();
        assert!(r.l2 < 1e-13 && r.h1_semi < 1e-13 && r.w1inf < 1e-13 && r.l1 < 1e-13);
        assert!(r.broken_h2.is_none());
    }

    #[test]
    fn broken_h2_requires_order_two() {
        let s = space(1, 4, 1);
        assert!(norms(Target::Zero, &FEFunction::zeros(&s), 2.0, true).is_err());
    }
}
