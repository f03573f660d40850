use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::basis::{BasisTable, ReferenceBasis};
use super::quadrature::QuadRule;
use super::reference_lattice;
use crate::error::{Error, Result};
use crate::mesh::{ElementMap, Mat2, Mesh, Point};
use crate::sparse::SparsityPattern;

/// Globally continuous Lagrange space of order `m` on a mesh, with
/// prescribed boundary values at the boundary nodes.
#[derive(Debug)]
pub struct FESpace {
    mesh: Arc<Mesh>,
    order: usize,
    basis: ReferenceBasis,
    quad: QuadRule,
    table: BasisTable,
    maps: Vec<ElementMap>,
    dof_coords: Vec<Point>,
    elem_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
    boundary_dofs: Vec<usize>,
    boundary_values: Vec<f64>,
    pattern: OnceLock<Arc<SparsityPattern>>,
}

/// Default quadrature exactness degree for order `m`.
pub fn default_quadrature_degree(order: usize) -> usize {
    2 * order + 2
}

/// Builds `S^m_{h;phi}` on `mesh` with boundary values `boundary_fn`
/// sampled at the boundary nodes.
pub fn make_space(mesh: Arc<Mesh>, order: usize, boundary_fn: impl Fn(Point) -> f64) -> Result<Arc<FESpace>> {
    FESpace::new(mesh, order, boundary_fn)
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, order: usize, boundary_fn: impl Fn(Point) -> f64) -> Result<Arc<FESpace>> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        let dim = mesh.dim();
        let basis = ReferenceBasis::new(dim, order);
        let nloc = basis.len();

        let mut maps = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            maps.push(mesh.element_map(e)?);
        }

        let mut boundary_vertices = vec![false; mesh.num_vertices()];
        let mut boundary_edges = std::collections::HashSet::new();
        for f in mesh.boundary_facets() {
            for &v in &f.vertices[..dim] {
                boundary_vertices[v] = true;
            }
            if dim == 2 {
                let [a, b] = f.vertices;
                boundary_edges.insert((a.min(b), a.max(b)));
            }
        }

        // A node is identified by the global vertices carrying a nonzero
        // barycentric weight together with those weights.
        let mut ids: HashMap<Vec<(usize, u8)>, usize> = HashMap::new();
        let mut dof_coords = Vec::new();
        let mut is_boundary = Vec::new();
        let mut elem_dofs = Vec::with_capacity(mesh.num_elements() * nloc);
        for e in 0..mesh.num_elements() {
            let verts = mesh.element(e);
            for node in &basis.nodes {
                let mut key: Vec<(usize, u8)> =
                    (0..=dim).filter(|&i| node[i] > 0).map(|i| (verts[i], node[i])).collect();
                key.sort_unstable();
                let next = dof_coords.len();
                let id = *ids.entry(key.clone()).or_insert(next);
                if id == next {
                    let mut x = [0.0; 2];
                    for &(v, a) in &key {
                        let p = mesh.vertex(v);
                        let w = f64::from(a) / order as f64;
                        x[0] += w * p[0];
                        x[1] += w * p[1];
                    }
                    dof_coords.push(x);
                    let on_boundary = match key.len() {
                        1 => boundary_vertices[key[0].0],
                        2 if dim == 2 => {
                            let (a, b) = (key[0].0, key[1].0);
                            boundary_edges.contains(&(a.min(b), a.max(b)))
                        }
                        _ => false,
                    };
                    is_boundary.push(on_boundary);
                }
                elem_dofs.push(id);
            }
        }

        let boundary_dofs: Vec<usize> = (0..dof_coords.len()).filter(|&i| is_boundary[i]).collect();
        let boundary_values = boundary_dofs.iter().map(|&i| boundary_fn(dof_coords[i])).collect();
        let quad = QuadRule::for_degree(dim, default_quadrature_degree(order));
        let table = basis.tabulate(&quad.points);

        Ok(Arc::new(FESpace {
            mesh,
            order,
            basis,
            quad,
            table,
            maps,
            dof_coords,
            elem_dofs,
            is_boundary,
            boundary_dofs,
            boundary_values,
            pattern: OnceLock::new(),
        }))
    }

    /// Same space with a different element quadrature rule.
    pub fn with_quadrature(&self, quad: QuadRule) -> Arc<FESpace> {
        assert_eq!(quad.dim, self.dim());
        let table = self.basis.tabulate(&quad.points);
        Arc::new(FESpace {
            mesh: Arc::clone(&self.mesh),
            order: self.order,
            basis: self.basis.clone(),
            quad,
            table,
            maps: self.maps.clone(),
            dof_coords: self.dof_coords.clone(),
            elem_dofs: self.elem_dofs.clone(),
            is_boundary: self.is_boundary.clone(),
            boundary_dofs: self.boundary_dofs.clone(),
            boundary_values: self.boundary_values.clone(),
            pattern: OnceLock::new(),
        })
    }

    /// Same space whose quadrature is the composite rule over `levels`
    /// uniform refinements of each element.
    pub fn with_refined_quadrature(&self, levels: usize) -> Arc<FESpace> {
        self.with_quadrature(self.quad.subdivided(levels))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ndofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn num_local_dofs(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn quadrature(&self) -> &QuadRule {
        &self.quad
    }

    /// Basis table at the quadrature points.
    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn element_map(&self, e: usize) -> &ElementMap {
        &self.maps[e]
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let n = self.basis.len();
        &self.elem_dofs[e * n..(e + 1) * n]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Prescribed values, parallel to `boundary_dofs()`.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.ndofs() - self.boundary_dofs.len()
    }

    pub fn sparsity(&self) -> Arc<SparsityPattern> {
        Arc::clone(self.pattern.get_or_init(|| {
            let n = self.basis.len();
            Arc::new(SparsityPattern::from_elements(self.ndofs(), self.elem_dofs.chunks(n)))
        }))
    }

    /// Zero the boundary entries of a dof vector.
    pub fn mask(&self, v: &mut [f64]) {
        for &i in &self.boundary_dofs {
            v[i] = 0.0;
        }
    }

    /// True when both spaces share mesh and order (and hence dof layout).
    pub fn same_layout(&self, other: &FESpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) && self.order == other.order
    }
}

/// Coefficient vector over an `FESpace`.
#[derive(Debug, Clone)]
pub struct FEFunction {
    space: Arc<FESpace>,
    coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn zeros(space: &Arc<FESpace>) -> FEFunction {
        FEFunction { space: Arc::clone(space), coeffs: vec![0.0; space.ndofs()] }
    }

    /// Zero interior coefficients with the space's boundary values imposed.
    pub fn with_boundary_values(space: &Arc<FESpace>) -> FEFunction {
        let mut f = FEFunction::zeros(space);
        f.impose_boundary_values();
        f
    }

    pub fn from_coeffs(space: &Arc<FESpace>, coeffs: Vec<f64>) -> Result<FEFunction> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::SpaceMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(FEFunction { space: Arc::clone(space), coeffs })
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn impose_boundary_values(&mut self) {
        for (&i, &v) in self.space.boundary_dofs.iter().zip(&self.space.boundary_values) {
            self.coeffs[i] = v;
        }
    }

    /// Same coefficients viewed on another space with identical layout
    /// (e.g. the same space with a different quadrature rule).
    pub fn on_space(&self, space: &Arc<FESpace>) -> Result<FEFunction> {
        if !self.space.same_layout(space) {
            return Err(Error::SpaceMismatch("different mesh or order".into()));
        }
        Ok(FEFunction { space: Arc::clone(space), coeffs: self.coeffs.clone() })
    }

    fn check_same(&self, other: &FEFunction) -> Result<()> {
        if self.space.same_layout(&other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch("functions live on different spaces".into()))
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &FEFunction) -> Result<FEFunction> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect();
        Ok(FEFunction { space: Arc::clone(&self.space), coeffs })
    }

    pub fn sub(&self, other: &FEFunction) -> Result<FEFunction> {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, alpha: f64) -> FEFunction {
        FEFunction { space: Arc::clone(&self.space), coeffs: self.coeffs.iter().map(|c| alpha * c).collect() }
    }

    /// Value and physical gradient at reference point `xi` of element `e`.
    pub fn evaluate(&self, e: usize, xi: Point) -> (f64, Point) {
        let (v, g, _) = self.evaluate_with_hessian(e, xi);
        (v, g)
    }

    pub fn evaluate_with_hessian(&self, e: usize, xi: Point) -> (f64, Point, Mat2) {
        let (vals, grads, hess) = self.space.basis.eval(xi);
        combine(&self.space, &self.coeffs, e, &vals, &grads, &hess)
    }

    /// Value and physical gradient at quadrature point `q` of element `e`.
    pub fn at_quadrature(&self, e: usize, q: usize) -> (f64, Point) {
        self.space.eval_at_quadrature(&self.coeffs, e, q)
    }
}

impl FESpace {
    pub fn eval_at_quadrature(&self, coeffs: &[f64], e: usize, q: usize) -> (f64, Point) {
        let dofs = self.element_dofs(e);
        let vals = &self.table.values[q];
        let grads = &self.table.grads[q];
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (k, &d) in dofs.iter().enumerate() {
            let c = coeffs[d];
            v += c * vals[k];
            g[0] += c * grads[k][0];
            g[1] += c * grads[k][1];
        }
        (v, self.maps[e].push_gradient(g))
    }
}

/// Combines local basis data with global coefficients on element `e`.
pub(crate) fn combine(
    space: &FESpace,
    coeffs: &[f64],
    e: usize,
    vals: &[f64],
    grads: &[Point],
    hess: &[Mat2],
) -> (f64, Point, Mat2) {
    let dofs = space.element_dofs(e);
    let mut v = 0.0;
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for (k, &d) in dofs.iter().enumerate() {
        let c = coeffs[d];
        v += c * vals[k];
        for r in 0..2 {
            g[r] += c * grads[k][r];
            for s in 0..2 {
                h[r][s] += c * hess[k][r][s];
            }
        }
    }
    let map = &space.maps[e];
    (v, map.push_gradient(g), map.push_hessian(&h))
}

/// Nodal interpolant: coefficient `i` is `g` at dof coordinate `i`.
pub fn interpolate(space: &Arc<FESpace>, g: impl Fn(Point) -> f64) -> Result<FEFunction> {
    let mut coeffs = Vec::with_capacity(space.ndofs());
    for &x in space.dof_coords() {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "interpolation data", location: x });
        }
        coeffs.push(v);
    }
    Ok(FEFunction { space: Arc::clone(space), coeffs })
}

/// Number of lattice subdivisions used for sup-norm sampling.
pub fn sup_lattice_subdivisions(dim: usize, order: usize) -> usize {
    if dim == 1 {
        (3 * order).max(10)
    } else {
        (3 * order).max(13)
    }
}

/// Per-element `W^{1,inf}` and `W^{1,2}` norms of a discrete function.
/// The sup-norm is taken over a dense reference lattice.
pub fn element_w1_norms(f: &FEFunction, e: usize, lattice: &BasisTable) -> (f64, f64) {
    let space = f.space();
    let map = space.element_map(e);
    let mut sup: f64 = 0.0;
    for k in 0..lattice.len() {
        let (v, g, _) = combine(space, f.coeffs(), e, &lattice.values[k], &lattice.grads[k], &lattice.hessians[k]);
        sup = sup.max(v.abs()).max((g[0] * g[0] + g[1] * g[1]).sqrt());
    }
    let jac = map.volume_scale();
    let mut sq = 0.0;
    for (q, &w) in space.quadrature().weights.iter().enumerate() {
        let (v, g) = f.at_quadrature(e, q);
        sq += w * jac * (v * v + g[0] * g[0] + g[1] * g[1]);
    }
    (sup, sq.sqrt())
}

/// Largest observed ratio `||v||_{W^{1,inf}(T)} / (h^{-d/2} ||v||_{W^{1,2}(T)})`
/// over all elements and `trials` random discrete functions.
pub fn check_inverse_estimate(space: &Arc<FESpace>, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let dim = space.dim();
    let h = space.mesh().width();
    let scale = h.powf(-(dim as f64) / 2.0);
    let lattice = space.basis().tabulate(&reference_lattice(dim, sup_lattice_subdivisions(dim, space.order())));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let coeffs: Vec<f64> = (0..space.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = FEFunction::from_coeffs(space, coeffs)?;
        for e in 0..space.mesh().num_elements() {
            let (sup, w12) = element_w1_norms(&v, e, &lattice);
            if w12 > 0.0 {
                max_ratio = max_ratio.max(sup / (scale * w12));
            }
        }
    }
    Ok(max_ratio)
}
