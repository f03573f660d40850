//! Conforming simplicial meshes of intervals (d = 1) and triangles (d = 2)
//! with uniform red refinement.
//!
//! Every element carries an affine map to the reference simplex
//! (`[0, 1]` or the triangle with vertices `(0,0), (1,0), (0,1)`). A refined
//! mesh keeps a handle to its parent and the parent element of each child,
//! so that nested function spaces can be related exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Coordinates (or vectors) in the plane. In one dimension the second
/// component is zero.
pub type Point = [f64; 2];

/// Dense 2×2 matrix, row-major. For d = 1 only entry `[0][0]` is meaningful.
pub type Mat2 = [[f64; 2]; 2];

/// Vertex indices of a simplex; only the first `dim + 1` are used.
pub type Simplex = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    /// Vertex indices; only the first `dim` are used.
    pub vertices: [usize; 2],
    pub marker: u32,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    elements: Vec<Simplex>,
    boundary_facets: Vec<BoundaryFacet>,
    level: usize,
    parent: Option<Arc<Mesh>>,
    parent_element: Vec<usize>,
}

/// Affine map between a physical element and the reference simplex.
///
/// `affine_part` and `offset` describe the map to the reference element,
/// `xi = affine_part * x + offset`; `det` is its determinant. `jacobian` and
/// `origin` describe the inverse map `x = origin + jacobian * xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap {
    pub element: usize,
    pub dim: usize,
    pub affine_part: Mat2,
    pub offset: Point,
    pub det: f64,
    pub jacobian: Mat2,
    pub origin: Point,
}

impl ElementMap {
    pub fn to_physical(&self, xi: Point) -> Point {
        let b = &self.jacobian;
        [
            self.origin[0] + b[0][0] * xi[0] + b[0][1] * xi[1],
            self.origin[1] + b[1][0] * xi[0] + b[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let a = &self.affine_part;
        [
            self.offset[0] + a[0][0] * x[0] + a[0][1] * x[1],
            self.offset[1] + a[1][0] * x[0] + a[1][1] * x[1],
        ]
    }

    /// `|det B|` for `x = origin + B xi`; converts reference to physical measure.
    pub fn volume_scale(&self) -> f64 {
        1.0 / self.det.abs()
    }

    /// Physical gradient `B^{-T} g` from a reference gradient `g`.
    pub fn push_gradient(&self, g: Point) -> Point {
        let a = &self.affine_part;
        [a[0][0] * g[0] + a[1][0] * g[1], a[0][1] * g[0] + a[1][1] * g[1]]
    }

    /// Physical Hessian `B^{-T} H B^{-1}` from a reference Hessian `H`.
    pub fn push_hessian(&self, h: &Mat2) -> Mat2 {
        let a = &self.affine_part;
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += a[k][i] * h[k][l] * a[l][j];
                    }
                }
                out[i][j] = s;
            }
        }
        out
    }

    /// Operator norm (Frobenius bound) of the reference-to-physical Jacobian.
    pub fn jacobian_norm(&self) -> f64 {
        self.jacobian.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Measure of the reference simplex.
pub fn reference_measure(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        0.5
    }
}

/// Red refinement of a triangle `(v0, v1, v2)` given its edge midpoints
/// `m01, m12, m02`. Shared by mesh refinement and composite quadrature so
/// that both produce the same child vertex orderings.
pub fn red_children<T: Copy>(v: [T; 3], m01: T, m12: T, m02: T) -> [[T; 3]; 4] {
    [
        [v[0], m01, m02],
        [m01, v[1], m12],
        [m02, m12, v[2]],
        [m12, m02, m01],
    ]
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Uniform mesh of the unit interval or unit square with
    /// `cells_per_side` cells per coordinate direction. Each square is split
    /// into two triangles along the same diagonal.
    ///
    /// Boundary markers for the square: 1 = bottom, 2 = right, 3 = top,
    /// 4 = left. For the interval: 1 = left end, 2 = right end.
    pub fn build_unit_mesh(dim: usize, cells_per_side: usize) -> Result<Mesh> {
        if cells_per_side == 0 {
            return Err(Error::Precondition("cells_per_side must be at least 1".into()));
        }
        let n = cells_per_side;
        match dim {
            1 => {
                let vertices = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
                let elements = (0..n).map(|i| [i, i + 1, 0]).collect();
                let boundary_facets = vec![
                    BoundaryFacet { vertices: [0, 0], marker: 1 },
                    BoundaryFacet { vertices: [n, 0], marker: 2 },
                ];
                Mesh::assemble(1, vertices, elements, boundary_facets)
            }
            2 => {
                let idx = |i: usize, j: usize| j * (n + 1) + i;
                let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                    }
                }
                let mut elements = Vec::with_capacity(2 * n * n);
                for j in 0..n {
                    for i in 0..n {
                        let a = idx(i, j);
                        let b = idx(i + 1, j);
                        let c = idx(i + 1, j + 1);
                        let d = idx(i, j + 1);
                        elements.push([a, b, c]);
                        elements.push([a, c, d]);
                    }
                }
                let mut boundary_facets = Vec::with_capacity(4 * n);
                for i in 0..n {
                    boundary_facets.push(BoundaryFacet { vertices: [idx(i, 0), idx(i + 1, 0)], marker: 1 });
                    boundary_facets.push(BoundaryFacet { vertices: [idx(n, i), idx(n, i + 1)], marker: 2 });
                    boundary_facets.push(BoundaryFacet { vertices: [idx(i + 1, n), idx(i, n)], marker: 3 });
                    boundary_facets.push(BoundaryFacet { vertices: [idx(0, i + 1), idx(0, i)], marker: 4 });
                }
                Mesh::assemble(2, vertices, elements, boundary_facets)
            }
            d => Err(Error::InvalidDimension(d)),
        }
    }

    /// Mesh from raw vertex and element lists. Boundary facets are the
    /// facets owned by exactly one element; they all receive marker 1.
    /// Negatively oriented simplices are reoriented.
    pub fn from_parts(dim: usize, vertices: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Mesh> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut simplices = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter().enumerate() {
            if el.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!("element {e} has {} vertices", el.len())));
            }
            let mut s = [0usize; 3];
            s[..=dim].copy_from_slice(el);
            if s[..=dim].iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("element {e} references a missing vertex")));
            }
            let det = simplex_det(dim, &vertices, &s);
            if det < 0.0 {
                s.swap(dim - 1, dim);
            }
            simplices.push(s);
        }

        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for s in &simplices {
            for f in facets_of(dim, s) {
                *counts.entry(edge_key(f[0], f[1])).or_default() += 1;
            }
        }
        let mut boundary_facets: Vec<BoundaryFacet> = Vec::new();
        for s in &simplices {
            for f in facets_of(dim, s) {
                if counts[&edge_key(f[0], f[1])] == 1 {
                    boundary_facets.push(BoundaryFacet { vertices: f, marker: 1 });
                }
            }
        }
        Mesh::assemble(dim, vertices, simplices, boundary_facets)
    }

    fn assemble(
        dim: usize,
        vertices: Vec<Point>,
        elements: Vec<Simplex>,
        boundary_facets: Vec<BoundaryFacet>,
    ) -> Result<Mesh> {
        let mesh = Mesh { dim, vertices, elements, boundary_facets, level: 0, parent: None, parent_element: Vec::new() };
        for e in 0..mesh.num_elements() {
            mesh.element_map(e)?;
        }
        Ok(mesh)
    }

    /// Uniform refinement: bisection in 1D, red refinement (four congruent
    /// children) in 2D. Existing vertices keep their indices.
    pub fn refine(self: &Arc<Self>) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut elements = Vec::with_capacity(self.elements.len() << self.dim);
        let mut parent_element = Vec::with_capacity(elements.capacity());
        let mut boundary_facets = Vec::with_capacity(2 * self.boundary_facets.len());

        match self.dim {
            1 => {
                for (e, s) in self.elements.iter().enumerate() {
                    let m = vertices.len();
                    vertices.push(midpoint(self.vertices[s[0]], self.vertices[s[1]]));
                    elements.push([s[0], m, 0]);
                    elements.push([m, s[1], 0]);
                    parent_element.extend([e, e]);
                }
                boundary_facets.extend(self.boundary_facets.iter().copied());
            }
            _ => {
                let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
                let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
                    *mids.entry(edge_key(a, b)).or_insert_with(|| {
                        vertices.push(midpoint(vertices[a], vertices[b]));
                        vertices.len() - 1
                    })
                };
                for (e, s) in self.elements.iter().enumerate() {
                    let m01 = mid(s[0], s[1], &mut vertices);
                    let m12 = mid(s[1], s[2], &mut vertices);
                    let m02 = mid(s[0], s[2], &mut vertices);
                    for child in red_children([s[0], s[1], s[2]], m01, m12, m02) {
                        elements.push(child);
                        parent_element.push(e);
                    }
                }
                for f in &self.boundary_facets {
                    let [a, b] = f.vertices;
                    let m = mid(a, b, &mut vertices);
                    boundary_facets.push(BoundaryFacet { vertices: [a, m], marker: f.marker });
                    boundary_facets.push(BoundaryFacet { vertices: [m, b], marker: f.marker });
                }
            }
        }

        Mesh {
            dim: self.dim,
            vertices,
            elements,
            boundary_facets,
            level: self.level + 1,
            parent: Some(Arc::clone(self)),
            parent_element,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    /// Parent element (in `self.parent()`) of element `e`.
    pub fn parent_element(&self, e: usize) -> Option<usize> {
        self.parent_element.get(e).copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..=self.dim]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Mesh width: the longest element edge.
    pub fn width(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.longest_edge(e)).fold(0.0, f64::max)
    }

    pub fn longest_edge(&self, e: usize) -> f64 {
        let s = self.element(e);
        let mut h: f64 = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                h = h.max(dist(self.vertices[s[i]], self.vertices[s[j]]));
            }
        }
        h
    }

    pub fn measure(&self, e: usize) -> f64 {
        simplex_det(self.dim, &self.vertices, &self.elements[e]).abs() * reference_measure(self.dim)
    }

    pub fn element_map(&self, e: usize) -> Result<ElementMap> {
        let s = &self.elements[e];
        let x0 = self.vertices[s[0]];
        let mut b = [[0.0; 2]; 2];
        for k in 0..self.dim {
            let xk = self.vertices[s[k + 1]];
            b[0][k] = xk[0] - x0[0];
            b[1][k] = xk[1] - x0[1];
        }
        let (det_b, inv) = if self.dim == 1 {
            (b[0][0], [[1.0 / b[0][0], 0.0], [0.0, 0.0]])
        } else {
            let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            (det, [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]])
        };
        let scale = self.longest_edge(e).powi(self.dim as i32);
        if !(det_b.abs() > 1e-14 * scale) || !det_b.is_finite() {
            return Err(Error::DegenerateElement { element: e, det: det_b });
        }
        let offset = [
            -(inv[0][0] * x0[0] + inv[0][1] * x0[1]),
            -(inv[1][0] * x0[0] + inv[1][1] * x0[1]),
        ];
        Ok(ElementMap {
            element: e,
            dim: self.dim,
            affine_part: inv,
            offset,
            det: 1.0 / det_b,
            jacobian: b,
            origin: x0,
        })
    }

    /// Ancestor of element `e` that is `generations` levels coarser.
    pub fn ancestor(&self, e: usize, generations: usize) -> Option<(&Mesh, usize)> {
        let mut mesh = self;
        let mut elem = e;
        for _ in 0..generations {
            elem = mesh.parent_element(elem)?;
            mesh = mesh.parent.as_deref()?;
        }
        Some((mesh, elem))
    }

    /// Number of refinement generations from `ancestor` to `self`, if
    /// `ancestor` is (pointer-equal to) one of this mesh's ancestors or self.
    pub fn generations_below(&self, ancestor: &Mesh) -> Option<usize> {
        let mut mesh = self;
        let mut n = 0;
        loop {
            if std::ptr::eq(mesh, ancestor) {
                return Some(n);
            }
            mesh = mesh.parent.as_deref()?;
            n += 1;
        }
    }

    /// Checks that elements meet only in common faces: every facet is shared
    /// by at most two elements, facets owned by one element are exactly the
    /// boundary facets, and no vertex lies in the interior of a foreign edge.
    pub fn check_conforming(&self) -> Result<()> {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for s in &self.elements {
            for f in facets_of(self.dim, s) {
                *counts.entry(edge_key(f[0], f[1])).or_default() += 1;
            }
        }
        if let Some((f, c)) = counts.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!("facet {f:?} shared by {c} elements")));
        }
        let mut boundary: Vec<(usize, usize)> = counts.iter().filter(|(_, &c)| c == 1).map(|(f, _)| *f).collect();
        let mut marked: Vec<(usize, usize)> = self
            .boundary_facets
            .iter()
            .map(|f| if self.dim == 1 { (f.vertices[0], f.vertices[0]) } else { edge_key(f.vertices[0], f.vertices[1]) })
            .collect();
        boundary.sort_unstable();
        marked.sort_unstable();
        if boundary != marked {
            return Err(Error::InvalidMesh("boundary facets do not match facets owned by one element".into()));
        }
        if self.dim == 2 {
            self.check_no_hanging_vertices(&counts)?;
        }
        Ok(())
    }

    fn check_no_hanging_vertices(&self, edges: &HashMap<(usize, usize), usize>) -> Result<()> {
        let h = self.width().max(f64::MIN_POSITIVE);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let cell = |p: Point| ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64);
        for (v, &p) in self.vertices.iter().enumerate() {
            buckets.entry(cell(p)).or_default().push(v);
        }
        for &(a, b) in edges.keys() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = dist(pa, pb);
            let (ca, cb) = (cell(pa), cell(pb));
            for i in ca.0.min(cb.0)..=ca.0.max(cb.0) {
                for j in ca.1.min(cb.1)..=ca.1.max(cb.1) {
                    for &v in buckets.get(&(i, j)).into_iter().flatten() {
                        if v == a || v == b {
                            continue;
                        }
                        let p = self.vertices[v];
                        let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
                        let cross = (p[0] - pa[0]) * (pb[1] - pa[1]) - (p[1] - pa[1]) * (pb[0] - pa[0]);
                        if t > 1e-12 && t < 1.0 - 1e-12 && (cross / len).abs() < 1e-12 * len {
                            return Err(Error::InvalidMesh(format!("vertex {v} hangs on edge ({a}, {b})")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: `v x [y]`, `e i0 i1 [i2]`, `b i0 [i1] marker`.
    /// Coordinates use the shortest representation that round-trips.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for p in &self.vertices {
            if self.dim == 1 {
                let _ = writeln!(out, "v {}", p[0]);
            } else {
                let _ = writeln!(out, "v {} {}", p[0], p[1]);
            }
        }
        for e in 0..self.num_elements() {
            let idx: Vec<String> = self.element(e).iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "e {}", idx.join(" "));
        }
        for f in &self.boundary_facets {
            let idx: Vec<String> = f.vertices[..self.dim].iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "b {} {}", idx.join(" "), f.marker);
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Mesh> {
        let mut dim = 0;
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        let mut facets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let mut tokens = line.split_whitespace();
            let Some(tag) = tokens.next() else { continue };
            let rest: Vec<&str> = tokens.collect();
            match tag {
                "v" => {
                    if dim == 0 {
                        dim = rest.len();
                    }
                    if rest.len() != dim || !(1..=2).contains(&dim) {
                        return Err(err(format!("expected {dim} coordinates")));
                    }
                    let mut p = [0.0; 2];
                    for (k, t) in rest.iter().enumerate() {
                        p[k] = t.parse().map_err(|e| err(format!("{e}")))?;
                    }
                    vertices.push(p);
                }
                "e" => {
                    if rest.len() != dim + 1 {
                        return Err(err(format!("expected {} vertex indices", dim + 1)));
                    }
                    let mut s = [0usize; 3];
                    for (k, t) in rest.iter().enumerate() {
                        s[k] = t.parse().map_err(|e| err(format!("{e}")))?;
                    }
                    elements.push(s);
                }
                "b" => {
                    if rest.len() != dim + 1 {
                        return Err(err(format!("expected {dim} vertex indices and a marker")));
                    }
                    let mut f = [0usize; 2];
                    for (k, t) in rest[..dim].iter().enumerate() {
                        f[k] = t.parse().map_err(|e| err(format!("{e}")))?;
                    }
                    let marker = rest[dim].parse().map_err(|e| err(format!("{e}")))?;
                    facets.push(BoundaryFacet { vertices: f, marker });
                }
                other => return Err(err(format!("unknown record '{other}'"))),
            }
        }
        if dim == 0 {
            return Err(Error::Parse { line: 0, message: "no vertices".into() });
        }
        if elements.iter().flat_map(|s| s[..=dim].iter()).any(|&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh("element references a missing vertex".into()));
        }
        Mesh::assemble(dim, vertices, elements, facets)
    }
}

fn simplex_det(dim: usize, vertices: &[Point], s: &Simplex) -> f64 {
    let x0 = vertices[s[0]];
    if dim == 1 {
        vertices[s[1]][0] - x0[0]
    } else {
        let (x1, x2) = (vertices[s[1]], vertices[s[2]]);
        (x1[0] - x0[0]) * (x2[1] - x0[1]) - (x2[0] - x0[0]) * (x1[1] - x0[1])
    }
}

fn facets_of(dim: usize, s: &Simplex) -> Vec<[usize; 2]> {
    if dim == 1 {
        vec![[s[0], s[0]], [s[1], s[1]]]
    } else {
        vec![[s[0], s[1]], [s[1], s[2]], [s[2], s[0]]]
    }
}
