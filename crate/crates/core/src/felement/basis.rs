//! Lagrange bases of order 1–3 on the reference simplex, written in
//! barycentric product form.

use crate::mesh::{Mat2, Point};

/// Barycentric multi-index of a Lagrange node; entries sum to the order.
pub type NodeIndex = [u8; 3];

#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub dim: usize,
    pub order: usize,
    /// Vertex nodes first, then edge nodes, then interior nodes.
    pub nodes: Vec<NodeIndex>,
    pub node_coords: Vec<Point>,
}

/// Basis values, reference gradients and reference Hessians at a set of
/// reference points, indexed `[point][basis function]`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub points: Vec<Point>,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<Point>>,
    pub hessians: Vec<Vec<Mat2>>,
}

impl BasisTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Value and first two derivatives of `prod_{j<a} (m t - j) / (j + 1)`.
fn silvester(order: usize, a: u8, t: f64) -> (f64, f64, f64) {
    let m = order as f64;
    let (mut v, mut d1, mut d2) = (1.0, 0.0, 0.0);
    for j in 0..a {
        let c = m / (f64::from(j) + 1.0);
        let f = (m * t - f64::from(j)) / (f64::from(j) + 1.0);
        d2 = d2 * f + 2.0 * d1 * c;
        d1 = d1 * f + v * c;
        v *= f;
    }
    (v, d1, d2)
}

impl ReferenceBasis {
    pub fn new(dim: usize, order: usize) -> ReferenceBasis {
        assert!((1..=2).contains(&dim) && order >= 1);
        let m = order as u8;
        let mut nodes: Vec<NodeIndex> = Vec::new();
        if dim == 1 {
            for a1 in 0..=m {
                nodes.push([m - a1, a1, 0]);
            }
        } else {
            for a1 in 0..=m {
                for a2 in 0..=m - a1 {
                    nodes.push([m - a1 - a2, a1, a2]);
                }
            }
        }
        let support = |n: &NodeIndex| n.iter().filter(|&&a| a > 0).count();
        nodes.sort_by_key(|n| (support(n), std::cmp::Reverse(*n)));
        let node_coords = nodes
            .iter()
            .map(|n| [f64::from(n[1]) / order as f64, f64::from(n[2]) / order as f64])
            .collect();
        ReferenceBasis { dim, order, nodes, node_coords }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn barycentric(&self, xi: Point) -> ([f64; 3], [Point; 3]) {
        if self.dim == 1 {
            ([1.0 - xi[0], xi[0], 0.0], [[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        } else {
            ([1.0 - xi[0] - xi[1], xi[0], xi[1]], [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        }
    }

    /// Values, gradients and Hessians of all basis functions at `xi`.
    pub fn eval(&self, xi: Point) -> (Vec<f64>, Vec<Point>, Vec<Mat2>) {
        let (lam, dlam) = self.barycentric(xi);
        let nb = self.dim + 1;
        let mut values = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        let mut hessians = Vec::with_capacity(self.len());
        for node in &self.nodes {
            let s: Vec<(f64, f64, f64)> = (0..nb).map(|i| silvester(self.order, node[i], lam[i])).collect();
            let prod_except = |skip: &[usize]| -> f64 {
                (0..nb).filter(|k| !skip.contains(k)).map(|k| s[k].0).product()
            };
            let value: f64 = s.iter().map(|t| t.0).product();
            let mut g = [0.0; 2];
            let mut h = [[0.0; 2]; 2];
            for i in 0..nb {
                let pi = prod_except(&[i]);
                for r in 0..2 {
                    g[r] += s[i].1 * dlam[i][r] * pi;
                    for c in 0..2 {
                        h[r][c] += s[i].2 * dlam[i][r] * dlam[i][c] * pi;
                    }
                }
                for j in 0..nb {
                    if j == i {
                        continue;
                    }
                    let pij = prod_except(&[i, j]);
                    for r in 0..2 {
                        for c in 0..2 {
                            h[r][c] += s[i].1 * s[j].1 * dlam[i][r] * dlam[j][c] * pij;
                        }
                    }
                }
            }
            values.push(value);
            grads.push(g);
            hessians.push(h);
        }
        (values, grads, hessians)
    }

    pub fn tabulate(&self, points: &[Point]) -> BasisTable {
        let mut table = BasisTable {
            points: points.to_vec(),
            values: Vec::with_capacity(points.len()),
            grads: Vec::with_capacity(points.len()),
            hessians: Vec::with_capacity(points.len()),
        };
        for &p in points {
            let (v, g, h) = self.eval(p);
            table.values.push(v);
            table.grads.push(g);
            table.hessians.push(h);
        }
        table
    }
}
