//! Quadrature on the reference interval and triangle.
//!
//! Intervals use Gauss–Legendre rules. Triangles use the collapsed
//! (Duffy) product of two Gauss–Legendre rules, which has positive weights
//! and reaches any exactness degree.

use crate::mesh::{red_children, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

impl QuadRule {
    /// Smallest built-in rule integrating polynomials of total degree
    /// `degree` exactly.
    pub fn for_degree(dim: usize, degree: usize) -> QuadRule {
        match dim {
            1 => {
                let n = degree / 2 + 1;
                let (x, w) = gauss_legendre(n);
                QuadRule { dim, points: x.iter().map(|&t| [t, 0.0]).collect(), weights: w, exactness_degree: 2 * n - 1 }
            }
            2 => {
                // x^a y^b (1-u) in collapsed coordinates has degree a+b+1 in u.
                let n = (degree + 3) / 2;
                let (x, w) = gauss_legendre(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        points.push([u, v * (1.0 - u)]);
                        weights.push(wu * wv * (1.0 - u));
                    }
                }
                QuadRule { dim, points, weights, exactness_degree: 2 * n - 2 }
            }
            d => panic!("no quadrature for dimension {d}"),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Composite rule on `levels` uniform refinements of the reference
    /// simplex. Children are ordered exactly as `Mesh::refine` orders them,
    /// so on a refined mesh the composite rule of a coarse element and the
    /// plain rules of its children use identical physical points.
    pub fn subdivided(&self, levels: usize) -> QuadRule {
        let mut rule = self.clone();
        for _ in 0..levels {
            rule = rule.subdivide_once();
        }
        rule
    }

    fn subdivide_once(&self) -> QuadRule {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let children: Vec<[Point; 3]> = if self.dim == 1 {
            vec![[[0.0, 0.0], [0.5, 0.0], [0.0, 0.0]], [[0.5, 0.0], [1.0, 0.0], [0.0, 0.0]]]
        } else {
            let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
            red_children(v, [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]).to_vec()
        };
        let scale = 1.0 / (1 << self.dim) as f64;
        for c in &children {
            for (p, &w) in self.points.iter().zip(&self.weights) {
                let mut x = c[0];
                for k in 0..self.dim {
                    x[0] += (c[k + 1][0] - c[0][0]) * p[k];
                    x[1] += (c[k + 1][1] - c[0][1]) * p[k];
                }
                points.push(x);
                weights.push(w * scale);
            }
        }
        QuadRule { dim: self.dim, points, weights, exactness_degree: self.exactness_degree }
    }

    pub fn integrate<F: Fn(Point) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Exact integral of `x^a y^b` over the reference simplex.
pub fn reference_monomial_integral(dim: usize, a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    if dim == 1 {
        if b > 0 {
            0.0
        } else {
            1.0 / f64::from(a + 1)
        }
    } else {
        fact(a) * fact(b) / fact(a + b + 2)
    }
}
