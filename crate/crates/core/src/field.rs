//! Analytic scalar fields with closed-form derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::mesh::{Mat2, Point};

pub trait ScalarField: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
    fn hessian(&self, x: Point) -> Mat2;
}

/// Finite sum of `c * prod_i sin(k_i pi x_i)` over the first `dim`
/// coordinates. Every term vanishes on the boundary of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeries {
    pub dim: usize,
    pub terms: Vec<(f64, [u32; 2])>,
}

impl SineSeries {
    /// `prod_i sin(pi x_i)`.
    pub fn product(dim: usize) -> SineSeries {
        SineSeries { dim, terms: vec![(1.0, [1, 1])] }
    }

    pub fn scaled(mut self, factor: f64) -> SineSeries {
        for t in &mut self.terms {
            t.0 *= factor;
        }
        self
    }
}

impl ScalarField for SineSeries {
    fn value(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|&(c, k)| c * (0..self.dim).map(|i| (f64::from(k[i]) * PI * x[i]).sin()).product::<f64>())
            .sum()
    }

    fn gradient(&self, x: Point) -> Point {
        let mut g = [0.0; 2];
        for &(c, k) in &self.terms {
            let w = [f64::from(k[0]) * PI, f64::from(k[1]) * PI];
            let s = [(w[0] * x[0]).sin(), (w[1] * x[1]).sin()];
            let co = [(w[0] * x[0]).cos(), (w[1] * x[1]).cos()];
            if self.dim == 1 {
                g[0] += c * w[0] * co[0];
            } else {
                g[0] += c * w[0] * co[0] * s[1];
                g[1] += c * w[1] * s[0] * co[1];
            }
        }
        g
    }

    fn hessian(&self, x: Point) -> Mat2 {
        let mut h = [[0.0; 2]; 2];
        for &(c, k) in &self.terms {
            let w = [f64::from(k[0]) * PI, f64::from(k[1]) * PI];
            let s = [(w[0] * x[0]).sin(), (w[1] * x[1]).sin()];
            let co = [(w[0] * x[0]).cos(), (w[1] * x[1]).cos()];
            if self.dim == 1 {
                h[0][0] -= c * w[0] * w[0] * s[0];
            } else {
                h[0][0] -= c * w[0] * w[0] * s[0] * s[1];
                h[1][1] -= c * w[1] * w[1] * s[0] * s[1];
                let mixed = c * w[0] * w[1] * co[0] * co[1];
                h[0][1] += mixed;
                h[1][0] += mixed;
            }
        }
        h
    }
}

type ValueFn = dyn Fn(Point) -> f64 + Send + Sync;
type VectorFn = dyn Fn(Point) -> Point + Send + Sync;
type MatrixFn = dyn Fn(Point) -> Mat2 + Send + Sync;

/// Field assembled from closures, mostly for tests and ad-hoc studies.
#[derive(Clone)]
pub struct FnField {
    value: Arc<ValueFn>,
    gradient: Arc<VectorFn>,
    hessian: Arc<MatrixFn>,
}

impl FnField {
    pub fn new(
        value: impl Fn(Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point) -> Point + Send + Sync + 'static,
        hessian: impl Fn(Point) -> Mat2 + Send + Sync + 'static,
    ) -> FnField {
        FnField { value: Arc::new(value), gradient: Arc::new(gradient), hessian: Arc::new(hessian) }
    }

    pub fn zero() -> FnField {
        FnField::new(|_| 0.0, |_| [0.0; 2], |_| [[0.0; 2]; 2])
    }
}

impl std::fmt::Debug for FnField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FnField")
    }
}

impl ScalarField for FnField {
    fn value(&self, x: Point) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: Point) -> Point {
        (self.gradient)(x)
    }

    fn hessian(&self, x: Point) -> Mat2 {
        (self.hessian)(x)
    }
}
