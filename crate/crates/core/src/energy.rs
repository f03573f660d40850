//! Lagrangians `L(p, z, x)` with analytic partial derivatives through third
//! order, the built-in energies, and manufactured problems for them.
//!
//! Arguments: `p` is the gradient of the state, `z` its value and `x` the
//! position. In one dimension the second components of `p` and `x` are zero.
//! Third-order derivatives are exposed as contractions with directions
//! rather than as tensors.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{ScalarField, SineSeries};
use crate::mesh::{Mat2, Point};

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Which third-order blocks vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureFlags {
    pub ppp_zero: bool,
    pub ppz_zero: bool,
}

pub trait EnergyModel: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, p: Point, z: f64, x: Point) -> f64;
    fn d_p(&self, p: Point, z: f64, x: Point) -> Point;
    fn d_z(&self, p: Point, z: f64, x: Point) -> f64;

    fn d_pp(&self, p: Point, z: f64, x: Point) -> Mat2;
    fn d_pz(&self, p: Point, z: f64, x: Point) -> Point;
    fn d_zz(&self, p: Point, z: f64, x: Point) -> f64;

    /// `sum_ijk d^3 L / dp_i dp_j dp_k  a_i b_j c_k`.
    fn d_ppp(&self, p: Point, z: f64, x: Point, a: Point, b: Point, c: Point) -> f64;
    /// `sum_ij d^3 L / dp_i dp_j dz  a_i b_j`.
    fn d_ppz(&self, p: Point, z: f64, x: Point, a: Point, b: Point) -> f64;
    /// `d^3 L / dp_i dz dz` as a vector over `i`.
    fn d_pzz(&self, p: Point, z: f64, x: Point) -> Point;
    fn d_zzz(&self, p: Point, z: f64, x: Point) -> f64;

    /// Divergence in `x` of `d_p` at frozen `(p, z)`. Zero unless the
    /// gradient part of the Lagrangian depends on position explicitly.
    fn div_x_d_p(&self, _p: Point, _z: f64, _x: Point) -> f64 {
        0.0
    }

    fn flags(&self) -> StructureFlags;
}

/// Scalar potential `psi` with its first three derivatives.
#[derive(Clone, Copy)]
pub struct Potential {
    pub name: &'static str,
    pub psi: fn(f64) -> f64,
    pub d1: fn(f64) -> f64,
    pub d2: fn(f64) -> f64,
    pub d3: fn(f64) -> f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("name", &self.name).finish()
    }
}

impl Potential {
    pub fn zero() -> Potential {
        Potential { name: "0", psi: |_| 0.0, d1: |_| 0.0, d2: |_| 0.0, d3: |_| 0.0 }
    }

    /// `psi(z) = z^4 / 4`.
    pub fn quartic() -> Potential {
        Potential {
            name: "z^4/4",
            psi: |z| 0.25 * z.powi(4),
            d1: |z| z.powi(3),
            d2: |z| 3.0 * z * z,
            d3: |z| 6.0 * z,
        }
    }

    /// `psi(z) = cos z`.
    pub fn cosine() -> Potential {
        Potential { name: "cos z", psi: f64::cos, d1: |z| -z.sin(), d2: |z| -z.cos(), d3: f64::sin }
    }

    pub fn is_zero(&self) -> bool {
        [-1.3, 0.0, 0.7, 2.1].iter().all(|&z| (self.d2)(z) == 0.0 && (self.d3)(z) == 0.0 && (self.d1)(z) == 0.0)
    }

    /// Central-difference cross-check of the derivative ladder.
    pub fn check_consistency(&self) -> Result<()> {
        let eps = 1e-5;
        let funcs = [self.psi, self.d1, self.d2, self.d3];
        for z in [-1.7, -0.4, 0.0, 0.3, 1.1, 2.5] {
            for k in 0..3 {
                let fd = ((funcs[k])(z + eps) - (funcs[k])(z - eps)) / (2.0 * eps);
                let exact = (funcs[k + 1])(z);
                if (fd - exact).abs() > 1e-6 * (1.0 + exact.abs()) {
                    return Err(Error::Precondition(format!(
                        "potential '{}': derivative {} inconsistent at z = {z}",
                        self.name,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

pub type Forcing = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

fn zero_forcing() -> Forcing {
    Arc::new(|_| 0.0)
}

/// `L(p, z, x) = |p|^2 / 2 + psi(z) - f(x) z`.
#[derive(Clone)]
pub struct DirichletPotential {
    name: String,
    potential: Potential,
    forcing: Forcing,
}

impl fmt::Debug for DirichletPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletPotential").field("potential", &self.potential).finish()
    }
}

pub fn dirichlet_potential_model(potential: Potential, forcing: Forcing) -> Result<DirichletPotential> {
    potential.check_consistency()?;
    Ok(DirichletPotential { name: format!("dirichlet+psi({})", potential.name), potential, forcing })
}

impl DirichletPotential {
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn forcing(&self, x: Point) -> f64 {
        (self.forcing)(x)
    }
}

impl EnergyModel for DirichletPotential {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, p: Point, z: f64, x: Point) -> f64 {
        0.5 * dot(p, p) + (self.potential.psi)(z) - (self.forcing)(x) * z
    }

    fn d_p(&self, p: Point, _z: f64, _x: Point) -> Point {
        p
    }

    fn d_z(&self, _p: Point, z: f64, x: Point) -> f64 {
        (self.potential.d1)(z) - (self.forcing)(x)
    }

    fn d_pp(&self, _p: Point, _z: f64, _x: Point) -> Mat2 {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    fn d_pz(&self, _p: Point, _z: f64, _x: Point) -> Point {
        [0.0; 2]
    }

    fn d_zz(&self, _p: Point, z: f64, _x: Point) -> f64 {
        (self.potential.d2)(z)
    }

    fn d_ppp(&self, _p: Point, _z: f64, _x: Point, _a: Point, _b: Point, _c: Point) -> f64 {
        0.0
    }

    fn d_ppz(&self, _p: Point, _z: f64, _x: Point, _a: Point, _b: Point) -> f64 {
        0.0
    }

    fn d_pzz(&self, _p: Point, _z: f64, _x: Point) -> Point {
        [0.0; 2]
    }

    fn d_zzz(&self, _p: Point, z: f64, _x: Point) -> f64 {
        (self.potential.d3)(z)
    }

    fn flags(&self) -> StructureFlags {
        StructureFlags { ppp_zero: true, ppz_zero: true }
    }
}

/// Graph area `L(p, z, x) = sqrt(1 + |p|^2) - f(x) z`.
#[derive(Clone)]
pub struct MinimalSurface {
    forcing: Forcing,
}

impl fmt::Debug for MinimalSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MinimalSurface")
    }
}

pub fn minimal_surface_model() -> MinimalSurface {
    MinimalSurface { forcing: zero_forcing() }
}

impl MinimalSurface {
    pub fn with_forcing(forcing: Forcing) -> MinimalSurface {
        MinimalSurface { forcing }
    }
}

impl EnergyModel for MinimalSurface {
    fn name(&self) -> &str {
        "minimal_surface"
    }

    fn value(&self, p: Point, z: f64, x: Point) -> f64 {
        (1.0 + dot(p, p)).sqrt() - (self.forcing)(x) * z
    }

    fn d_p(&self, p: Point, _z: f64, _x: Point) -> Point {
        let w = (1.0 + dot(p, p)).sqrt();
        [p[0] / w, p[1] / w]
    }

    fn d_z(&self, _p: Point, _z: f64, x: Point) -> f64 {
        -(self.forcing)(x)
    }

    fn d_pp(&self, p: Point, _z: f64, _x: Point) -> Mat2 {
        let w2 = 1.0 + dot(p, p);
        let w = w2.sqrt();
        let mut a = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                a[i][j] = (delta - p[i] * p[j] / w2) / w;
            }
        }
        a
    }

    fn d_pz(&self, _p: Point, _z: f64, _x: Point) -> Point {
        [0.0; 2]
    }

    fn d_zz(&self, _p: Point, _z: f64, _x: Point) -> f64 {
        0.0
    }

    fn d_ppp(&self, p: Point, _z: f64, _x: Point, a: Point, b: Point, c: Point) -> f64 {
        let w2 = 1.0 + dot(p, p);
        let w3 = w2 * w2.sqrt();
        let w5 = w3 * w2;
        let (pa, pb, pc) = (dot(p, a), dot(p, b), dot(p, c));
        -(dot(a, b) * pc + dot(a, c) * pb + dot(b, c) * pa) / w3 + 3.0 * pa * pb * pc / w5
    }

    fn d_ppz(&self, _p: Point, _z: f64, _x: Point, _a: Point, _b: Point) -> f64 {
        0.0
    }

    fn d_pzz(&self, _p: Point, _z: f64, _x: Point) -> Point {
        [0.0; 2]
    }

    fn d_zzz(&self, _p: Point, _z: f64, _x: Point) -> f64 {
        0.0
    }

    fn flags(&self) -> StructureFlags {
        StructureFlags { ppp_zero: false, ppz_zero: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Linear,
    Semilinear,
    Quasilinear,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Linear => "linear",
            Classification::Semilinear => "semilinear",
            Classification::Quasilinear => "quasilinear",
        })
    }
}

/// Magnitudes of the four third-order blocks at one sampled state.
fn third_order_magnitudes(model: &dyn EnergyModel, rng: &mut ChaCha8Rng) -> [f64; 4] {
    let mut v = || [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let (p, a, b, c) = (v(), v(), v(), v());
    let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    let z = rng.gen_range(-2.0..2.0);
    let pzz = model.d_pzz(p, z, x);
    [
        model.d_ppp(p, z, x, a, b, c).abs(),
        model.d_ppz(p, z, x, a, b).abs(),
        pzz[0].abs().max(pzz[1].abs()),
        model.d_zzz(p, z, x).abs(),
    ]
}

/// Structural classification of the Euler–Lagrange equation from sampled
/// third derivatives: semilinear when the `ppp` and `ppz` blocks vanish,
/// linear when every third-order block vanishes.
pub fn classify(model: &dyn EnergyModel) -> Classification {
    const SAMPLES: usize = 100;
    const ZERO: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = [0.0f64; 4];
    for _ in 0..SAMPLES {
        let m = third_order_magnitudes(model, &mut rng);
        for k in 0..4 {
            worst[k] = worst[k].max(m[k]);
        }
    }
    if worst.iter().all(|&w| w < ZERO) {
        Classification::Linear
    } else if worst[0] < ZERO && worst[1] < ZERO {
        Classification::Semilinear
    } else {
        Classification::Quasilinear
    }
}

/// Built-in potential choices for manufactured semilinear problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiChoice {
    Quartic,
    Cosine,
}

/// Energy together with an exact minimizer whose forcing term has been
/// chosen so that the Euler–Lagrange equation holds identically.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: String,
    pub dim: usize,
    pub model: Arc<dyn EnergyModel>,
    pub exact: Arc<dyn ScalarField>,
}

impl fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl ManufacturedProblem {
    pub fn boundary_value(&self, x: Point) -> f64 {
        self.exact.value(x)
    }

    /// Pointwise `-div(d_p L) + d_z L` at the exact solution, evaluated
    /// analytically by the chain rule.
    pub fn euler_lagrange_residual(&self, x: Point) -> f64 {
        let u = self.exact.value(x);
        let g = self.exact.gradient(x);
        let h = self.exact.hessian(x);
        let a = self.model.d_pp(g, u, x);
        let b = self.model.d_pz(g, u, x);
        let mut div = self.model.div_x_d_p(g, u, x);
        for i in 0..self.dim {
            for j in 0..self.dim {
                div += a[i][j] * h[j][i];
            }
            div += b[i] * g[i];
        }
        -div + self.model.d_z(g, u, x)
    }
}

fn laplacian(h: &Mat2, dim: usize) -> f64 {
    (0..dim).map(|i| h[i][i]).sum()
}

/// `-Laplace u + psi'(u) = f` with `u = prod_i sin(pi x_i)`.
pub fn manufactured_semilinear(dim: usize, choice: PsiChoice) -> Result<ManufacturedProblem> {
    let potential = match choice {
        PsiChoice::Quartic => Potential::quartic(),
        PsiChoice::Cosine => Potential::cosine(),
    };
    manufactured_potential(dim, potential, match choice {
        PsiChoice::Quartic => "quartic",
        PsiChoice::Cosine => "cosine",
    })
}

/// Pure Dirichlet energy (`psi = 0`) with the same exact solution.
pub fn manufactured_linear(dim: usize) -> Result<ManufacturedProblem> {
    manufactured_potential(dim, Potential::zero(), "linear")
}

fn manufactured_potential(dim: usize, potential: Potential, name: &str) -> Result<ManufacturedProblem> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let exact = SineSeries::product(dim);
    let ex = exact.clone();
    let d1 = potential.d1;
    let forcing: Forcing = Arc::new(move |x| -laplacian(&ex.hessian(x), dim) + d1(ex.value(x)));
    let model = dirichlet_potential_model(potential, forcing)?;
    Ok(ManufacturedProblem { name: name.to_string(), dim, model: Arc::new(model), exact: Arc::new(exact) })
}

/// Minimal-surface energy with forcing `f = -div(grad u / sqrt(1 + |grad u|^2))`
/// for `u = prod_i sin(pi x_i)`.
pub fn manufactured_minimal_surface(dim: usize) -> Result<ManufacturedProblem> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let exact = SineSeries::product(dim);
    let ex = exact.clone();
    let forcing: Forcing = Arc::new(move |x| {
        let g = ex.gradient(x);
        let h = ex.hessian(x);
        let w2 = 1.0 + dot(g, g);
        let w = w2.sqrt();
        let mut ghg = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                ghg += g[i] * h[i][j] * g[j];
            }
        }
        -laplacian(&h, dim) / w + ghg / (w2 * w)
    });
    Ok(ManufacturedProblem {
        name: "minimal_surface".into(),
        dim,
        model: Arc::new(MinimalSurface::with_forcing(forcing)),
        exact: Arc::new(exact),
    })
}

/// The built-in problems offered by the study driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Linear,
    Quartic,
    Cosine,
    MinimalSurface,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::Linear, Problem::Quartic, Problem::Cosine, Problem::MinimalSurface];

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Linear => "linear",
            Problem::Quartic => "quartic",
            Problem::Cosine => "cosine",
            Problem::MinimalSurface => "minimal_surface",
        }
    }

    pub fn from_name(name: &str) -> Option<Problem> {
        Problem::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn energy_formula(&self) -> &'static str {
        match self {
            Problem::Linear => "J(u) = int |Du|^2/2 - f u dx",
            Problem::Quartic => "J(u) = int |Du|^2/2 + u^4/4 - f u dx",
            Problem::Cosine => "J(u) = int |Du|^2/2 + cos(u) - f u dx",
            Problem::MinimalSurface => "J(u) = int sqrt(1 + |Du|^2) - f u dx",
        }
    }

    pub fn euler_lagrange(&self) -> &'static str {
        match self {
            Problem::Linear => "-Laplace u = f",
            Problem::Quartic => "-Laplace u + u^3 = f",
            Problem::Cosine => "-Laplace u - sin(u) = f",
            Problem::MinimalSurface => "-div(Du / sqrt(1 + |Du|^2)) = f",
        }
    }

    pub fn manufactured(&self, dim: usize) -> Result<ManufacturedProblem> {
        match self {
            Problem::Linear => manufactured_linear(dim),
            Problem::Quartic => manufactured_semilinear(dim, PsiChoice::Quartic),
            Problem::Cosine => manufactured_semilinear(dim, PsiChoice::Cosine),
            Problem::MinimalSurface => manufactured_minimal_surface(dim),
        }
    }
}
