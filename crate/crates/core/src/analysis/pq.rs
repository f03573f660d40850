//! Sampled lower bound on the constant `C` in
//! `|d³J(u)(U, V, V)| <= C ‖U‖_{W^{2,2}} ‖V‖_{W^{1,2}} ‖V‖_{W^{o,r}}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{apply_third_variation, norms, Target};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::{interpolate, FEFunction, FESpace};
use crate::field::{ScalarField, SineSeries};

/// Highest sine frequency per direction in the smooth sample populations.
pub const MAX_FREQUENCY: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PQEstimate {
    pub samples: usize,
    pub max_ratio: f64,
    /// Largest ratio over smooth `V`.
    pub smooth_max: f64,
    /// Largest ratio over rough `V` (random nodal values).
    pub rough_max: f64,
    pub norm_pair: (u32, f64),
}

fn random_sine(dim: usize, rng: &mut ChaCha8Rng) -> SineSeries {
    let ky = if dim == 1 { 1 } else { MAX_FREQUENCY };
    let mut terms = Vec::new();
    for k0 in 1..=MAX_FREQUENCY {
        for k1 in 1..=ky {
            terms.push((rng.gen_range(-1.0..1.0), [k0, k1]));
        }
    }
    SineSeries { dim, terms }
}

fn rough(space: &std::sync::Arc<FESpace>, rng: &mut ChaCha8Rng) -> Result<FEFunction> {
    let mut c: Vec<f64> = (0..space.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    space.mask(&mut c);
    FEFunction::from_coeffs(space, c)
}

fn w_or_norm(v: &FEFunction, (o, r): (u32, f64)) -> Result<f64> {
    match o {
        1 => Ok(norms(Target::Zero, v, r, false)?.w1q),
        0 if r == 1.0 => Ok(norms(Target::Zero, v, 2.0, false)?.l1),
        0 if r == 2.0 => Ok(norms(Target::Zero, v, 2.0, false)?.l2),
        _ => Err(Error::Precondition(format!("unsupported norm pair (o, r) = ({o}, {r})"))),
    }
}

/// Draws `samples` smooth `U` together with one smooth and one rough `V`
/// each, and returns the largest observed ratio. The same seed reproduces
/// the same smooth fields on every mesh.
pub fn estimate_pq_constant(
    model: &dyn EnergyModel,
    u: &FEFunction,
    norm_pair: (u32, f64),
    samples: usize,
    seed: u64,
) -> Result<PQEstimate> {
    let space = u.space();
    if space.order() < 2 {
        return Err(Error::Precondition("PQ estimate needs a space of order >= 2".into()));
    }
    if samples == 0 {
        return Err(Error::Precondition("PQ estimate needs at least one sample".into()));
    }
    let dim = space.dim();
    let mut smooth_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rough_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut smooth_max: f64 = 0.0;
    let mut rough_max: f64 = 0.0;
    for _ in 0..samples {
        let su = random_sine(dim, &mut smooth_rng);
        let sv = random_sine(dim, &mut smooth_rng);
        let big_u = interpolate(space, |x| su.value(x))?;
        let u_norm = norms(Target::Zero, &big_u, 2.0, true)?.w22().unwrap_or(0.0);
        for (v, slot) in [
            (interpolate(space, |x| sv.value(x))?, &mut smooth_max),
            (rough(space, &mut rough_rng)?, &mut rough_max),
        ] {
            let t = apply_third_variation(model, u, &big_u, &v, &v)?;
            let denom = u_norm * norms(Target::Zero, &v, 2.0, false)?.h1() * w_or_norm(&v, norm_pair)?;
            if denom > 0.0 {
                *slot = slot.max(t.abs() / denom);
            }
        }
    }
    Ok(PQEstimate { samples, max_ratio: smooth_max.max(rough_max), smooth_max, rough_max, norm_pair })
}
