//! Log-log least-squares fits of error against mesh width.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// The `(h, error)` pairs that entered the fit.
    pub levels: Vec<(f64, f64)>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Least-squares slope and coefficient of determination of `ln e` against
/// `ln h`. Needs at least two points with distinct `h`.
pub fn least_squares_slope(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pairs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Some((slope, r2))
}

pub fn estimate_rate(pairs: &[(f64, f64)]) -> Result<RateEstimate> {
    for (i, a) in pairs.iter().enumerate() {
        if !(a.0 > 0.0) || !a.0.is_finite() {
            return Err(Error::Precondition(format!("mesh width {} is not positive", a.0)));
        }
        if pairs[..i].iter().any(|b| b.0 == a.0) {
            return Err(Error::Precondition(format!("duplicate mesh width {}", a.0)));
        }
    }
    let mut kept = Vec::with_capacity(pairs.len());
    for &(h, e) in pairs {
        if e > 0.0 && e.is_finite() {
            kept.push((h, e));
        } else {
            log::warn!("excluding error {e:e} at h = {h:e} from the rate fit");
        }
    }
    if kept.len() < 3 {
        return Err(Error::Precondition(format!("rate fit needs at least 3 positive errors, got {}", kept.len())));
    }
    let (slope, r_squared) = least_squares_slope(&kept).expect("distinct widths");
    Ok(RateEstimate { levels: kept, slope, r_squared })
}
