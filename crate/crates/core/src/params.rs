//! The k <-> C relation `k = C b / ln b` and the two local excess parameters.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KRounding {
    #[default]
    Nearest,
    Ceil,
}

/// Number of colors for a given C, never below 3.
pub fn k_from_c(c: f64, b: usize, rounding: KRounding) -> Result<usize> {
    if b < 2 {
        return Err(Error::InvalidParameter(
            "deriving k from C needs b >= 2 (ln b > 0)".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let raw = c * b as f64 / (b as f64).ln();
    let k = match rounding {
        KRounding::Nearest => raw.round(),
        KRounding::Ceil => raw.ceil(),
    };
    Ok((k as usize).max(3))
}

/// C realised by an integer k.
pub fn c_from_k(k: usize, b: usize) -> f64 {
    k as f64 * (b as f64).ln() / b as f64
}

/// `C - 1`, the excess used above the threshold (weighted coupling).
pub fn eps_above(k: usize, b: usize) -> f64 {
    c_from_k(k, b) - 1.0
}

/// `1/C - 1`, the excess used below the threshold (epochs, freezing).
pub fn eps_below(k: usize, b: usize) -> f64 {
    1.0 / c_from_k(k, b) - 1.0
}

/// Epoch length `ceil(20 b ln b)`.
pub fn epoch_length(b: usize) -> usize {
    (20.0 * b as f64 * (b as f64).ln()).ceil() as usize
}

/// Per-epoch coalescence lower bound on the star: `1/(20 (1+eps) b^eps ln b)`
/// for `eps > 0` and `1/(20 ln^3 b)` for `eps <= 0`.
pub fn epoch_coalescence_bound(b: usize, eps: f64) -> f64 {
    let lb = (b as f64).ln();
    if eps > 0.0 {
        1.0 / (20.0 * (1.0 + eps) * (b as f64).powf(eps) * lb)
    } else {
        1.0 / (20.0 * lb.powi(3))
    }
}
