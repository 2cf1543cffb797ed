//! Growth of mixing estimates with tree height at fixed `b` and `C`.
//!
//! Below the threshold the estimate is the conductance lower bound
//! `1/Φ_S` for the frozen-root set, evaluated from the exact critical-leaf
//! path product. Above it the estimate is the coupling-time upper estimate
//! from the default start grid.

use crate::coloring::Palette;
use crate::coupling::{default_grid, mixing_time_upper_estimate};
use crate::error::{Error, Result};
use crate::freeze::{expected_critical_leaves, freeze_prob_exact_recursion};
use crate::params::{self, KRounding};
use crate::stats::fit_slope;
use crate::tree::TreeShape;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMethod {
    ConductanceLower,
    CouplingUpper,
}

impl ScanMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ConductanceLower => "conductance-lower",
            Self::CouplingUpper => "coupling-upper",
        }
    }

    /// Conductance at or below the threshold, coupling above it.
    pub fn for_c(c: f64) -> Self {
        if c > 1.0 {
            Self::CouplingUpper
        } else {
            Self::ConductanceLower
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub height: usize,
    pub n: usize,
    pub estimate: f64,
    /// For the conductance method: `(6/n) E[#critical]`.
    pub phi_sum: Option<f64>,
    /// Coupling method: whether the threshold was reached within budget.
    pub reached: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub b: usize,
    pub k: usize,
    pub c_requested: f64,
    pub c_realised: f64,
    pub method: ScanMethod,
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of `ln(estimate)` on `ln(n)`.
    pub slope: f64,
    /// `1/C` for the conductance method.
    pub target: Option<f64>,
    /// `b^(1-1/C)/C`, the finite-b slack on the target.
    pub slack: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub b: usize,
    pub c: f64,
    pub heights: Vec<usize>,
    pub rounding: KRounding,
    pub method: Option<ScanMethod>,
    pub replicas: usize,
    pub budget: u64,
    pub seed: u64,
    pub workers: usize,
}

/// Lower bound `1/Φ_S` on the relaxation time from the exact critical-leaf
/// expectation with the exact normalization `π(S) π(S^c)`.
pub fn conductance_lower_bound(k: usize, b: usize, height: usize) -> Result<(f64, f64)> {
    let shape = TreeShape::new(b, height)?;
    let n = shape.n() as f64;
    let crit = expected_critical_leaves(k, b, height)?;
    let low_share = (k / 2) as f64 / k as f64;
    let pi_s = low_share * freeze_prob_exact_recursion(k, b, height)?[height];
    let phi = low_share * crit / (n * pi_s * (1.0 - pi_s));
    Ok((1.0 / phi, 6.0 / n * crit))
}

pub fn scan_exponent(cfg: &ScanConfig) -> Result<ScanReport> {
    if cfg.heights.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "scan needs at least 2 heights, got {}",
            cfg.heights.len()
        )));
    }
    let k = params::k_from_c(cfg.c, cfg.b, cfg.rounding)?;
    let palette = Palette::new(k)?;
    let c_realised = params::c_from_k(k, cfg.b);
    let method = cfg.method.unwrap_or(ScanMethod::for_c(cfg.c));
    let mut rows = Vec::new();
    for &h in &cfg.heights {
        if h == 0 {
            return Err(Error::InvalidParameter("scan heights must be at least 1".into()));
        }
        let shape = TreeShape::new(cfg.b, h)?;
        let row = match method {
            ScanMethod::ConductanceLower => {
                let (estimate, phi) = conductance_lower_bound(k, cfg.b, h)?;
                ScanRow {
                    height: h,
                    n: shape.n(),
                    estimate,
                    phi_sum: Some(phi),
                    reached: estimate.is_finite(),
                }
            }
            ScanMethod::CouplingUpper => {
                let grid = default_grid(shape, palette, cfg.seed ^ h as u64)?;
                let est = mixing_time_upper_estimate(&grid, cfg.replicas, cfg.budget, cfg.seed ^ h as u64, cfg.workers)?;
                ScanRow {
                    height: h,
                    n: shape.n(),
                    estimate: est.t.unwrap_or(cfg.budget) as f64,
                    phi_sum: None,
                    reached: est.t.is_some(),
                }
            }
        };
        rows.push(row);
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
    let conductance = method == ScanMethod::ConductanceLower;
    Ok(ScanReport {
        b: cfg.b,
        k,
        c_requested: cfg.c,
        c_realised,
        method,
        slope: fit_slope(&x, &y),
        target: conductance.then(|| 1.0 / cfg.c),
        slack: conductance.then(|| (cfg.b as f64).powf(1.0 - 1.0 / cfg.c) / cfg.c),
        rows,
        replicas: cfg.replicas,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_height_is_rejected() {
        let cfg = ScanConfig {
            b: 16,
            c: 0.5,
            heights: vec![2],
            rounding: KRounding::Nearest,
            method: None,
            replicas: 10,
            budget: 10,
            seed: 0,
            workers: 1,
        };
        assert!(matches!(scan_exponent(&cfg), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn small_star_bound() {
        // Φ_S for b=2, H=1, k=3 is 0.8 under the exact normalization.
        let (t, phi) = conductance_lower_bound(3, 2, 1).unwrap();
        assert!((t - 1.25).abs() < 1e-12);
        assert!((phi - 2.0).abs() < 1e-12);
    }
}
