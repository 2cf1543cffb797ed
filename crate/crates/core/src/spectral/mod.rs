//! Exhaustive analysis of the chain on tiny instances: the transition
//! matrix, spectral gap, exact mixing time, conductance of state subsets,
//! the numerical log-Sobolev constant and boundary-condition variants.

pub mod eigen;
pub mod sobolev;

use crate::coloring::{enumerate_colorings, Coloring, Palette};
use crate::coupling::MIXING_THRESHOLD;
use crate::error::{Error, Result};
use crate::freeze::{compute_freeze_mask, in_frozen_set};
use crate::seed::replica_rng;
use crate::tree::TreeShape;
use nalgebra::DMatrix;
use serde::Serialize;
use sobolev::{complete_graph_alpha, log_sobolev_numeric, LogSobolevResult, SparseChain};
use std::collections::HashMap;

/// Default enumeration cap.
pub const DEFAULT_STATE_CAP: usize = 20_000;
/// Largest state space for which the dense eigendecomposition is attempted.
pub const DENSE_CAP: usize = 5_000;
/// Largest state space for the log-Sobolev optimizer.
pub const SOBOLEV_CAP: usize = 2_000;
/// Root of `ζ ln ζ = 1`, the weakened lemma constant.
pub const ZETA: f64 = 1.763_222_834_351_896_7;

/// The enumerable instances (at most 500 states) used for exhaustive checks.
pub fn small_instances() -> Vec<(TreeShape, Palette)> {
    let mut out = Vec::new();
    let mut push = |b: usize, h: usize, k: usize| {
        out.push((TreeShape::new(b, h).expect("small tree"), Palette::new(k).expect("small palette")));
    };
    for k in [3, 4, 5] {
        push(1, 0, k);
    }
    push(2, 1, 3);
    push(2, 1, 4);
    push(2, 2, 3);
    push(3, 1, 3);
    push(3, 1, 4);
    for h in 1..=4 {
        push(1, h, 3);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_min: f64,
    pub gap: f64,
}

impl Spectrum {
    fn from_sorted(eigenvalues: Vec<f64>) -> Self {
        let lambda2 = eigenvalues.get(1).copied().unwrap_or(0.0);
        let lambda_min = *eigenvalues.last().expect("non-empty spectrum");
        let second = if eigenvalues.len() > 1 { lambda2.max(lambda_min.abs()) } else { 0.0 };
        Self {
            gap: 1.0 - second,
            lambda2,
            lambda_min,
            eigenvalues,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    shape: TreeShape,
    palette: Palette,
    boundary: Option<u8>,
    states: Vec<Coloring>,
    chain: SparseChain,
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
}

fn build_rows(shape: TreeShape, boundary: Option<u8>, states: &[Coloring]) -> Vec<Vec<(usize, f64)>> {
    let index: HashMap<&[u8], usize> = states.iter().enumerate().map(|(i, s)| (s.colors(), i)).collect();
    let n = shape.n() as f64;
    let mut rows = Vec::with_capacity(states.len());
    let mut buf = Vec::new();
    for s in states {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for v in 0..shape.n() {
            let avail = s.available_unchecked(v, if v == 0 { boundary } else { None });
            let w = 1.0 / (n * avail.len() as f64);
            for c in avail.iter() {
                buf.clear();
                buf.extend_from_slice(s.colors());
                buf[v] = c;
                row.push((index[buf.as_slice()], w));
            }
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (j, p) in row {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += p,
                _ => merged.push((j, p)),
            }
        }
        rows.push(merged);
    }
    rows
}

/// Enumerates the chain (optionally with a fixed external parent color at
/// the root) and computes its spectrum.
pub fn enumerate_chain(shape: TreeShape, palette: Palette, boundary: Option<u8>, cap: usize) -> Result<ChainAnalysis> {
    palette.require_ergodic()?;
    let cap = cap.min(DENSE_CAP);
    let states = enumerate_colorings(shape, palette, boundary, cap)?;
    let rows = build_rows(shape, boundary, &states);
    let m = states.len();
    let mut matrix = DMatrix::zeros(m, m);
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            matrix[(i, j)] = p;
        }
    }
    let mut eig: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(ChainAnalysis {
        shape,
        palette,
        boundary,
        states,
        chain: SparseChain { rows },
        matrix,
        spectrum: Spectrum::from_sorted(eig),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub max_row_error: f64,
    pub max_asymmetry: f64,
    pub stationarity_error: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.max_row_error <= 1e-12 && self.max_asymmetry <= 1e-12 && self.stationarity_error <= 1e-10
    }
}

impl ChainAnalysis {
    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    pub fn boundary(&self) -> Option<u8> {
        self.boundary
    }

    pub fn states(&self) -> &[Coloring] {
        &self.states
    }

    pub fn omega_size(&self) -> usize {
        self.states.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sparse(&self) -> &SparseChain {
        &self.chain
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn gap(&self) -> f64 {
        self.spectrum.gap
    }

    pub fn stationary(&self) -> Vec<f64> {
        vec![1.0 / self.omega_size() as f64; self.omega_size()]
    }

    pub fn invariants(&self) -> InvariantReport {
        let m = self.omega_size();
        let pi = 1.0 / m as f64;
        let mut max_row_error: f64 = 0.0;
        let mut max_asymmetry: f64 = 0.0;
        let mut stationarity_error: f64 = 0.0;
        for i in 0..m {
            let row: f64 = self.matrix.row(i).iter().sum();
            max_row_error = max_row_error.max((row - 1.0).abs());
            let col: f64 = self.matrix.column(i).iter().sum::<f64>() * pi;
            stationarity_error = stationarity_error.max((col - pi).abs());
            for j in i + 1..m {
                max_asymmetry = max_asymmetry.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        InvariantReport {
            max_row_error,
            max_asymmetry,
            stationarity_error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.invariants();
        if r.holds() && self.gap() > 0.0 && self.gap() <= 1.0 + 1e-12 {
            Ok(())
        } else {
            Err(Error::Invariant(format!("chain invariants failed: {r:?}, gap {}", self.gap())))
        }
    }

    /// Gap from the independent Jacobi routine (small instances).
    pub fn jacobi_gap(&self) -> f64 {
        Spectrum::from_sorted(eigen::jacobi_eigenvalues(&self.matrix, 1e-13, 100)).gap
    }
}

pub fn relaxation_time(a: &ChainAnalysis) -> f64 {
    1.0 / a.gap()
}

/// Worst-start total variation after `t` steps, for `t = 0, 1, ...` until
/// it reaches `1/(2e)`; asserts the sequence never increases.
pub fn worst_tv_profile(chain: &SparseChain, max_t: usize) -> Result<Vec<f64>> {
    let m = chain.len();
    let pi = 1.0 / m as f64;
    let mut dists: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut d = vec![0.0; m];
            d[i] = 1.0;
            d
        })
        .collect();
    let worst = |dists: &[Vec<f64>]| -> f64 {
        dists
            .iter()
            .map(|d| 0.5 * d.iter().map(|x| (x - pi).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut profile = vec![worst(&dists)];
    let mut next = vec![0.0; m];
    for _ in 0..max_t {
        if *profile.last().expect("non-empty") <= MIXING_THRESHOLD {
            return Ok(profile);
        }
        for d in dists.iter_mut() {
            // Rows of P^t evolve by P acting on the right; P is symmetric.
            chain.apply(d, &mut next);
            std::mem::swap(d, &mut next);
        }
        let w = worst(&dists);
        let last = *profile.last().expect("non-empty");
        if w > last + 1e-12 {
            return Err(Error::Invariant(format!(
                "worst-start TV increased from {last} to {w} at t = {}",
                profile.len()
            )));
        }
        profile.push(w);
    }
    Err(Error::Invariant(format!("TV did not reach 1/(2e) within {max_t} steps")))
}

/// Smallest `t` with worst-start TV at most `1/(2e)`.
pub fn exact_mixing_time(a: &ChainAnalysis) -> Result<usize> {
    Ok(worst_tv_profile(a.sparse(), 1_000_000)?.len() - 1)
}

/// Exact `Φ_S = Q(S, S^c) / (π(S) π(S^c))`.
pub fn exact_conductance<F: Fn(&Coloring) -> bool>(a: &ChainAnalysis, predicate: F) -> Result<f64> {
    let member: Vec<bool> = a.states.iter().map(&predicate).collect();
    conductance_of(a, &member)
}

fn conductance_of(a: &ChainAnalysis, member: &[bool]) -> Result<f64> {
    let m = a.omega_size() as f64;
    let size = member.iter().filter(|&&x| x).count();
    if size == 0 || size == a.omega_size() {
        return Err(Error::TrivialSubset);
    }
    let mut flow = 0.0;
    for (i, row) in a.chain.rows.iter().enumerate() {
        if member[i] {
            flow += row.iter().filter(|e| !member[e.0]).map(|e| e.1).sum::<f64>();
        }
    }
    let flow = flow / m;
    let ps = size as f64 / m;
    Ok(flow / (ps * (1.0 - ps)))
}

/// Conductance of colorings whose root is frozen to a color in `1..=k/2`.
pub fn frozen_root_conductance(a: &ChainAnalysis) -> Result<f64> {
    exact_conductance(a, |c| in_frozen_set(c, &compute_freeze_mask(c)))
}

/// Smallest conductance over the sets "root frozen to a color in U" for all
/// nonempty proper color subsets U; returns the value and U.
pub fn min_frozen_union_conductance(a: &ChainAnalysis) -> Result<(f64, Vec<u8>)> {
    let k = a.palette.k();
    if k > 16 {
        return Err(Error::InvalidParameter("color-subset search limited to k <= 16".into()));
    }
    let frozen_to: Vec<Option<u8>> =
        a.states.iter().map(|c| compute_freeze_mask(c).is_frozen(0).then(|| c.get(0))).collect();
    let mut best: Option<(f64, Vec<u8>)> = None;
    for mask in 1u32..(1 << k) - 1 {
        let member: Vec<bool> = frozen_to.iter().map(|f| f.is_some_and(|c| mask >> (c - 1) & 1 == 1)).collect();
        let Ok(phi) = conductance_of(a, &member) else { continue };
        if best.as_ref().is_none_or(|b| phi < b.0) {
            best = Some((phi, (1..=k as u8).filter(|c| mask >> (c - 1) & 1 == 1).collect()));
        }
    }
    best.ok_or(Error::TrivialSubset)
}

pub fn log_sobolev(a: &ChainAnalysis, tolerance: f64, seed: u64) -> Result<LogSobolevResult> {
    if a.omega_size() > SOBOLEV_CAP {
        return Err(Error::StateSpaceTooLarge {
            size: a.omega_size() as u128,
            cap: SOBOLEV_CAP,
        });
    }
    let mut rng = replica_rng(seed, "log-sobolev", 0);
    Ok(log_sobolev_numeric(a.sparse(), a.gap(), tolerance, 32, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GapHypothesis {
    /// `k <= b + 2`.
    #[default]
    Strict,
    /// `k <= ζ b`.
    Weakened,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapMonotonicity {
    pub b: usize,
    pub k: usize,
    pub boundary: u8,
    /// `(ℓ, gap)` for every height examined.
    pub gaps: Vec<(usize, f64)>,
    pub holds: bool,
    /// Smallest `gap(ℓ-1) - gap(ℓ)` over the checked pairs.
    pub margin: f64,
    pub skipped: Option<String>,
}

/// Checks `gap(ℓ) <= gap(ℓ-1)` for boundary-conditioned trees.
pub fn gap_monotonicity_check(
    b: usize,
    k: usize,
    heights: &[usize],
    boundary: u8,
    hypothesis: GapHypothesis,
) -> Result<GapMonotonicity> {
    let allowed = match hypothesis {
        GapHypothesis::Strict => k <= b + 2,
        GapHypothesis::Weakened => (k as f64) <= ZETA * b as f64,
    };
    let palette = Palette::new(k)?;
    palette.check_color(boundary as usize)?;
    if !allowed {
        return Ok(GapMonotonicity {
            b,
            k,
            boundary,
            gaps: Vec::new(),
            holds: true,
            margin: f64::NAN,
            skipped: Some(format!("hypothesis {hypothesis:?} fails for b = {b}, k = {k}; check skipped")),
        });
    }
    let mut needed: Vec<usize> = heights.iter().flat_map(|&l| [l.saturating_sub(1), l]).collect();
    needed.sort_unstable();
    needed.dedup();
    let mut gaps = Vec::new();
    for &l in &needed {
        let shape = TreeShape::new(b, l)?;
        gaps.push((l, enumerate_chain(shape, palette, Some(boundary), DEFAULT_STATE_CAP)?.gap()));
    }
    let gap_at = |l: usize| gaps.iter().find(|g| g.0 == l).expect("computed").1;
    let mut margin = f64::INFINITY;
    for &l in heights.iter().filter(|&&l| l >= 1) {
        margin = margin.min(gap_at(l - 1) - gap_at(l));
    }
    Ok(GapMonotonicity {
        b,
        k,
        boundary,
        holds: margin >= -1e-10,
        gaps,
        margin,
        skipped: None,
    })
}

/// `max(b, τ*)^H`.
pub fn decomposition_upper_bound(b: usize, height: usize, tau_star: f64) -> Result<f64> {
    if !(tau_star > 0.0) {
        return Err(Error::InvalidParameter("tau_star must be positive".into()));
    }
    Ok((b as f64).max(tau_star).powi(height as i32))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub b: usize,
    #[serde(rename = "H")]
    pub height: usize,
    pub k: usize,
    pub boundary: Option<u8>,
    pub omega_size: usize,
    pub gap: f64,
    pub t_relax: f64,
    pub t_mix: Option<usize>,
    pub phi_frozen: Option<f64>,
    pub c_sob: Option<f64>,
    pub alpha: f64,
    pub decomposition_bound: Option<f64>,
}

/// Full report for one instance. Quantities whose preconditions fail (no
/// frozen set, state space too large for the optimizer, star not
/// enumerable) are `None`.
pub fn exact_report(shape: TreeShape, palette: Palette, boundary: Option<u8>, seed: u64) -> Result<ExactReport> {
    let a = enumerate_chain(shape, palette, boundary, DEFAULT_STATE_CAP)?;
    a.validate()?;
    let t_relax = relaxation_time(&a);
    let t_mix = if a.omega_size() <= SOBOLEV_CAP { Some(exact_mixing_time(&a)?) } else { None };
    if let Some(t) = t_mix {
        if t_relax > t as f64 + 1.0 + 1e-9 {
            return Err(Error::Invariant(format!("T_relax {t_relax} exceeds T_mix + 1 = {}", t + 1)));
        }
    }
    let phi_frozen = match frozen_root_conductance(&a) {
        Ok(phi) => Some(phi),
        Err(Error::TrivialSubset) => None,
        Err(e) => return Err(e),
    };
    let c_sob = if a.omega_size() <= SOBOLEV_CAP && a.omega_size() > 1 {
        Some(log_sobolev(&a, 1e-3, seed)?.c_sob)
    } else {
        None
    };
    let decomposition_bound = if shape.height() >= 1 {
        match enumerate_chain(TreeShape::star(shape.b())?, palette, boundary, DEFAULT_STATE_CAP) {
            Ok(star) => Some(decomposition_upper_bound(shape.b(), shape.height(), relaxation_time(&star))?),
            Err(Error::StateSpaceTooLarge { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(ExactReport {
        b: shape.b(),
        height: shape.height(),
        k: palette.k(),
        boundary,
        omega_size: a.omega_size(),
        gap: a.gap(),
        t_relax,
        t_mix,
        phi_frozen,
        c_sob,
        alpha: complete_graph_alpha(palette.k()),
        decomposition_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex() {
        let a = enumerate_chain(TreeShape::new(1, 0).unwrap(), Palette::new(3).unwrap(), None, 100).unwrap();
        assert_eq!(a.omega_size(), 3);
        assert!((a.gap() - 1.0).abs() < 1e-12);
        assert_eq!(exact_mixing_time(&a).unwrap(), 1);
        let phi = exact_conductance(&a, |c| c.get(0) == 1).unwrap();
        assert!((phi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_star_frozen_conductance() {
        let a = enumerate_chain(TreeShape::star(2).unwrap(), Palette::new(3).unwrap(), None, 100).unwrap();
        assert_eq!(a.omega_size(), 12);
        a.validate().unwrap();
        assert!((frozen_root_conductance(&a).unwrap() - 0.4).abs() < 1e-12);
        assert!((a.gap() - a.jacobi_gap()).abs() < 1e-9);
    }

    #[test]
    fn boundary_single_root() {
        let a = enumerate_chain(TreeShape::new(2, 0).unwrap(), Palette::new(4).unwrap(), Some(1), 100).unwrap();
        assert_eq!(a.omega_size(), 3);
        assert!((a.gap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_max_arm() {
        assert_eq!(decomposition_upper_bound(4, 2, 1.5).unwrap(), 16.0);
    }

    #[test]
    fn zeta_solves_equation() {
        assert!((ZETA * ZETA.ln() - 1.0).abs() < 1e-12);
    }
}
