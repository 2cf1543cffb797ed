//! Maximal one-step coupling of two Glauber chains and the experiments built
//! on it: epoch coalescence on the star, coupling-time mixing estimates, the
//! weighted-Hamming contraction and the root's available-color tail.
//!
//! The coupled pair always recolors the same vertex. Each common available
//! color is chosen jointly with probability `1/max(|A_x|, |A_y|)`; the
//! leftover mass of each side is matched in ascending color order
//! (north-west corner rule), so residual pairs never agree and
//! `P(agree) = |A_x ∩ A_y| / max(|A_x|, |A_y|)` exactly. Probabilities are
//! integers over the common denominator `|A_x| |A_y| max(|A_x|, |A_y|)` and
//! drawn with a single integer sample.

use crate::coloring::{sample_uniform, ColorSet, Coloring, Palette};
use crate::error::{Error, Result};
use crate::params::{self, epoch_coalescence_bound};
use crate::parallel::map_replicas;
use crate::seed::{replica_rng, ChainRng};
use crate::stats::{bootstrap_mean, mean, wilson, EstimateWithCI, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE};
use crate::tree::TreeShape;
use rand::Rng;
use serde::Serialize;

/// `1/(2e)`, the total-variation threshold defining the mixing time.
pub const MIXING_THRESHOLD: f64 = 0.183_939_720_585_721_16;

/// Joint law of the two new colors as `(x_color, y_color, weight)` with
/// weights summing to `denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingTable {
    pub entries: Vec<(u8, u8, u64)>,
    pub denominator: u64,
}

impl CouplingTable {
    pub fn new(ax: &ColorSet, ay: &ColorSet) -> Self {
        let nx = ax.len() as u64;
        let ny = ay.len() as u64;
        let m = nx.max(ny);
        let denominator = nx * ny * m;
        let joint = nx * ny; // weight of 1/m
        let common = ax.intersection(ay);
        let mut entries = Vec::with_capacity(common.len() + ax.len() + ay.len());
        for c in common.iter() {
            entries.push((c, c, joint));
        }
        // Leftover mass per side, ascending by color.
        let leftover = |set: &ColorSet, own: u64| -> Vec<(u8, u64)> {
            let single = denominator / own;
            set.iter()
                .map(|c| (c, if common.contains(c) { single - joint } else { single }))
                .filter(|&(_, w)| w > 0)
                .collect()
        };
        let rx = leftover(ax, nx);
        let ry = leftover(ay, ny);
        let (mut i, mut j) = (0, 0);
        let mut left_x = rx.first().map_or(0, |e| e.1);
        let mut left_y = ry.first().map_or(0, |e| e.1);
        while i < rx.len() && j < ry.len() {
            let w = left_x.min(left_y);
            entries.push((rx[i].0, ry[j].0, w));
            left_x -= w;
            left_y -= w;
            if left_x == 0 {
                i += 1;
                left_x = rx.get(i).map_or(0, |e| e.1);
            }
            if left_y == 0 {
                j += 1;
                left_y = ry.get(j).map_or(0, |e| e.1);
            }
        }
        Self {
            entries,
            denominator,
        }
    }

    pub fn agreement_weight(&self) -> u64 {
        self.entries
            .iter()
            .filter(|(a, b, _)| a == b)
            .map(|e| e.2)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u8, u8) {
        let mut u = rng.random_range(0..self.denominator);
        for &(cx, cy, w) in &self.entries {
            if u < w {
                return (cx, cy);
            }
            u -= w;
        }
        unreachable!("coupling weights sum to the denominator")
    }
}

/// Probability that the coupled update leaves `v` disagreeing.
pub fn disagreement_probability(ax: &ColorSet, ay: &ColorSet) -> f64 {
    let m = ax.len().max(ay.len()) as f64;
    1.0 - ax.intersection(ay).len() as f64 / m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisagreementReport {
    pub disagreement_set: Vec<usize>,
    pub root_disagrees: bool,
    pub weighted_distance: f64,
}

/// Root weight `b^(eps/2)` of the weighted Hamming distance.
pub fn root_weight(b: usize, eps_above: f64) -> f64 {
    (b as f64).powf(eps_above / 2.0)
}

pub fn weighted_distance(x: &Coloring, y: &Coloring, root_weight: f64) -> f64 {
    let root = if x.get(0) != y.get(0) { root_weight } else { 0.0 };
    root + (1..x.shape().n()).filter(|&v| x.get(v) != y.get(v)).count() as f64
}

#[derive(Debug, Clone)]
pub struct CoupledPair {
    x: Coloring,
    y: Coloring,
    step_count: u64,
    rng: ChainRng,
    disagreements: usize,
}

impl CoupledPair {
    pub fn new(x: Coloring, y: Coloring, rng: ChainRng) -> Result<Self> {
        if x.shape() != y.shape() || x.palette() != y.palette() {
            return Err(Error::InvalidParameter(
                "coupled colorings must share tree and palette".into(),
            ));
        }
        x.palette().require_ergodic()?;
        if !x.is_proper() || !y.is_proper() {
            return Err(Error::Improper);
        }
        let disagreements = x.hamming(&y);
        Ok(Self {
            x,
            y,
            step_count: 0,
            rng,
            disagreements,
        })
    }

    pub fn x(&self) -> &Coloring {
        &self.x
    }

    pub fn y(&self) -> &Coloring {
        &self.y
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn disagreements(&self) -> usize {
        self.disagreements
    }

    pub fn coalesced(&self) -> bool {
        self.disagreements == 0
    }

    /// One coupled transition; returns the updated vertex.
    pub fn step(&mut self) -> usize {
        let v = self.rng.random_range(0..self.x.shape().n());
        let before = self.x.get(v) != self.y.get(v);
        let ax = self.x.available_unchecked(v, None);
        let ay = self.y.available_unchecked(v, None);
        let (cx, cy) = CouplingTable::new(&ax, &ay).sample(&mut self.rng);
        self.x.set_unchecked(v, cx);
        self.y.set_unchecked(v, cy);
        debug_assert!(crate::dynamics::locally_proper(&self.x, v));
        debug_assert!(crate::dynamics::locally_proper(&self.y, v));
        let after = cx != cy;
        match (before, after) {
            (true, false) => self.disagreements -= 1,
            (false, true) => self.disagreements += 1,
            _ => {}
        }
        self.step_count += 1;
        v
    }

    /// Runs until coalescence or until `budget` total steps; returns the
    /// coalescence step if reached.
    pub fn run_until_coalesced(&mut self, budget: u64) -> Option<u64> {
        while !self.coalesced() {
            if self.step_count >= budget {
                return None;
            }
            self.step();
        }
        Some(self.step_count)
    }

    pub fn report(&self, root_weight: f64) -> DisagreementReport {
        let disagreement_set: Vec<usize> = (0..self.x.shape().n())
            .filter(|&v| self.x.get(v) != self.y.get(v))
            .collect();
        DisagreementReport {
            root_disagrees: self.x.get(0) != self.y.get(0),
            weighted_distance: weighted_distance(&self.x, &self.y, root_weight),
            disagreement_set,
        }
    }

    /// True when every disagreeing non-root vertex carries the same ordered
    /// color pair.
    pub fn leaf_disagreements_same_type(&self) -> bool {
        let mut kind = None;
        for v in 1..self.x.shape().n() {
            let pair = (self.x.get(v), self.y.get(v));
            if pair.0 != pair.1 {
                match kind {
                    None => kind = Some(pair),
                    Some(k) if k != pair => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

/// `E[w(D_1) | X_0, Y_0]` computed exactly over the vertex choice and the
/// coupling table.
pub fn expected_weighted_distance_after_step(x: &Coloring, y: &Coloring, root_weight: f64) -> f64 {
    let n = x.shape().n();
    let current = weighted_distance(x, y, root_weight);
    let mut drift = 0.0;
    for v in 0..n {
        let w = if v == 0 { root_weight } else { 1.0 };
        let ax = x.available_unchecked(v, None);
        let ay = y.available_unchecked(v, None);
        let disagree_now = if x.get(v) != y.get(v) { 1.0 } else { 0.0 };
        drift += w * (disagreement_probability(&ax, &ay) - disagree_now);
    }
    current + drift / n as f64
}

#[derive(Debug, Clone)]
pub struct StartPair {
    pub label: String,
    pub x: Coloring,
    pub y: Coloring,
}

/// Worst-case style starts on the star: opposite constants, two frozen roots
/// with every leaf disagreeing, and a uniform sample against a constant.
pub fn default_star_starts(shape: TreeShape, palette: Palette, seed: u64) -> Result<Vec<StartPair>> {
    if !shape.is_star() {
        return Err(Error::NotAStar(shape.height()));
    }
    let k = palette.k();
    let b = shape.b();
    let opposite_x = Coloring::alternating(shape, palette, 1, 2)?;
    let opposite_y = Coloring::alternating(shape, palette, 2, 1)?;
    let m = k - 1;
    let lx: Vec<u8> = (2..=k as u8).collect();
    let ly: Vec<u8> = std::iter::once(1).chain(3..=k as u8).collect();
    let mut fx = vec![1u8];
    let mut fy = vec![2u8];
    for i in 0..b {
        fx.push(lx[i % m]);
        fy.push(ly[(i + 1) % m]);
    }
    let frozen_x = Coloring::proper(shape, palette, fx)?;
    let frozen_y = Coloring::proper(shape, palette, fy)?;
    let mut rng = replica_rng(seed, "star-start", 0);
    let uniform = sample_uniform(shape, palette, &mut rng);
    Ok(vec![
        StartPair {
            label: "opposite-constant".into(),
            x: opposite_x.clone(),
            y: opposite_y.clone(),
        },
        StartPair {
            label: "frozen-roots".into(),
            x: frozen_x,
            y: frozen_y,
        },
        StartPair {
            label: "uniform-vs-constant".into(),
            x: uniform,
            y: opposite_y,
        },
    ])
}

/// Default start grid for coupling-time estimates: depth-alternating
/// patterns against a fresh uniform sample, plus pairs disagreeing at every
/// vertex.
pub fn default_grid(shape: TreeShape, palette: Palette, seed: u64) -> Result<Vec<StartPair>> {
    let k = palette.k() as u8;
    let mut rng = replica_rng(seed, "grid-start", 0);
    let uniform = sample_uniform(shape, palette, &mut rng);
    let pattern = |a: u8, b: u8| Coloring::alternating(shape, palette, a, b);
    let mut grid = Vec::new();
    for (a, b) in [(1, 2), (2, 1), (3, 1)] {
        grid.push(StartPair {
            label: format!("alt{a}{b}-vs-uniform"),
            x: pattern(a, b)?,
            y: uniform.clone(),
        });
    }
    grid.push(StartPair {
        label: "alt12-vs-alt21".into(),
        x: pattern(1, 2)?,
        y: pattern(2, 1)?,
    });
    let (c, d) = if k >= 4 { (3, 4) } else { (2, 3) };
    grid.push(StartPair {
        label: format!("alt12-vs-alt{c}{d}"),
        x: pattern(1, 2)?,
        y: pattern(c, d)?,
    });
    Ok(grid)
}

fn coalescence_times(pair: &StartPair, replicas: usize, budget: u64, seed: u64, tag: &str, workers: usize) -> Result<Vec<Option<u64>>> {
    CoupledPair::new(pair.x.clone(), pair.y.clone(), replica_rng(seed, tag, 0))?;
    let tag = format!("{tag}/{}", pair.label);
    Ok(map_replicas(workers, replicas, |i| {
        let mut coupled = CoupledPair::new(pair.x.clone(), pair.y.clone(), replica_rng(seed, &tag, i as u64))
            .expect("validated pair");
        coupled.run_until_coalesced(budget)
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRow {
    pub epoch: usize,
    /// Replicas still apart at the start of the epoch.
    pub at_risk: usize,
    /// Replicas that coalesce during this epoch.
    pub coalesced_in_epoch: usize,
    /// Replicas coalesced by the end of this epoch.
    pub coalesced_total: usize,
    pub cumulative: EstimateWithCI,
    pub hazard: EstimateWithCI,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCoalescence {
    pub label: String,
    pub replicas: usize,
    pub epochs: Vec<EpochRow>,
    /// Exact coalescence step of each replica (`None` past the budget).
    pub steps: Vec<Option<u64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoalescenceReport {
    pub b: usize,
    pub k: usize,
    pub c: f64,
    pub eps_below: f64,
    pub epoch_length: usize,
    /// Lower bound on per-epoch coalescence for the realised `eps_below`.
    pub bound: f64,
    pub pairs: Vec<PairCoalescence>,
}

#[derive(Debug, Clone)]
pub struct CoalescenceConfig {
    pub epoch_length: usize,
    pub max_epochs: usize,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Epoch-structured coalescence on the star from each start pair.
pub fn coalescence_experiment(
    shape: TreeShape,
    palette: Palette,
    starts: &[StartPair],
    cfg: &CoalescenceConfig,
) -> Result<CoalescenceReport> {
    if !shape.is_star() {
        return Err(Error::NotAStar(shape.height()));
    }
    let b = shape.b();
    let k = palette.k();
    let t = cfg.epoch_length as u64;
    let budget = t * cfg.max_epochs as u64;
    let mut pairs = Vec::new();
    for start in starts {
        let steps = coalescence_times(start, cfg.replicas, budget, cfg.seed, "couple", cfg.workers)?;
        let mut epochs = Vec::new();
        let done_by = |limit: u64| steps.iter().filter(|s| s.is_some_and(|s| s <= limit)).count();
        let at_zero = done_by(0);
        epochs.push(EpochRow {
            epoch: 0,
            at_risk: cfg.replicas,
            coalesced_in_epoch: at_zero,
            coalesced_total: at_zero,
            cumulative: wilson(at_zero, cfg.replicas, DEFAULT_CONFIDENCE),
            hazard: wilson(at_zero, cfg.replicas, DEFAULT_CONFIDENCE),
        });
        let mut previous = at_zero;
        for e in 1..=cfg.max_epochs {
            let at_risk = cfg.replicas - previous;
            if at_risk == 0 {
                break;
            }
            let total = done_by(e as u64 * t);
            let new = total - previous;
            epochs.push(EpochRow {
                epoch: e,
                at_risk,
                coalesced_in_epoch: new,
                coalesced_total: total,
                cumulative: wilson(total, cfg.replicas, DEFAULT_CONFIDENCE),
                hazard: wilson(new, at_risk, DEFAULT_CONFIDENCE),
            });
            previous = total;
        }
        pairs.push(PairCoalescence {
            label: start.label.clone(),
            replicas: cfg.replicas,
            epochs,
            steps,
        });
    }
    let eps = params::eps_below(k, b);
    Ok(CoalescenceReport {
        b,
        k,
        c: params::c_from_k(k, b),
        eps_below: eps,
        epoch_length: cfg.epoch_length,
        bound: epoch_coalescence_bound(b, eps),
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingEstimate {
    /// Smallest tested t meeting the threshold, if reached within budget.
    pub t: Option<u64>,
    /// Worst-pair non-coalescence interval at `t` (or at the budget).
    pub worst: EstimateWithCI,
    pub worst_label: String,
    pub replicas: usize,
    pub budget: u64,
}

/// Coupling-based upper estimate of the mixing time: the smallest t at which
/// the upper Wilson limit of the non-coalescence frequency is at most
/// `1/(2e)` for every start pair.
pub fn mixing_time_upper_estimate(
    starts: &[StartPair],
    replicas: usize,
    budget: u64,
    seed: u64,
    workers: usize,
) -> Result<MixingEstimate> {
    let mut all = Vec::new();
    for pair in starts {
        let mut times = coalescence_times(pair, replicas, budget, seed, "mixing", workers)?;
        times.sort_by_key(|t| t.unwrap_or(u64::MAX));
        all.push((pair.label.clone(), times));
    }
    let apart_after = |times: &[Option<u64>], t: u64| times.iter().filter(|s| s.is_none_or(|s| s > t)).count();
    let worst_at = |t: u64| -> (EstimateWithCI, String) {
        all.iter()
            .map(|(label, times)| (wilson(apart_after(times, t), replicas, DEFAULT_CONFIDENCE), label.clone()))
            .max_by(|a, b| a.0.high.total_cmp(&b.0.high))
            .expect("non-empty grid")
    };
    let mut candidates: Vec<u64> = all
        .iter()
        .flat_map(|(_, times)| times.iter().flatten().copied())
        .chain(std::iter::once(0))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    for t in candidates {
        let (worst, worst_label) = worst_at(t);
        if worst.high <= MIXING_THRESHOLD {
            return Ok(MixingEstimate {
                t: Some(t),
                worst,
                worst_label,
                replicas,
                budget,
            });
        }
    }
    let (worst, worst_label) = worst_at(budget);
    Ok(MixingEstimate {
        t: None,
        worst,
        worst_label,
        replicas,
        budget,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub b: usize,
    pub k: usize,
    pub eps_above: f64,
    pub root_weight: f64,
    pub threshold: f64,
    pub pairs: usize,
    pub mean_ratio: EstimateWithCI,
    /// `1 - (1 - b^(-eps/4)) / b`.
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondStart {
    /// An independent uniform coloring.
    #[default]
    Independent,
    /// The first coloring with one uniformly chosen leaf recolored.
    LeafNeighbor,
}

/// Samples `X_0` uniformly from colorings whose root has at least
/// `threshold` available colors.
fn conditioned_start<R: Rng + ?Sized>(shape: TreeShape, palette: Palette, threshold: f64, max_attempts: usize, rng: &mut R) -> Option<Coloring> {
    for _ in 0..max_attempts {
        let x = sample_uniform(shape, palette, rng);
        if x.available_unchecked(0, None).len() as f64 >= threshold {
            return Some(x);
        }
    }
    None
}

/// Mean of `E[w(D_1)|X_0,Y_0]/w(D_0)` over start pairs with `X_0` in the set
/// of colorings whose root has at least `b^(0.9 eps)` available colors.
/// `threshold_override` replaces that conditioning level.
pub fn weighted_contraction_experiment(
    shape: TreeShape,
    palette: Palette,
    pairs: usize,
    second: SecondStart,
    threshold_override: Option<f64>,
    seed: u64,
    workers: usize,
) -> Result<ContractionReport> {
    if !shape.is_star() {
        return Err(Error::NotAStar(shape.height()));
    }
    palette.require_ergodic()?;
    let b = shape.b();
    let k = palette.k();
    let eps = params::eps_above(k, b);
    if eps <= 0.0 {
        return Err(Error::BelowThreshold(params::c_from_k(k, b)));
    }
    let threshold = threshold_override.unwrap_or_else(|| (b as f64).powf(0.9 * eps));
    let max_avail = k.min(b + 1) as f64;
    if threshold > max_avail {
        return Err(Error::EmptyConditioning(format!(
            "|A(r)| >= {threshold:.2} is impossible: the root has at most {max_avail} available colors (k = {k})"
        )));
    }
    let w_root = root_weight(b, eps);
    let mut probe = replica_rng(seed, "contraction-probe", 0);
    if conditioned_start(shape, palette, threshold, 100_000, &mut probe).is_none() {
        return Err(Error::EmptyConditioning(format!(
            "rejection sampling never reached |A(r)| >= {threshold:.2}"
        )));
    }
    let ratios = map_replicas(workers, pairs, |i| {
        let mut rng = replica_rng(seed, "contraction", i as u64);
        let x = conditioned_start(shape, palette, threshold, 100_000, &mut rng)?;
        let y = loop {
            let y = match second {
                SecondStart::Independent => sample_uniform(shape, palette, &mut rng),
                SecondStart::LeafNeighbor => {
                    let mut y = x.clone();
                    let leaf = rng.random_range(1..shape.n());
                    let c = crate::coloring::uniform_excluding(k, x.get(0), &mut rng);
                    y.set_unchecked(leaf, c);
                    y
                }
            };
            if weighted_distance(&x, &y, w_root) > 0.0 {
                break y;
            }
        };
        let d0 = weighted_distance(&x, &y, w_root);
        Some(expected_weighted_distance_after_step(&x, &y, w_root) / d0)
    });
    let ratios: Option<Vec<f64>> = ratios.into_iter().collect();
    let ratios = ratios.ok_or_else(|| {
        Error::EmptyConditioning(format!("rejection sampling never reached |A(r)| >= {threshold:.2}"))
    })?;
    let mut rng = replica_rng(seed, "contraction-bootstrap", 0);
    let mean_ratio = bootstrap_mean(&ratios, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE, &mut rng);
    Ok(ContractionReport {
        b,
        k,
        eps_above: eps,
        root_weight: w_root,
        threshold,
        pairs,
        mean_ratio,
        target: 1.0 - (1.0 - (b as f64).powf(-eps / 4.0)) / b as f64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AvailTailReport {
    pub b: usize,
    pub k: usize,
    pub eps_above: f64,
    pub threshold: f64,
    pub tail: EstimateWithCI,
    pub mean: EstimateWithCI,
    /// `1 + (k-1)(1 - 1/(k-1))^b`.
    pub exact_mean: f64,
    /// `k (1 - 1/(k-1))^b`, the expression used in the local-uniformity argument.
    pub reference_mean: f64,
    /// `1 - exp(-b^(0.9 eps)/100)`.
    pub tail_lower_bound: f64,
}

/// `1 + (k-1)(1 - 1/(k-1))^b`: the root's own color is always available and
/// each other color misses all `b` leaves independently.
pub fn expected_root_available(b: usize, k: usize) -> f64 {
    let km1 = (k - 1) as f64;
    1.0 + km1 * (1.0 - 1.0 / km1).powi(b as i32)
}

/// Monte Carlo law of `|A(r)|` for uniform colorings of the star.
pub fn root_available_colors_tail(
    shape: TreeShape,
    palette: Palette,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<AvailTailReport> {
    if !shape.is_star() {
        return Err(Error::NotAStar(shape.height()));
    }
    let b = shape.b();
    let k = palette.k();
    let eps = params::eps_above(k, b);
    let threshold = (b as f64).powf(0.9 * eps);
    let sizes = map_replicas(workers, replicas, |i| {
        let mut rng = replica_rng(seed, "avail-tail", i as u64);
        sample_uniform(shape, palette, &mut rng).available_unchecked(0, None).len() as f64
    });
    let above = sizes.iter().filter(|&&s| s > threshold).count();
    let mut rng = replica_rng(seed, "avail-tail-bootstrap", 0);
    let mean_ci = bootstrap_mean(&sizes, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE, &mut rng);
    debug_assert!((mean_ci.estimate - mean(&sizes)).abs() < 1e-9);
    let km1 = (k - 1) as f64;
    Ok(AvailTailReport {
        b,
        k,
        eps_above: eps,
        threshold,
        tail: wilson(above, replicas, DEFAULT_CONFIDENCE),
        mean: mean_ci,
        exact_mean: expected_root_available(b, k),
        reference_mean: k as f64 * (1.0 - 1.0 / km1).powi(b as i32),
        tail_lower_bound: 1.0 - (-threshold / 100.0).exp(),
    })
}
