//! Frozen vertices, the unfreeze event at a leaf, freeze-probability
//! recursions and the critical-leaf conductance estimator for the set of
//! colorings whose root is frozen to a low color.
//!
//! A leaf is always frozen. An internal vertex is frozen when every color
//! other than its own is carried by some frozen child; the subtree's leaves
//! then determine its color.

use crate::coloring::{enumerate_colorings, sample_uniform, Coloring, Palette};
use crate::error::{Error, Result};
use crate::parallel::map_replicas;
use crate::params;
use crate::seed::replica_rng;
use crate::stats::{bootstrap_mean, EstimateWithCI, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE};
use crate::tree::TreeShape;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeMask {
    frozen: Vec<bool>,
    k: usize,
    internal: usize,
    // Per internal vertex: number of frozen children of each color
    // (row stride k + 1, index 0 unused).
    counts: Vec<u32>,
    // Per internal vertex: colors other than its own with no frozen child.
    missing: Vec<u32>,
}

impl FreezeMask {
    pub fn is_frozen(&self, v: usize) -> bool {
        self.frozen[v]
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    /// Forced color of `v` if frozen (always the vertex's own color).
    pub fn forced_color(&self, coloring: &Coloring, v: usize) -> Option<u8> {
        self.frozen[v].then(|| coloring.get(v))
    }

    pub fn frozen_child_count(&self, v: usize, color: u8) -> u32 {
        if v >= self.internal {
            0
        } else {
            self.counts[v * (self.k + 1) + color as usize]
        }
    }
}

/// Bottom-up evaluation of the frozen predicate in `O(n + internal * k)`.
pub fn compute_freeze_mask(c: &Coloring) -> FreezeMask {
    let shape = c.shape();
    let n = shape.n();
    let k = c.palette().k();
    let internal = n - shape.leaf_count();
    let stride = k + 1;
    let mut frozen = vec![false; n];
    let mut counts = vec![0u32; internal * stride];
    let mut missing = vec![0u32; internal];
    for v in shape.leaves() {
        frozen[v] = true;
    }
    for v in (0..internal).rev() {
        let row = &mut counts[v * stride..(v + 1) * stride];
        for w in shape.children_unchecked(v) {
            if frozen[w] {
                row[c.get(w) as usize] += 1;
            }
        }
        let own = c.get(v) as usize;
        let miss = (1..=k).filter(|&col| col != own && row[col] == 0).count() as u32;
        missing[v] = miss;
        frozen[v] = miss == 0;
    }
    FreezeMask {
        frozen,
        k,
        internal,
        counts,
        missing,
    }
}

/// Root frozen to a color in `1..=floor(k/2)`.
pub fn in_frozen_set(c: &Coloring, mask: &FreezeMask) -> bool {
    mask.is_frozen(0) && (c.get(0) as usize) <= c.palette().k() / 2
}

/// Whether the root would still be frozen after recoloring leaf `z` to
/// `new_color`, recomputing only along the root-to-`z` path.
pub fn root_frozen_after_recolor(c: &Coloring, mask: &FreezeMask, z: usize, new_color: u8) -> bool {
    let shape = c.shape();
    if shape.height() == 0 {
        return true;
    }
    let stride = mask.k + 1;
    let old_color = c.get(z);
    if old_color == new_color {
        return mask.is_frozen(0);
    }
    let mut child = z;
    // Change in the child's frozen color: (removed, added).
    let mut removed = Some(old_color);
    let mut added = Some(new_color);
    while let Some(p) = shape.parent_unchecked(child) {
        let own = c.get(p);
        let row = &mask.counts[p * stride..(p + 1) * stride];
        let mut miss = mask.missing[p] as i64;
        let mut changes: [(u8, i64); 2] = [(0, 0); 2];
        if let Some(col) = removed {
            changes[0] = (col, -1);
        }
        if let Some(col) = added {
            if changes[0].0 == col {
                changes[0].1 += 1;
            } else {
                changes[1] = (col, 1);
            }
        }
        for (col, d) in changes {
            if d == 0 || col == own {
                continue;
            }
            let before = row[col as usize] as i64;
            let after = before + d;
            if before == 0 && after > 0 {
                miss -= 1;
            } else if before > 0 && after == 0 {
                miss += 1;
            }
        }
        let now = miss == 0;
        let was = mask.is_frozen(p);
        if now == was {
            return mask.is_frozen(0);
        }
        if p == 0 {
            return now;
        }
        removed = if was { Some(own) } else { None };
        added = if now { Some(own) } else { None };
        child = p;
    }
    unreachable!("the path ends at the root")
}

/// `E(σ, z)`: the root is frozen and some proper recoloring of leaf `z`
/// unfreezes it.
pub fn unfreeze_event(c: &Coloring, mask: &FreezeMask, z: usize) -> Result<bool> {
    let shape = c.shape();
    if z >= shape.n() {
        return Err(Error::VertexOutOfRange { v: z, n: shape.n() });
    }
    if !shape.is_leaf(z) {
        return Err(Error::NotALeaf(z));
    }
    if !mask.is_frozen(0) || shape.height() == 0 {
        return Ok(false);
    }
    let parent_color = c.get(shape.parent_unchecked(z).expect("leaf below root"));
    let k = c.palette().k() as u8;
    Ok((1..=k)
        .filter(|&col| col != parent_color && col != c.get(z))
        .any(|col| !root_frozen_after_recolor(c, mask, z, col)))
}

/// Number of critical leaves of `c`.
pub fn critical_leaf_count(c: &Coloring, mask: &FreezeMask) -> usize {
    if !mask.is_frozen(0) {
        return 0;
    }
    c.shape()
        .leaves()
        .filter(|&z| unfreeze_event(c, mask, z).expect("leaf index"))
        .count()
}

/// Same event by recomputing the whole mask for every candidate color.
pub fn unfreeze_event_full(c: &Coloring, z: usize) -> Result<bool> {
    let shape = c.shape();
    if !shape.is_leaf(z) {
        return Err(Error::NotALeaf(z));
    }
    if !compute_freeze_mask(c).is_frozen(0) || shape.height() == 0 {
        return Ok(false);
    }
    let parent_color = c.get(shape.parent_unchecked(z).expect("leaf below root"));
    let mut recolored = c.clone();
    for col in 1..=c.palette().k() as u8 {
        if col == parent_color {
            continue;
        }
        recolored.set_unchecked(z, col);
        if !compute_freeze_mask(&recolored).is_frozen(0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Frozen flags from the definition: `v` is frozen in `σ` when every proper
/// coloring agreeing with `σ` on the leaves below `v` gives `v` the same
/// color. Brute force over an enumerated state list.
pub struct DefinitionalOracle {
    shape: TreeShape,
    // Per vertex: leaf colors below it -> set of colors seen at the vertex.
    seen: Vec<HashMap<Vec<u8>, u64>>,
}

impl DefinitionalOracle {
    pub fn new(states: &[Coloring]) -> Self {
        let shape = *states[0].shape();
        let mut seen = vec![HashMap::new(); shape.n()];
        for s in states {
            for (v, map) in seen.iter_mut().enumerate() {
                let key = leaf_key(&shape, s, v);
                *map.entry(key).or_insert(0u64) |= 1u64 << (s.get(v) % 64);
            }
        }
        Self { shape, seen }
    }

    pub fn is_frozen(&self, c: &Coloring, v: usize) -> bool {
        let key = leaf_key(&self.shape, c, v);
        self.seen[v].get(&key).is_some_and(|m| m.count_ones() == 1)
    }

    pub fn root_frozen(&self, c: &Coloring) -> bool {
        self.is_frozen(c, 0)
    }
}

fn leaf_key(shape: &TreeShape, c: &Coloring, v: usize) -> Vec<u8> {
    let mut lo = v;
    let mut hi = v + 1;
    while lo < shape.leaves().start {
        lo = lo * shape.b() + 1;
        hi = hi * shape.b() + 1;
    }
    c.colors()[lo..hi].to_vec()
}

/// Upper bounds `U_ℓ` on the probability that a height-ℓ vertex is not
/// frozen, and the closed-form cap `b^-ε` when `k = b/((1+ε) ln b)`, ε > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreezeBound {
    pub u: Vec<f64>,
    pub cap: Option<f64>,
}

pub fn freeze_prob_bound_recursion(k: usize, b: usize, levels: usize) -> Result<FreezeBound> {
    if k < 3 {
        return Err(Error::PaletteTooSmall(k));
    }
    let km1 = (k - 1) as f64;
    let mut u = vec![0.0];
    for _ in 1..=levels {
        let prev = *u.last().expect("non-empty");
        u.push((km1 * (1.0 - (1.0 - prev) / km1).powi(b as i32)).min(1.0));
    }
    let eps = params::eps_below(k, b);
    let cap = (b >= 2 && eps > 0.0).then(|| (b as f64).powf(-eps));
    Ok(FreezeBound { u, cap })
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact `F_ℓ = P(a height-ℓ vertex is frozen)` by inclusion-exclusion over
/// the uncovered colors.
pub fn freeze_prob_exact_recursion(k: usize, b: usize, levels: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::PaletteTooSmall(k));
    }
    let km1 = (k - 1) as f64;
    let mut f = vec![1.0];
    for _ in 1..=levels {
        let prev = *f.last().expect("non-empty");
        let next: f64 = (0..k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(k - 1, j) * (1.0 - j as f64 * prev / km1).powi(b as i32)
            })
            .sum();
        f.push(next.clamp(0.0, 1.0));
    }
    Ok(f)
}

/// Distribution of the number of distinct target colors covered by `trials`
/// children, each frozen to a given one of `targets` specific colors with
/// probability `p` and, with probability `avoid`, frozen to a forbidden
/// color. Returns `P(all targets covered, none forbidden)`.
fn occupancy_cover(targets: usize, p: f64, avoid: f64, trials: usize) -> f64 {
    let mut dist = vec![0.0; targets + 1];
    dist[0] = 1.0;
    for _ in 0..trials {
        let mut next = vec![0.0; targets + 1];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let new_color = (targets - s) as f64 * p;
            let stay = 1.0 - new_color - avoid;
            next[s] += mass * stay;
            if s < targets {
                next[s + 1] += mass * new_color;
            }
        }
        dist = next;
    }
    dist[targets]
}

/// `F_ℓ` by a child-by-child occupancy recursion; agrees with
/// [`freeze_prob_exact_recursion`] without alternating sums.
pub fn freeze_prob_occupancy(k: usize, b: usize, levels: usize) -> Vec<f64> {
    let km1 = (k - 1) as f64;
    let mut f = vec![1.0];
    for _ in 1..=levels {
        let prev = *f.last().expect("non-empty");
        f.push(occupancy_cover(k - 1, prev / km1, 0.0, b));
    }
    f
}

/// Probability, at a path vertex of height `h`, that its `b-1` off-path
/// children cover every color except its own and the path child's, with
/// none of them frozen to the path child's color.
fn path_step_prob(k: usize, b: usize, f_below: f64) -> f64 {
    let km1 = (k - 1) as f64;
    let s: f64 = (0..=k - 2)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(k - 2, j) * (1.0 - (j + 1) as f64 * f_below / km1).powi(b as i32 - 1)
        })
        .sum();
    s.clamp(0.0, 1.0)
}

/// Exact `P(E(σ, z))` for a uniform coloring and any fixed leaf `z`: the
/// event holds iff at every path vertex the off-path children cover all
/// colors but the two path colors and none repeats the path child's color.
pub fn critical_leaf_probability(k: usize, b: usize, height: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::PaletteTooSmall(k));
    }
    if height == 0 {
        return Ok(0.0);
    }
    let f = freeze_prob_exact_recursion(k, b, height)?;
    Ok((1..=height).map(|h| path_step_prob(k, b, f[h - 1])).product())
}

/// Same probability through the occupancy recursion.
pub fn critical_leaf_probability_occupancy(k: usize, b: usize, height: usize) -> f64 {
    if height == 0 {
        return 0.0;
    }
    let km1 = (k - 1) as f64;
    let f = freeze_prob_occupancy(k, b, height);
    (1..=height)
        .map(|h| {
            let p = f[h - 1] / km1;
            occupancy_cover(k - 2, p, p, b - 1)
        })
        .product()
}

/// Expected number of critical leaves, `b^H P(E)`.
pub fn expected_critical_leaves(k: usize, b: usize, height: usize) -> Result<f64> {
    Ok((b as f64).powi(height as i32) * critical_leaf_probability(k, b, height)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiblingBlock {
    /// `(1 - F_{h-1}/(k-1))^(b-1)`.
    pub exact: f64,
    /// Same with `1 - U_{h-1}` in place of `F_{h-1}`.
    pub bound: f64,
    /// `b^-(1+ε) b^((1+ε)/b^ε)` for `ε = b/(k ln b) - 1` in `(0, 1)`.
    pub closed_form: Option<f64>,
}

/// Probability that no sibling of the path child is frozen to the path
/// child's color.
pub fn sibling_block_prob(k: usize, b: usize, height: usize, root_color: u8, child_color: u8) -> Result<SiblingBlock> {
    if child_color == root_color {
        return Err(Error::ColorClash(0));
    }
    if height == 0 {
        return Err(Error::InvalidParameter("sibling block needs height >= 1".into()));
    }
    let palette = Palette::new(k)?;
    palette.check_color(root_color as usize)?;
    palette.check_color(child_color as usize)?;
    let km1 = (k - 1) as f64;
    let f = freeze_prob_exact_recursion(k, b, height - 1)?[height - 1];
    let u = freeze_prob_bound_recursion(k, b, height - 1)?.u[height - 1];
    let pow = b as i32 - 1;
    let eps = params::eps_below(k, b);
    let bf = b as f64;
    Ok(SiblingBlock {
        exact: (1.0 - f / km1).powi(pow),
        bound: (1.0 - (1.0 - u) / km1).powi(pow),
        closed_form: (b >= 2 && eps > 0.0 && eps < 1.0)
            .then(|| bf.powf(-(1.0 + eps)) * bf.powf((1.0 + eps) / bf.powf(eps))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightFreeze {
    pub height: usize,
    pub vertices: usize,
    pub frozen: usize,
    pub frozen_prob: f64,
    pub not_frozen_se: f64,
    pub exact_frozen: f64,
    pub not_frozen_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreezeReport {
    pub b: usize,
    pub height: usize,
    pub k: usize,
    pub replicas: usize,
    pub heights: Vec<HeightFreeze>,
    /// Critical leaves per coloring.
    pub critical_mean: EstimateWithCI,
    pub critical_exact: f64,
    /// `(6/n) E[#critical]` with its interval.
    pub phi_sum: EstimateWithCI,
    /// `E[#critical 1_S] / (n π(S) π(S^c))` with `π(S)` from the samples.
    pub phi_exact_normalization: Option<f64>,
    pub pi_s: f64,
    pub histogram: BTreeMap<usize, usize>,
}

/// Monte Carlo over uniform colorings: per-height frozen frequencies pooled
/// over all vertices of a height, and the critical-leaf statistics behind
/// the conductance bound.
pub fn conductance_estimate_frozen_set(
    shape: TreeShape,
    palette: Palette,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<FreezeReport> {
    palette.require_ergodic()?;
    let k = palette.k();
    let b = shape.b();
    let height = shape.height();
    let samples = map_replicas(workers, replicas, |i| {
        let mut rng = replica_rng(seed, "freeze", i as u64);
        let c = sample_uniform(shape, palette, &mut rng);
        let mask = compute_freeze_mask(&c);
        let mut per_height = vec![0usize; height + 1];
        for v in 0..shape.n() {
            if mask.is_frozen(v) {
                per_height[shape.height_of(v).expect("in range")] += 1;
            }
        }
        (per_height, critical_leaf_count(&c, &mask), in_frozen_set(&c, &mask))
    });
    let exact = freeze_prob_exact_recursion(k, b, height)?;
    let bound = freeze_prob_bound_recursion(k, b, height)?;
    let mut heights = Vec::new();
    for (h, (&exact_frozen, &not_frozen_bound)) in exact.iter().zip(&bound.u).enumerate() {
        let per = shape.level(height - h).len();
        let vertices = per * replicas;
        let frozen: usize = samples.iter().map(|s| s.0[h]).sum();
        let p = frozen as f64 / vertices as f64;
        // vertices of one coloring are correlated: the SE is over per-coloring fractions
        let var = samples
            .iter()
            .map(|s| (s.0[h] as f64 / per as f64 - p).powi(2))
            .sum::<f64>()
            / (replicas.max(2) - 1) as f64;
        heights.push(HeightFreeze {
            height: h,
            vertices,
            frozen,
            frozen_prob: p,
            not_frozen_se: (var / replicas as f64).sqrt(),
            exact_frozen,
            not_frozen_bound,
        });
    }
    let crit: Vec<f64> = samples.iter().map(|s| s.1 as f64).collect();
    let mut histogram = BTreeMap::new();
    for s in &samples {
        *histogram.entry(s.1).or_insert(0) += 1;
    }
    let mut rng = replica_rng(seed, "freeze-bootstrap", 0);
    let critical_mean = bootstrap_mean(&crit, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE, &mut rng);
    let scale = 6.0 / shape.n() as f64;
    let phi_sum = EstimateWithCI {
        estimate: critical_mean.estimate * scale,
        low: critical_mean.low * scale,
        high: critical_mean.high * scale,
        ..critical_mean
    };
    let in_s = samples.iter().filter(|s| s.2).count();
    let pi_s = in_s as f64 / replicas as f64;
    let crit_in_s: f64 = samples.iter().filter(|s| s.2).map(|s| s.1 as f64).sum::<f64>() / replicas as f64;
    let phi_exact_normalization =
        (in_s > 0 && in_s < replicas).then(|| crit_in_s / (shape.n() as f64 * pi_s * (1.0 - pi_s)));
    Ok(FreezeReport {
        b,
        height,
        k,
        replicas,
        heights,
        critical_mean,
        critical_exact: expected_critical_leaves(k, b, height)?,
        phi_sum,
        phi_exact_normalization,
        pi_s,
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalEnumeration {
    pub omega_size: usize,
    pub mean_critical: f64,
    pub mean_critical_in_s: f64,
    pub pi_s: f64,
    /// `(6/n) E[#critical]`.
    pub phi_sum: f64,
    /// `E[#critical 1_S] / (n π(S) π(S^c))`.
    pub phi_exact_normalization: f64,
}

/// Critical-leaf statistics by full enumeration, using the brute-force
/// definitional oracle for every recolored state.
pub fn enumerate_critical(shape: TreeShape, palette: Palette, cap: usize) -> Result<CriticalEnumeration> {
    palette.require_ergodic()?;
    let states = enumerate_colorings(shape, palette, None, cap)?;
    let oracle = DefinitionalOracle::new(&states);
    let k = palette.k() as u8;
    let mut total = 0usize;
    let mut total_in_s = 0usize;
    let mut in_s = 0usize;
    for s in &states {
        if !oracle.root_frozen(s) {
            continue;
        }
        let low = (s.get(0) as usize) <= palette.k() / 2;
        in_s += low as usize;
        let mut crit = 0;
        for z in shape.leaves() {
            let Some(p) = shape.parent_unchecked(z) else { continue };
            let mut t = s.clone();
            let hit = (1..=k).filter(|&c| c != s.get(p)).any(|c| {
                t.set_unchecked(z, c);
                !oracle.root_frozen(&t)
            });
            crit += hit as usize;
        }
        total += crit;
        if low {
            total_in_s += crit;
        }
    }
    let m = states.len() as f64;
    let n = shape.n() as f64;
    let pi_s = in_s as f64 / m;
    let mean_critical_in_s = total_in_s as f64 / m;
    Ok(CriticalEnumeration {
        omega_size: states.len(),
        mean_critical: total as f64 / m,
        mean_critical_in_s,
        pi_s,
        phi_sum: 6.0 / n * total as f64 / m,
        phi_exact_normalization: mean_critical_in_s / (n * pi_s * (1.0 - pi_s)),
    })
}
