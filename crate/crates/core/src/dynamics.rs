//! Heat-bath single-site Glauber dynamics on proper colorings.
//!
//! One step draws a uniform vertex, then a uniform color from the vertex's
//! available set, always in that order. When only the current color is
//! available the vertex keeps it.

use crate::coloring::{Coloring, Palette};
use crate::error::{Error, Result};
use crate::parallel::map_replicas;
use crate::seed::{replica_rng, ChainRng};
use crate::stats::{tv_with_bootstrap, EstimateWithCI, BOOTSTRAP_RESAMPLES, DEFAULT_CONFIDENCE};
use crate::tree::TreeShape;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct ChainState {
    coloring: Coloring,
    step_count: u64,
    rng: ChainRng,
}

/// Recolors `v` from its available set using one color draw.
#[inline]
pub(crate) fn heat_bath_update<R: Rng + ?Sized>(coloring: &mut Coloring, v: usize, rng: &mut R) {
    let avail = coloring.available_unchecked(v, None);
    assert!(!avail.is_empty(), "vertex {v} has no available color");
    let idx = rng.random_range(0..avail.len());
    let c = avail.nth(idx).expect("index within available set");
    coloring.set_unchecked(v, c);
    debug_assert!(locally_proper(coloring, v));
}

pub(crate) fn locally_proper(coloring: &Coloring, v: usize) -> bool {
    let shape = coloring.shape();
    let c = coloring.get(v);
    shape
        .parent_unchecked(v)
        .is_none_or(|p| coloring.get(p) != c)
        && shape.children_unchecked(v).all(|w| coloring.get(w) != c)
}

impl ChainState {
    pub fn new(coloring: Coloring, rng: ChainRng) -> Result<Self> {
        coloring.palette().require_ergodic()?;
        if !coloring.is_proper() {
            return Err(Error::Improper);
        }
        Ok(Self {
            coloring,
            step_count: 0,
            rng,
        })
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn into_coloring(self) -> Coloring {
        self.coloring
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One transition; returns the vertex that was resampled.
    pub fn step(&mut self) -> usize {
        let v = self.rng.random_range(0..self.coloring.shape().n());
        heat_bath_update(&mut self.coloring, v, &mut self.rng);
        self.step_count += 1;
        v
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

/// TV distance between the root-color law after `t` steps from `start` and
/// the uniform law on the palette. By data processing this lower-bounds the
/// full TV distance to stationarity.
pub fn projected_tv_lower_bound(
    start: &Coloring,
    t: u64,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<EstimateWithCI> {
    start.palette().require_ergodic()?;
    let k = start.palette().k();
    let roots = map_replicas(workers, replicas, |i| {
        let mut chain = ChainState::new(start.clone(), replica_rng(seed, "projected-tv", i as u64))
            .expect("validated start");
        chain.run(t);
        chain.coloring().get(0)
    });
    let mut counts = vec![0usize; k];
    for c in roots {
        counts[c as usize - 1] += 1;
    }
    let uniform = vec![1.0 / k as f64; k];
    let mut rng = replica_rng(seed, "projected-tv-bootstrap", 0);
    Ok(tv_with_bootstrap(
        &counts,
        &uniform,
        BOOTSTRAP_RESAMPLES,
        DEFAULT_CONFIDENCE,
        &mut rng,
    ))
}

/// Convenience constructor for a chain started from an exact uniform sample.
pub fn uniform_chain(shape: TreeShape, palette: Palette, seed: u64) -> Result<ChainState> {
    let mut rng = replica_rng(seed, "uniform-start", 0);
    let start = crate::coloring::sample_uniform(shape, palette, &mut rng);
    ChainState::new(start, rng)
}
