//! Glauber dynamics for proper colorings of complete b-ary trees: exact
//! samplers, the heat-bath chain, maximal couplings, frozen-vertex analysis
//! and exhaustive spectral computations on small instances.

pub mod coloring;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod freeze;
pub mod parallel;
pub mod params;
pub mod scan;
pub mod seed;
pub mod spectral;
pub mod stats;
pub mod tree;

pub use coloring::{ColorSet, Coloring, Palette};
pub use coupling::{CoupledPair, DisagreementReport};
pub use dynamics::ChainState;
pub use error::{Error, Result};
pub use freeze::FreezeMask;
pub use params::KRounding;
pub use spectral::ChainAnalysis;
pub use stats::EstimateWithCI;
pub use tree::TreeShape;
