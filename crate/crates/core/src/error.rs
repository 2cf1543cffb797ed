use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("branching factor must be at least 1")]
    ZeroBranching,
    #[error("tree with b={b}, H={height} has too many vertices for this platform")]
    TreeTooLarge { b: usize, height: usize },
    #[error("vertex {v} out of range for a tree with {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("vertex {0} is not a leaf")]
    NotALeaf(usize),
    #[error("palette needs at least 2 colors, got {0}")]
    PaletteTooSmall(usize),
    #[error("palette supports at most {max} colors, got {k}")]
    PaletteTooLarge { k: usize, max: usize },
    #[error("color {color} is outside the palette 1..={k}")]
    ColorOutOfRange { color: usize, k: usize },
    #[error("assignment has {got} entries but the tree has {n} vertices")]
    LengthMismatch { got: usize, n: usize },
    #[error("dynamics needs k >= 3 colors, got {0}")]
    NotErgodic(usize),
    #[error("coloring is not proper")]
    Improper,
    #[error("child color equals the root color {0}")]
    ColorClash(usize),
    #[error("count of colorings overflows u128")]
    CountOverflow,
    #[error("state space has {size} states; the cap is {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },
    #[error("subset is trivial (empty or the whole state space)")]
    TrivialSubset,
    #[error("experiment requires a star (H = 1), got H = {0}")]
    NotAStar(usize),
    #[error("configuration is below the threshold: C = {0:.4} must exceed 1")]
    BelowThreshold(f64),
    #[error("no start coloring satisfies the conditioning: {0}")]
    EmptyConditioning(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("could not parse state: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
