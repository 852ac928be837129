//! Toolkit for auditing search-engine personalization.
//!
//! The crate covers the whole measurement chain: a seeded synthetic user
//! population, partisan lexicon construction, ranked-list similarity
//! (Jaccard and extrapolated rank-biased overlap), rank-weighted ideology
//! scores of result pages, local/non-local domain coding, a simulated
//! search engine with injectable personalization effects, and fixed-effects
//! OLS with multiway clustered standard errors.
//!
//! The rank-weighting math is generic over the scalar type (see [`Scalar`]),
//! so the same code runs on `f64` and on exact rationals. Concrete aliases
//! for both live at the crate root.

pub mod econometrics;
pub mod error;
pub mod experiment;
pub mod ideology_index;
pub mod lexicon;
pub mod localness;
pub mod population;
pub mod rank_similarity;
pub mod records;
pub mod scalar;
pub mod seed;
pub mod sim_engine;

pub use error::{Error, Result};
pub use scalar::{FloatScalar, Scalar};

/// Floating-point scalar used by the analysis pipeline.
pub type Real = f64;

/// Exact rational scalar; suitable for short pages and small depths.
pub type Exact = num_rational::Ratio<i128>;

/// Persistence over [`Real`].
pub type RealPersistence = rank_similarity::Persistence<Real>;

/// Persistence over [`Exact`].
pub type ExactPersistence = rank_similarity::Persistence<Exact>;

/// Default rank-weight persistence shared by RBO and the ideology score.
pub const DEFAULT_PERSISTENCE: Real = 0.9;
