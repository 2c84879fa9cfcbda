//! Pessimistic cardinality estimation: guaranteed upper bounds on
//! conjunctive-query output sizes computed from per-relation
//! degree-sequence statistics.
//!
//! The crate provides four bounding methods (fractional edge cover,
//! chain/max-degree covers, integral covers via subset-lattice shortest
//! paths, and an entropy-based LP over polymatroids), a pairwise
//! degree-sequence join bound, the statistics pipeline that feeds them,
//! and a brute-force oracle that checks every bound against exact join
//! sizes on desk-scale data.

pub mod bounds;
pub mod catalog;
pub mod cli;
pub mod dsb;
pub mod error;
pub mod estimate;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod polymatroid;
pub mod stats;
pub mod synth;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
