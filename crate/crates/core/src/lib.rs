pub mod bipartite;
pub mod error;
pub mod exact;
pub mod scan;
pub mod solution;
pub mod solver;
pub mod ti;
pub mod treesim;
pub mod wand;

pub use error::{Error, Result};
