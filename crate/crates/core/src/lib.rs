//! Numerical checks of flag additivity and related properties for quantum
//! resource measures.

pub mod channel;
pub mod checks;
pub mod error;
pub mod exec;
pub mod flags;
pub mod format;
pub mod instances;
pub mod linalg;
pub mod measures;
pub mod rng;
pub mod search;
pub mod state;
pub mod sweep;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Which resource theory the free objects belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Coherence,
    Entanglement,
}

impl std::fmt::Display for Theory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Theory::Coherence => "coherence",
            Theory::Entanglement => "entanglement",
        })
    }
}
