//! Combinatorics and decision-boundary topology of fully-connected ReLU networks.
//!
//! The canonical polyhedral complex of a ReLU network is enumerated through the sign
//! sequences of its vertices ([`builder`]). Those sequences generate a cubical complex
//! whose cells are in bijection with all cells of the polyhedral complex
//! ([`topology`]), from which the mod-2 Betti numbers of the one-point
//! compactification of the decision boundary follow.

pub mod builder;
pub mod cli;
pub mod error;
pub mod gf2;
pub mod model;
pub mod oracle;
pub mod signs;
pub mod topology;

pub use builder::{build_complex, cube_closure, LayerBuildState, Tolerances, Vertex};
pub use error::{Degeneracy, Error, Result};
pub use model::{AffineFunctional, AffineLayer, NodeIndex, ReluNetwork};
pub use signs::SignSequence;
pub use topology::{BettiReport, ChainComplexGF2, CubicalComplex};
