//! Graphical constraints for linear structural equation models.

pub mod error;
pub mod field;
pub mod graph;
pub mod htc;
pub mod linalg;
pub mod oracle;
pub mod classify;
pub mod constraint;
pub mod construct;
pub mod poly;
pub mod search;
pub mod study;
pub mod transform;

pub use error::{Error, Result};
pub use graph::{MixedGraph, Name, NodeSet};
pub use poly::{Fingerprint, PatternMatrix, Polynomial, Var};
