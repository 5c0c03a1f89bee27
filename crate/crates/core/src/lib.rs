//! Doubly intermittent full-branch interval maps.
//!
//! Maps of [-1, 1] with two increasing full branches, neutral (or
//! hyperbolic) fixed points at both ends and a power-law singularity or
//! critical point on each side of 0. The crate builds such maps from their
//! local parameters, iterates them precisely near the fixed points,
//! constructs the first-return map to the left base cell, estimates tail
//! exponents and limit laws, and builds smooth perturbations that move a map
//! between the statistical classes.

pub mod axioms;
pub mod branch;
pub mod bump;
pub mod chains;
pub mod error;
pub mod induced;
pub mod jet;
pub mod orbit;
pub mod params;
pub mod perturb;
pub mod roots;
pub mod stats;
pub mod ulam;

pub use axioms::{verify_axioms, verify_axioms_with, A2Options, AxiomReport};
pub use branch::{make_map, BranchMap, FixedModel, PerturbSpec, Point, Region, Side};
pub use error::{Error, Result};
pub use params::{classify, regularity_exponents, ClassKind, ClassLabel, MapParams, Regularity};
