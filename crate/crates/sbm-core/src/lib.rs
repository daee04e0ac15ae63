//! Stochastic block model generation and latent-class inference.
//!
//! The crate covers the full benchmark pipeline: drawing networks with
//! planted classes (`generate`), recovering the classes with sparse
//! belief propagation (`bp`), naive mean field (`mf`) or spectral
//! embeddings (`spectral`), learning the parameters by expectation
//! maximization (`em`), and scoring estimates against the planted truth
//! (`metrics`). A brute-force oracle (`exact`) backs the tests on small
//! instances.

pub mod bp;
pub mod em;
pub mod engine;
pub mod error;
pub mod exact;
pub mod generate;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod mf;
pub mod model;
pub mod rng;
pub mod spectral;

pub use engine::{BeliefInit, EngineReport, EstepOptions, Marginals};
pub use error::{Error, Result};
pub use graph::{Graph, NodeMap};
pub use model::{BlockModel, LabelAssignment, StructureKind, StructurePreset};
