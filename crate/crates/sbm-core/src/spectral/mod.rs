//! Spectral embeddings and k-means labeling.
//!
//! Both embeddings are driven by a matrix-free Lanczos solver: the
//! modularity matrix B = A − k kᵀ/2M is never materialized, and the
//! random-walk embedding works through the symmetrized operator
//! D^{−1/2} A D^{−1/2}, whose spectrum matches the walk matrix
//! P = D^{−1} A.

mod embed;
mod kmeans;
mod lanczos;
mod operators;

pub use embed::{
    embed_diffusion, embed_modularity, spectral_cluster, Embedding, EmbeddingKind,
    SpectralMethod, SpectralOptions,
};
pub use kmeans::kmeans;
pub use lanczos::{top_eigenpairs, EigsOptions, Which};
pub use operators::{LinearOperator, ModularityOperator, WalkOperator};
