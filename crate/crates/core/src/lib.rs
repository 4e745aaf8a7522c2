//! Spectral clustering on a small map/reduce engine.
//!
//! Data flows through four stages: a Gaussian (or graph) similarity matrix
//! built by a map job, the smallest eigenvectors of the normalized
//! Laplacian from Lanczos with distributed matrix-vector products,
//! row normalization, and K-means run as iterated map/reduce jobs.
//! Intermediate matrices live in an in-memory sharded table store.

pub mod dataio;
pub mod eigensolver;
pub mod kmeans;
pub mod kvstore;
pub mod mapreduce;
pub mod metrics;
pub mod pipeline;
pub mod similarity;
