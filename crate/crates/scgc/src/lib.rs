//! Self-supervised contrastive graph clustering.
//!
//! An MLP autoencoder learns node embeddings while graph structure is
//! imposed purely through a contrastive loss over precomputed influence
//! weights (powers of the normalized adjacency), and cluster assignments
//! are refined by KL self-supervision against a sharpened target
//! distribution. No convolutions, no attention, and no adjacency access at
//! inference time.

// index-based loops over parallel buffers are the norm in the kernel code
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod clustering;
pub mod dataio;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod inference;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod presets;
pub mod rng;

pub use error::{Result, ScgcError};
pub use matrix::Matrix;
pub use rng::RngState;
