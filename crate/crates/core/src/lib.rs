//! Directed-sharing toolkit.
//!
//! Likes and ratings models, Jaccard similarity, an ego-network recommender,
//! share-prediction features and decision trees, a preference-salience cascade
//! simulator, sharing statistics and a synthetic study generator.

pub mod classifier;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod recommender;
pub mod rng;
pub mod similarity;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
