//! Deep clustering with an autoencoder whose latent space is trained under a
//! reconstruction + centering objective, alternated with classical K-means
//! centroid reinitialization after every epoch.
//!
//! Modules:
//!
//! * [`nn`]: fully-connected autoencoder, analytic backprop, SGD/Adam.
//! * [`clustering`]: k-means++ and Lloyd iterations.
//! * [`losses`]: centering (CT), DKM and DCN clustering terms and the
//!   combined objective.
//! * [`metrics`]: Hungarian matching, ACC and NMI.
//! * [`data`]: IDX / delimited loaders and synthetic blobs.
//! * [`harness`]: training loops for every method and the multi-seed suite.

pub mod clustering;
pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
