//! Point-supervised temporal grounding of natural-language queries in
//! videos.
//!
//! A model fuses per-frame video features with a query's token features,
//! scores frames and sliding-window proposals by cosine similarity to the
//! pooled sentence, lets each head refine the other's input through a mask,
//! and trains from a single annotated frame per query.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod guidance;
pub mod inference;
pub mod losses;
pub mod model;
pub mod params;
pub mod tcl;
pub mod train;
pub mod types;

pub use config::{load_config, ExperimentConfig};
pub use error::{Error, Result};
pub use types::{FeatureBundle, FrameSpan, GuidanceMasks, Moment, Proposal, SaliencyTrack};
pub use model::Model;
pub use train::{train, TrainOutputs, TrainSummary};
