//! Annotation and feature ingestion, plus a synthetic dataset generator.

pub mod annotations;
pub mod dataset;
pub mod embed;
pub mod features;
pub mod sampling;
pub mod synthetic;

pub use annotations::{
    load_annotations, seconds_to_frames, write_annotations_jsonl, AnnotationFormat, AnnotationRecord, DurationTable,
};
pub use dataset::{load_dataset, Dataset};
pub use embed::TokenEmbedder;
pub use features::{load_features, read_feature_file, uniform_sample, write_feature_file};
pub use sampling::sample_point_annotation;
pub use synthetic::{generate_synthetic, persist_synthetic, SyntheticSpec};
