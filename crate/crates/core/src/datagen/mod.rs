//! Synthetic RoVI sketches and dataset records.

mod dataset;
mod noise;
mod render;
mod strokes;

use thiserror::Error;

pub use dataset::{
    generate_dataset, generate_record, random_tabletop, record_seed, sample_task, sample_variant, script_for,
    truth_symbols, DatasetError, GeneratedRecord, Manifest, RoviRecord, RoviVariant, SamplerConfig, StepSketch,
    TaskSketch, VariantStyle,
};
pub use noise::SmoothNoise;
pub use render::{render_sketch, shaft_curve, SketchScript, SymbolDirective, SymbolKind, SymbolTruth};
pub use strokes::{render_strokes, PrimitiveHint, Stroke, StrokeList};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("symbol {index} leaves the image")]
    SymbolOutOfBounds { index: usize },
    #[error("symbol {index}: {reason}")]
    InvalidScript { index: usize, reason: String },
    #[error("no palette color has ordinal {0}")]
    UnknownOrdinal(u32),
}

impl DatagenError {
    pub fn code(&self) -> &'static str {
        match self {
            DatagenError::SymbolOutOfBounds { .. } => "SymbolOutOfBounds",
            DatagenError::InvalidScript { .. } => "InvalidScript",
            DatagenError::UnknownOrdinal(_) => "UnknownOrdinal",
        }
    }
}
