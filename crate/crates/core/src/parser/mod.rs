//! Deterministic keypoint module: color segmentation, symbol classification, and keypoint extraction.

mod arrow;
mod circle;
pub mod segment;
pub mod skeleton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    validate_palette, DrawingStyle, PaletteError, RasterImage, RejectedComponent, StepColor, Symbol,
    SymbolSet,
};

pub use arrow::extract_arrow_keypoints;
pub use circle::extract_circle_keypoints;
pub use segment::{segment_by_color, ColorMask, Component};
pub use skeleton::{skeletonize, Skeleton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no palette-colored pixels found")]
    NoSymbolsFound,
    #[error("annotated image is {annotated:?} but clean image is {clean:?}")]
    DimensionMismatch { annotated: (u32, u32), clean: (u32, u32) },
    #[error("invalid palette: {0}")]
    InvalidPalette(#[from] PaletteError),
    #[error("component has {size} pixels, below minimum {min}")]
    ComponentTooSmall { size: usize, min: usize },
    #[error("arrowhead is ambiguous: end density ratio {ratio:.3} below threshold")]
    AmbiguousHead { ratio: f64 },
    #[error("arrow skeleton path is only {length:.1} px long")]
    DegenerateArrow { length: f64 },
    #[error("component has no enclosed hole")]
    NotAnnular,
    #[error("component is not an arrow: {0}")]
    NotAnArrow(String),
    #[error("no component could be parsed into a symbol ({} rejected)", failures.len())]
    NoValidSymbols { failures: Vec<RejectedComponent> },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::NoSymbolsFound => "NoSymbolsFound",
            ParseError::DimensionMismatch { .. } => "DimensionMismatch",
            ParseError::InvalidPalette(_) => "InvalidPalette",
            ParseError::ComponentTooSmall { .. } => "ComponentTooSmall",
            ParseError::AmbiguousHead { .. } => "AmbiguousHead",
            ParseError::DegenerateArrow { .. } => "DegenerateArrow",
            ParseError::NotAnnular => "NotAnnular",
            ParseError::NotAnArrow(_) => "NotAnArrow",
            ParseError::NoValidSymbols { .. } => "NoValidSymbols",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    /// Euclidean RGB radius around each palette color.
    pub tolerance: f64,
    pub min_stroke_pixels: usize,
    pub max_waypoints: usize,
    /// Minimum ink-density ratio between the two path ends for a head to be called.
    pub head_density_ratio: f64,
    pub min_path_length: f64,
    /// Minimum enclosed-hole area as a fraction of the bounding box, for circles.
    pub min_hole_fraction: f64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            tolerance: 100.0,
            min_stroke_pixels: 30,
            max_waypoints: 8,
            head_density_ratio: 1.2,
            min_path_length: 5.0,
            min_hole_fraction: 0.2,
        }
    }
}

/// Result of classifying one component.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolClass {
    Arrow,
    Circle,
    Unknown(String),
}

/// Classifies a component as circle (closed annulus), arrow (single headed path), or unknown.
pub fn classify_symbol(component: &Component, cfg: &ParserConfig) -> Result<SymbolClass, ParseError> {
    Ok(match classify_detailed(component, cfg)? {
        Classified::Arrow(_) => SymbolClass::Arrow,
        Classified::Circle => SymbolClass::Circle,
        Classified::Unknown(r) => SymbolClass::Unknown(r),
    })
}

enum Classified {
    Arrow(arrow::ArrowAnalysis),
    Circle,
    Unknown(String),
}

fn classify_detailed(component: &Component, cfg: &ParserConfig) -> Result<Classified, ParseError> {
    if component.len() < cfg.min_stroke_pixels {
        return Err(ParseError::ComponentTooSmall { size: component.len(), min: cfg.min_stroke_pixels });
    }
    if circle::is_annulus(component, cfg.min_hole_fraction) {
        return Ok(Classified::Circle);
    }
    match arrow::analyze(component, None, cfg) {
        Ok(a) => {
            // an arrow must be longer than its own head
            if a.length < 6.0 * a.stroke_width {
                Ok(Classified::Unknown(format!(
                    "path of {:.1} px is too short for stroke width {:.1}",
                    a.length, a.stroke_width
                )))
            } else {
                Ok(Classified::Arrow(a))
            }
        }
        Err(e) => Ok(Classified::Unknown(e.to_string())),
    }
}

/// Segments, classifies, and extracts every symbol of a RoVI sketch.
///
/// Components that are not symbols are reported in `SymbolSet::rejected`; parsing fails only
/// when nothing at all can be extracted.
pub fn parse_sketch(
    annotated: &RasterImage,
    clean: Option<&RasterImage>,
    palette: &[StepColor],
    cfg: &ParserConfig,
) -> Result<SymbolSet, ParseError> {
    validate_palette(palette, cfg.tolerance)?;
    let masks = segment_by_color(annotated, clean, palette, cfg.tolerance)?;
    let mut set = SymbolSet::default();
    for mask in &masks {
        for comp in mask.components() {
            let reject = |err: &dyn std::fmt::Display, code: &str| RejectedComponent {
                ordinal: comp.color.ordinal,
                component: comp.id,
                bbox: comp.bbox,
                pixel_count: comp.len(),
                code: code.to_string(),
                message: err.to_string(),
            };
            match classify_detailed(&comp, cfg) {
                Ok(Classified::Circle) => match extract_circle_keypoints(&comp) {
                    Ok(c) => set.symbols.push(Symbol::Circle(c)),
                    Err(e) => set.rejected.push(reject(&e, e.code())),
                },
                Ok(Classified::Arrow(a)) => {
                    set.symbols.push(Symbol::Arrow(a.into_symbol(comp.color, cfg.max_waypoints)))
                }
                Ok(Classified::Unknown(reason)) => set.rejected.push(reject(&reason, "Unknown")),
                Err(e) => set.rejected.push(reject(&e, e.code())),
            }
        }
    }
    if set.symbols.is_empty() {
        return Err(ParseError::NoValidSymbols { failures: set.rejected });
    }
    Ok(set)
}

pub(crate) fn style_or(hint: Option<DrawingStyle>, detected: DrawingStyle) -> DrawingStyle {
    hint.unwrap_or(detected)
}
