//! The console's vector stroke format and its conversion to sketch directives.

use serde::{Deserialize, Serialize};

use crate::types::{DrawingStyle, RasterImage, StepColor};

use super::render::{render_sketch, SketchScript, SymbolDirective, SymbolKind, SymbolTruth};
use super::DatagenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveHint {
    /// Points run tail to head; a triangle head is added at the last point.
    Arrow,
    /// First point is the center, second lies on the rim.
    Circle,
    Freehand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub color_ordinal: u32,
    pub width_px: f64,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive_hint: Option<PrimitiveHint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrokeList {
    pub strokes: Vec<Stroke>,
}

impl StrokeList {
    pub fn to_script(&self) -> Result<SketchScript, DatagenError> {
        let mut symbols = Vec::with_capacity(self.strokes.len());
        for (index, s) in self.strokes.iter().enumerate() {
            if s.points.len() < 2 {
                return Err(DatagenError::InvalidScript { index, reason: "stroke needs at least two points".into() });
            }
            let base = SymbolDirective {
                kind: SymbolKind::Stroke,
                ordinal: s.color_ordinal,
                control_points: s.points.clone(),
                radius: 0.0,
                style: DrawingStyle::Geometric,
                stroke_width: s.width_px,
                jitter: 0.0,
                seed: 0,
            };
            symbols.push(match s.primitive_hint {
                Some(PrimitiveHint::Arrow) => SymbolDirective { kind: SymbolKind::Arrow, ..base },
                Some(PrimitiveHint::Circle) => {
                    let (c, e) = (s.points[0], s.points[1]);
                    SymbolDirective {
                        kind: SymbolKind::Circle,
                        control_points: vec![c],
                        radius: (e[0] - c[0]).hypot(e[1] - c[1]),
                        ..base
                    }
                }
                Some(PrimitiveHint::Freehand) | None => base,
            });
        }
        Ok(SketchScript { symbols })
    }
}

/// Rasterizes strokes over `clean` with the same renderer the generator uses.
pub fn render_strokes(
    clean: &RasterImage,
    strokes: &StrokeList,
    palette: &[StepColor],
) -> Result<(RasterImage, Vec<SymbolTruth>), DatagenError> {
    render_sketch(clean, &strokes.to_script()?, palette)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_round_trips() {
        let text = r#"{"strokes":[{"color_ordinal":1,"width_px":5.0,"points":[[10.0,20.0],[90.0,20.0]],"primitive_hint":"arrow"},{"color_ordinal":2,"width_px":3.0,"points":[[5.0,5.0],[9.0,9.0]]}]}"#;
        let list: StrokeList = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&list).unwrap(), text);
        let script = list.to_script().unwrap();
        assert_eq!(script.symbols[0].kind, SymbolKind::Arrow);
        assert_eq!(script.symbols[1].kind, SymbolKind::Stroke);
    }

    #[test]
    fn circle_radius_from_rim_point() {
        let list = StrokeList {
            strokes: vec![Stroke {
                color_ordinal: 1,
                width_px: 4.0,
                points: vec![[50.0, 50.0], [53.0, 54.0]],
                primitive_hint: Some(PrimitiveHint::Circle),
            }],
        };
        let s = list.to_script().unwrap();
        assert_eq!(s.symbols[0].radius, 5.0);
        assert_eq!(s.symbols[0].control_points, vec![[50.0, 50.0]]);
    }
}
