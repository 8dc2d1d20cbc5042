//! Color segmentation and 8-connected component labeling.

use serde::{Deserialize, Serialize};

use crate::types::{rgb_distance, RasterImage, StepColor};

use super::ParseError;

/// Pixels of one palette color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorMask {
    pub color: StepColor,
    pub width: u32,
    pub height: u32,
    pub bitmap: Vec<bool>,
    pub component_count: usize,
}

impl ColorMask {
    pub fn get(&self, u: u32, v: u32) -> bool {
        self.bitmap[v as usize * self.width as usize + u as usize]
    }

    pub fn pixel_count(&self) -> usize {
        self.bitmap.iter().filter(|b| **b).count()
    }

    /// 8-connected components in raster discovery order.
    pub fn components(&self) -> Vec<Component> {
        label_components(self.width, self.height, &self.bitmap)
            .into_iter()
            .enumerate()
            .map(|(id, pixels)| Component::new(id, self.color, pixels))
            .collect()
    }
}

/// A connected set of same-colored pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: usize,
    pub color: StepColor,
    /// `(u, v)` in raster order.
    pub pixels: Vec<(u32, u32)>,
    /// `[u_min, v_min, u_max, v_max]`, inclusive.
    pub bbox: [u32; 4],
}

impl Component {
    pub fn new(id: usize, color: StepColor, mut pixels: Vec<(u32, u32)>) -> Self {
        pixels.sort_unstable_by_key(|&(u, v)| (v, u));
        let mut bbox = [u32::MAX, u32::MAX, 0, 0];
        for &(u, v) in &pixels {
            bbox[0] = bbox[0].min(u);
            bbox[1] = bbox[1].min(v);
            bbox[2] = bbox[2].max(u);
            bbox[3] = bbox[3].max(v);
        }
        if pixels.is_empty() {
            bbox = [0, 0, 0, 0];
        }
        Self { id, color, pixels, bbox }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn bbox_width(&self) -> u32 {
        self.bbox[2] - self.bbox[0] + 1
    }

    pub fn bbox_height(&self) -> u32 {
        self.bbox[3] - self.bbox[1] + 1
    }

    /// Bitmap of the bounding box padded by `pad` background pixels on every side.
    pub fn local_mask(&self, pad: u32) -> LocalMask {
        let w = self.bbox_width() + 2 * pad;
        let h = self.bbox_height() + 2 * pad;
        let origin = (self.bbox[0] as i64 - pad as i64, self.bbox[1] as i64 - pad as i64);
        let mut bits = vec![false; w as usize * h as usize];
        for &(u, v) in &self.pixels {
            let x = (u as i64 - origin.0) as usize;
            let y = (v as i64 - origin.1) as usize;
            bits[y * w as usize + x] = true;
        }
        LocalMask { origin, width: w, height: h, bits }
    }
}

/// A cropped binary mask with its offset in image coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalMask {
    pub origin: (i64, i64),
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl LocalMask {
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: i64, y: i64, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn to_image(&self, x: i64, y: i64) -> (u32, u32) {
        ((x + self.origin.0) as u32, (y + self.origin.1) as u32)
    }

    pub fn to_local(&self, u: u32, v: u32) -> (i64, i64) {
        (u as i64 - self.origin.0, v as i64 - self.origin.1)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

pub(crate) const N8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Labels 8-connected foreground components; each returned list is in raster order of discovery.
pub fn label_components(width: u32, height: u32, bitmap: &[bool]) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (width as i64, height as i64);
    let mut seen = vec![false; bitmap.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bitmap.len() {
        if !bitmap[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = ((i as i64) % w, (i as i64) / w);
            pixels.push((x as u32, y as u32));
            for (dx, dy) in N8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if bitmap[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(pixels);
    }
    out
}

/// Index of the nearest palette color within `tolerance`; ties go to the lowest ordinal.
pub fn nearest_palette_color(rgb: [u8; 3], palette: &[StepColor], tolerance: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in palette.iter().enumerate() {
        let d = rgb_distance(rgb, c.rgb);
        if d > tolerance {
            continue;
        }
        best = match best {
            None => Some((i, d)),
            Some((j, bd)) => {
                if d < bd || (d == bd && c.ordinal < palette[j].ordinal) {
                    Some((i, d))
                } else {
                    Some((j, bd))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}

/// Splits the sketch into one mask per palette color that is present.
///
/// With a `clean` image, pixels identical in both images are excluded first.
pub fn segment_by_color(
    annotated: &RasterImage,
    clean: Option<&RasterImage>,
    palette: &[StepColor],
    tolerance: f64,
) -> Result<Vec<ColorMask>, ParseError> {
    if let Some(c) = clean {
        if !c.same_dimensions(annotated) {
            return Err(ParseError::DimensionMismatch {
                annotated: (annotated.width(), annotated.height()),
                clean: (c.width(), c.height()),
            });
        }
    }
    let (w, h) = (annotated.width(), annotated.height());
    let n = w as usize * h as usize;
    let mut bitmaps = vec![vec![false; n]; palette.len()];
    let mut any = vec![false; palette.len()];
    let px = annotated.pixels();
    for i in 0..n {
        let rgb = [px[3 * i], px[3 * i + 1], px[3 * i + 2]];
        if let Some(c) = clean {
            let cp = &c.pixels()[3 * i..3 * i + 3];
            if cp == rgb {
                continue;
            }
        }
        if let Some(k) = nearest_palette_color(rgb, palette, tolerance) {
            bitmaps[k][i] = true;
            any[k] = true;
        }
    }
    let mut masks: Vec<ColorMask> = palette
        .iter()
        .zip(bitmaps)
        .zip(any)
        .filter(|(_, present)| *present)
        .map(|((color, bitmap), _)| {
            let component_count = label_components(w, h, &bitmap).len();
            ColorMask { color: *color, width: w, height: h, bitmap, component_count }
        })
        .collect();
    if masks.is_empty() {
        return Err(ParseError::NoSymbolsFound);
    }
    masks.sort_by_key(|m| m.color.ordinal);
    Ok(masks)
}
