//! Shared domain vocabulary: rasters, palette colors, symbols, keypoints, poses, and plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Isometry, Quat, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("buffer length {actual} does not match {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("depth value {value} at index {index} is neither a hole nor a positive finite depth")]
    InvalidDepth { index: usize, value: f64 },
}

/// Row-major 8-bit RGB raster. Origin top-left, `u` rightward, `v` downward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, u: u32, v: u32, rgb: [u8; 3]) {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_dimensions(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

fn check_dims(width: u32, height: u32) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height });
    }
    Ok(())
}

/// Row-major depth raster in meters. Holes are `NaN`; a zero depth is never valid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: u32,
    height: u32,
    depths: Vec<T>,
}

impl<T: Scalar> DepthMap<T> {
    pub fn holes(width: u32, height: u32) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        Ok(Self { width, height, depths: vec![T::nan(); width as usize * height as usize] })
    }

    pub fn from_raw(width: u32, height: u32, depths: Vec<T>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if depths.len() != expected {
            return Err(ImageError::BufferLength { expected, actual: depths.len() });
        }
        for (index, d) in depths.iter().enumerate() {
            if !d.is_nan() && !(d.is_finite() && *d > T::zero()) {
                return Err(ImageError::InvalidDepth { index, value: d.to_f64_lossy() });
            }
        }
        Ok(Self { width, height, depths })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depths(&self) -> &[T] {
        &self.depths
    }

    /// Finite depth at a pixel, `None` for holes or out-of-range coordinates.
    pub fn get(&self, u: i64, v: i64) -> Option<T> {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 {
            return None;
        }
        let d = self.depths[v as usize * self.width as usize + u as usize];
        if d.is_nan() {
            None
        } else {
            Some(d)
        }
    }

    /// Sets a pixel; `None` marks a hole. Non-positive or non-finite values become holes.
    pub fn set(&mut self, u: u32, v: u32, depth: Option<T>) {
        let i = v as usize * self.width as usize + u as usize;
        self.depths[i] = match depth {
            Some(d) if d.is_finite() && d > T::zero() => d,
            _ => T::nan(),
        };
    }

    pub fn finite_count(&self) -> usize {
        self.depths.iter().filter(|d| !d.is_nan()).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PaletteError {
    #[error("palette is empty")]
    Empty,
    #[error("ordinal {0} appears more than once")]
    DuplicateOrdinal(u32),
    #[error("ordinals must be 1..=K without gaps, missing {0}")]
    NonContiguousOrdinals(u32),
    #[error("colors for ordinals {a} and {b} are {distance:.2} apart, within tolerance {tolerance}")]
    ColorsTooClose { a: u32, b: u32, distance: f64, tolerance: f64 },
}

/// A drawing color and the task step it denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepColor {
    pub rgb: [u8; 3],
    pub ordinal: u32,
}

impl StepColor {
    pub const fn new(rgb: [u8; 3], ordinal: u32) -> Self {
        Self { rgb, ordinal }
    }

    pub fn name(&self) -> String {
        match self.rgb {
            [0, 255, 94] => "green".into(),
            [0, 255, 247] => "blue".into(),
            [255, 106, 138] => "pink".into(),
            [r, g, b] => format!("rgb({r},{g},{b})"),
        }
    }
}

pub const GREEN: StepColor = StepColor::new([0, 255, 94], 1);
pub const BLUE: StepColor = StepColor::new([0, 255, 247], 2);
pub const PINK: StepColor = StepColor::new([255, 106, 138], 3);

/// The three step colors: green, blue, pink.
pub fn default_palette() -> Vec<StepColor> {
    vec![GREEN, BLUE, PINK]
}

/// Default palette plus yellow and violet for steps 4 and 5.
pub fn extended_palette() -> Vec<StepColor> {
    let mut p = default_palette();
    p.push(StepColor::new([255, 230, 0], 4));
    p.push(StepColor::new([160, 0, 255], 5));
    p
}

pub fn rgb_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    let d: i32 = (0..3).map(|i| (a[i] as i32 - b[i] as i32).pow(2)).sum();
    (d as f64).sqrt()
}

/// Checks ordinals are exactly `1..=K` and every color pair lies farther apart than `tolerance`.
pub fn validate_palette(palette: &[StepColor], tolerance: f64) -> Result<(), PaletteError> {
    if palette.is_empty() {
        return Err(PaletteError::Empty);
    }
    let mut ordinals: Vec<u32> = palette.iter().map(|c| c.ordinal).collect();
    ordinals.sort_unstable();
    if let Some(w) = ordinals.windows(2).find(|w| w[0] == w[1]) {
        return Err(PaletteError::DuplicateOrdinal(w[0]));
    }
    if let Some(missing) = (1..=palette.len() as u32).find(|o| ordinals.binary_search(o).is_err()) {
        return Err(PaletteError::NonContiguousOrdinals(missing));
    }
    for (i, a) in palette.iter().enumerate() {
        for b in &palette[i + 1..] {
            let distance = rgb_distance(a.rgb, b.rgb);
            if distance <= tolerance {
                let (a, b) = (a.ordinal.min(b.ordinal), a.ordinal.max(b.ordinal));
                return Err(PaletteError::ColorsTooClose { a, b, distance, tolerance });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeypointRole {
    Start,
    Waypoint,
    End,
    Center,
}

impl KeypointRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            KeypointRole::Start => "start",
            KeypointRole::Waypoint => "waypoint",
            KeypointRole::End => "end",
            KeypointRole::Center => "center",
        }
    }
}

/// A pixel-space keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint2<T> {
    pub u: T,
    pub v: T,
    pub role: KeypointRole,
}

impl<T: Scalar> Keypoint2<T> {
    pub fn new(u: T, v: T, role: KeypointRole) -> Self {
        Self { u, v, role }
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.u >= T::zero()
            && self.v >= T::zero()
            && self.u < T::lit(width as f64)
            && self.v < T::lit(height as f64)
    }

    pub fn distance(&self, o: &Self) -> T {
        ((self.u - o.u).powi(2) + (self.v - o.v).powi(2)).sqrt()
    }

    pub fn with_role(self, role: KeypointRole) -> Self {
        Self { role, ..self }
    }
}

/// A camera-frame (or world-frame, once transformed) 3D keypoint in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub role: KeypointRole,
}

impl<T: Scalar> Keypoint3<T> {
    pub fn new(x: T, y: T, z: T, role: KeypointRole) -> Self {
        Self { x, y, z, role }
    }

    pub fn from_vec(p: Vec3<T>, role: KeypointRole) -> Self {
        Self::new(p.x, p.y, p.z, role)
    }

    pub fn position(&self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// End-effector or object pose: position plus unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub position: Vec3<T>,
    pub orientation: Quat<T>,
}

impl<T: Scalar> Pose<T> {
    /// Builds a pose, renormalizing the orientation.
    pub fn new(position: Vec3<T>, orientation: Quat<T>) -> Self {
        Self { position, orientation: orientation.normalized() }
    }

    pub fn from_position(position: Vec3<T>) -> Self {
        Self { position, orientation: Quat::identity() }
    }

    pub fn isometry(&self) -> Isometry<T> {
        Isometry::new(self.orientation, self.position)
    }

    pub fn from_isometry(iso: Isometry<T>) -> Self {
        Self::new(iso.translation, iso.rotation)
    }

    pub fn is_normalized(&self) -> bool {
        (self.orientation.norm() - T::one()).abs() <= T::lit(1e-9).max(T::epsilon() * T::lit(8.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawingStyle {
    Loose,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowSymbol {
    pub color: StepColor,
    pub keypoints: Vec<Keypoint2<f64>>,
    pub style: DrawingStyle,
}

impl ArrowSymbol {
    pub fn start(&self) -> &Keypoint2<f64> {
        &self.keypoints[0]
    }

    pub fn end(&self) -> &Keypoint2<f64> {
        self.keypoints.last().expect("arrow has keypoints")
    }

    /// Checks roles, length, and distinctness of consecutive keypoints.
    pub fn is_well_formed(&self) -> bool {
        let n = self.keypoints.len();
        n >= 2
            && self.keypoints.iter().enumerate().all(|(i, k)| {
                let want = if i == 0 {
                    KeypointRole::Start
                } else if i == n - 1 {
                    KeypointRole::End
                } else {
                    KeypointRole::Waypoint
                };
                k.role == want
            })
            && self.keypoints.windows(2).all(|w| w[0].u != w[1].u || w[0].v != w[1].v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSymbol {
    pub color: StepColor,
    pub center: Keypoint2<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Symbol {
    Arrow(ArrowSymbol),
    Circle(CircleSymbol),
}

impl Symbol {
    pub fn color(&self) -> StepColor {
        match self {
            Symbol::Arrow(a) => a.color,
            Symbol::Circle(c) => c.color,
        }
    }

    pub fn keypoints(&self) -> Vec<Keypoint2<f64>> {
        match self {
            Symbol::Arrow(a) => a.keypoints.clone(),
            Symbol::Circle(c) => vec![c.center],
        }
    }
}

/// A component that was segmented but not turned into a symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedComponent {
    pub ordinal: u32,
    pub component: usize,
    /// `[u_min, v_min, u_max, v_max]`, inclusive.
    pub bbox: [u32; 4],
    pub pixel_count: usize,
    pub code: String,
    pub message: String,
}

/// Every extracted symbol, ordered by color ordinal then discovery order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolSet {
    pub symbols: Vec<Symbol>,
    #[serde(default)]
    pub rejected: Vec<RejectedComponent>,
}

impl SymbolSet {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self { symbols, rejected: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn distinct_ordinals(&self) -> Vec<u32> {
        let mut o: Vec<u32> = self.symbols.iter().map(|s| s.color().ordinal).collect();
        o.sort_unstable();
        o.dedup();
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    MoveAToB,
    Rotate,
    PickOrSelect,
}

impl Primitive {
    pub fn verb(&self) -> &'static str {
        match self {
            Primitive::MoveAToB => "move",
            Primitive::Rotate => "rotate",
            Primitive::PickOrSelect => "pick",
        }
    }
}

/// The action-type weight: translation = 1, rotation = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ActionType {
    Translation,
    Rotation,
}

impl ActionType {
    pub fn alpha<T: Scalar>(&self) -> T {
        match self {
            ActionType::Translation => T::one(),
            ActionType::Rotation => T::zero(),
        }
    }
}

impl From<ActionType> for u8 {
    fn from(a: ActionType) -> u8 {
        match a {
            ActionType::Translation => 1,
            ActionType::Rotation => 0,
        }
    }
}

impl TryFrom<u8> for ActionType {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(ActionType::Translation),
            0 => Ok(ActionType::Rotation),
            other => Err(format!("action_type must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub ordinal: u32,
    pub primitive: Primitive,
    pub symbols: Vec<Symbol>,
    pub action_type: ActionType,
    pub keypoints2d: Vec<Keypoint2<f64>>,
    #[serde(default)]
    pub rotation_center2d: Option<Keypoint2<f64>>,
}

impl StepPlan {
    pub fn start(&self) -> Option<&Keypoint2<f64>> {
        self.keypoints2d.first()
    }

    pub fn end(&self) -> Option<&Keypoint2<f64>> {
        self.keypoints2d.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    Grasp,
    MoveTo,
    RotateAbout,
    Release,
    Press,
}

/// One executable action with its keypoint arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub name: ActionName,
    #[serde(default)]
    pub keypoints: Vec<Keypoint2<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Keypoint2<f64>>,
    /// Implicit motion linking the previous step's endpoint to this step's start.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transit: bool,
}

impl ActionDescriptor {
    pub fn new(name: ActionName, keypoints: Vec<Keypoint2<f64>>) -> Self {
        Self { name, keypoints, center: None, transit: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub task_label: String,
    pub steps: Vec<StepPlan>,
    pub narration: Vec<String>,
    pub actions: Vec<Vec<ActionDescriptor>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanInvariantError {
    #[error("plan has no steps")]
    NoSteps,
    #[error("step {index} has ordinal {found}, expected {expected}")]
    OrdinalOrder { index: usize, expected: u32, found: u32 },
    #[error("narration has {narration} entries and actions {actions}, expected {steps}")]
    LengthMismatch { steps: usize, narration: usize, actions: usize },
    #[error("step {ordinal}: {reason}")]
    Step { ordinal: u32, reason: String },
}

impl StepPlan {
    pub fn validate(&self) -> Result<(), PlanInvariantError> {
        let bad = |reason: &str| PlanInvariantError::Step { ordinal: self.ordinal, reason: reason.into() };
        let arrows = self.symbols.iter().filter(|s| matches!(s, Symbol::Arrow(_))).count();
        let circles = self.symbols.len() - arrows;
        match self.primitive {
            Primitive::MoveAToB => {
                if arrows != 1 || circles != 0 {
                    return Err(bad("MoveAToB needs exactly one arrow"));
                }
                if self.action_type != ActionType::Translation {
                    return Err(bad("MoveAToB must be a translation"));
                }
                if self.keypoints2d.len() < 2 {
                    return Err(bad("MoveAToB needs at least two keypoints"));
                }
            }
            Primitive::Rotate => {
                if arrows != 1 || circles != 1 {
                    return Err(bad("Rotate needs one circle and one arrow"));
                }
                if self.action_type != ActionType::Rotation {
                    return Err(bad("Rotate must be a rotation"));
                }
                let center = self.symbols.iter().find_map(|s| match s {
                    Symbol::Circle(c) => Some(c.center),
                    _ => None,
                });
                if self.rotation_center2d.is_none() || self.rotation_center2d != center {
                    return Err(bad("Rotate center must equal the circle center"));
                }
                if self.keypoints2d.len() < 2 {
                    return Err(bad("Rotate needs at least two arrow keypoints"));
                }
            }
            Primitive::PickOrSelect => {
                if circles != 1 || arrows != 0 {
                    return Err(bad("PickOrSelect needs exactly one circle"));
                }
                if self.keypoints2d.len() != 1 {
                    return Err(bad("PickOrSelect needs exactly one grasp keypoint"));
                }
            }
        }
        if self.symbols.iter().any(|s| s.color().ordinal != self.ordinal) {
            return Err(bad("symbol color does not match step ordinal"));
        }
        Ok(())
    }
}

impl Plan {
    /// Checks ordering, per-step primitive invariants, and parallel list lengths.
    pub fn validate(&self) -> Result<(), PlanInvariantError> {
        if self.steps.is_empty() {
            return Err(PlanInvariantError::NoSteps);
        }
        for (index, step) in self.steps.iter().enumerate() {
            let expected = index as u32 + 1;
            if step.ordinal != expected {
                return Err(PlanInvariantError::OrdinalOrder { index, expected, found: step.ordinal });
            }
            step.validate()?;
        }
        if self.narration.len() != self.steps.len() || self.actions.len() != self.steps.len() {
            return Err(PlanInvariantError::LengthMismatch {
                steps: self.steps.len(),
                narration: self.narration.len(),
                actions: self.actions.len(),
            });
        }
        Ok(())
    }
}
