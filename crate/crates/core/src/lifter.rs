//! Pinhole back-projection of pixel keypoints onto depth, and the inverse projection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::types::{DepthMap, Keypoint2, Keypoint3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("intrinsics need positive focal lengths")]
    InvalidIntrinsics,
    #[error("pixel ({u:.1}, {v:.1}) is outside the depth map")]
    OutOfBounds { u: f64, v: f64 },
    #[error("no finite depth within 15x15 of ({u:.1}, {v:.1})")]
    DepthUnavailable { u: f64, v: f64 },
    #[error("point has z = {z}, not in front of the camera")]
    BehindCamera { z: f64 },
}

impl LiftError {
    pub fn code(&self) -> &'static str {
        match self {
            LiftError::InvalidIntrinsics => "InvalidIntrinsics",
            LiftError::OutOfBounds { .. } => "OutOfBounds",
            LiftError::DepthUnavailable { .. } => "DepthUnavailable",
            LiftError::BehindCamera { .. } => "BehindCamera",
        }
    }
}

impl<T: Scalar> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self, LiftError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), LiftError> {
        if self.fx > T::zero() && self.fy > T::zero() && self.cx.is_finite() && self.cy.is_finite() {
            Ok(())
        } else {
            Err(LiftError::InvalidIntrinsics)
        }
    }

    /// Ray through pixel `(u, v)` scaled to unit z.
    pub fn ray(&self, u: T, v: T) -> (T, T) {
        ((u - self.cx) / self.fx, (v - self.cy) / self.fy)
    }
}

const MAX_WINDOW: i64 = 15;

/// Depth at the pixel nearest `(u, v)`, falling back to the median of the smallest odd window
/// (3, 5, .., 15) holding at least three finite depths.
pub fn depth_at<T: Scalar>(depth: &DepthMap<T>, u: T, v: T) -> Result<T, LiftError> {
    let (uf, vf) = (u.to_f64_lossy(), v.to_f64_lossy());
    let (pu, pv) = (uf.round(), vf.round());
    if !(pu >= 0.0 && pv >= 0.0 && pu < depth.width() as f64 && pv < depth.height() as f64) {
        return Err(LiftError::OutOfBounds { u: uf, v: vf });
    }
    let (pu, pv) = (pu as i64, pv as i64);
    if let Some(d) = depth.get(pu, pv) {
        return Ok(d);
    }
    let mut window = 3;
    while window <= MAX_WINDOW {
        let r = window / 2;
        let mut found: Vec<T> = Vec::new();
        for y in pv - r..=pv + r {
            for x in pu - r..=pu + r {
                if let Some(d) = depth.get(x, y) {
                    found.push(d);
                }
            }
        }
        if found.len() >= 3 {
            found.sort_by(|a, b| a.partial_cmp(b).expect("depths are finite"));
            let n = found.len();
            return Ok(if n % 2 == 1 { found[n / 2] } else { (found[n / 2 - 1] + found[n / 2]) / T::lit(2.0) });
        }
        window += 2;
    }
    Err(LiftError::DepthUnavailable { u: uf, v: vf })
}

pub fn backproject<T: Scalar>(kp: &Keypoint2<T>, depth: &DepthMap<T>, k: &Intrinsics<T>) -> Result<Keypoint3<T>, LiftError> {
    k.validate()?;
    let d = depth_at(depth, kp.u, kp.v)?;
    Ok(backproject_at(kp, d, k))
}

/// Back-projection with a known depth.
pub fn backproject_at<T: Scalar>(kp: &Keypoint2<T>, d: T, k: &Intrinsics<T>) -> Keypoint3<T> {
    Keypoint3::new((kp.u - k.cx) * d / k.fx, (kp.v - k.cy) * d / k.fy, d, kp.role)
}

pub fn project<T: Scalar>(p: &Keypoint3<T>, k: &Intrinsics<T>) -> Result<Keypoint2<T>, LiftError> {
    if !(p.z > T::zero()) {
        return Err(LiftError::BehindCamera { z: p.z.to_f64_lossy() });
    }
    Ok(Keypoint2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.role))
}

pub fn backproject_all<T: Scalar>(
    kps: &[Keypoint2<T>],
    depth: &DepthMap<T>,
    k: &Intrinsics<T>,
) -> Result<Vec<Keypoint3<T>>, LiftError> {
    kps.iter().map(|kp| backproject(kp, depth, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::KeypointRole;

    fn k() -> Intrinsics<f64> {
        Intrinsics::new(600.0, 600.0, 320.0, 240.0).unwrap()
    }

    #[test]
    fn principal_point_and_offset_pixel() {
        let depth = DepthMap::from_raw(1000, 480, vec![0.5; 1000 * 480]).unwrap();
        let p = backproject(&Keypoint2::new(320.0, 240.0, KeypointRole::Start), &depth, &k()).unwrap();
        assert_eq!((p.x, p.y, p.z), (0.0, 0.0, 0.5));
        let p = backproject(&Keypoint2::new(920.0, 240.0, KeypointRole::Start), &depth, &k()).unwrap();
        assert_eq!((p.x, p.y, p.z), (0.5, 0.0, 0.5));
    }

    #[test]
    fn hole_filled_by_median_of_three() {
        let mut depth = DepthMap::<f64>::holes(9, 9).unwrap();
        depth.set(3, 4, Some(0.6));
        depth.set(5, 4, Some(0.4));
        depth.set(4, 3, Some(0.5));
        assert_eq!(depth_at(&depth, 4.0, 4.0).unwrap(), 0.5);
        let empty = DepthMap::<f64>::holes(40, 40).unwrap();
        assert!(matches!(depth_at(&empty, 20.0, 20.0), Err(LiftError::DepthUnavailable { .. })));
    }

    #[test]
    fn projection_basics() {
        let on_axis = project(&Keypoint3::new(0.0, 0.0, 1.0, KeypointRole::End), &k()).unwrap();
        assert_eq!((on_axis.u, on_axis.v), (320.0, 240.0));
        assert!(matches!(project(&Keypoint3::new(0.0, 0.0, -1.0, KeypointRole::End), &k()), Err(LiftError::BehindCamera { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let k = Intrinsics::<f32>::new(600.0, 600.0, 320.0, 240.0).unwrap();
        let depth = DepthMap::<f32>::from_raw(640, 480, vec![2.0; 640 * 480]).unwrap();
        let p = backproject(&Keypoint2::new(620.0f32, 240.0, KeypointRole::Start), &depth, &k).unwrap();
        assert_eq!(p.x, 1.0);
    }
}
