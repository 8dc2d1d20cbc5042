//! Circle keypoints from the enclosed hole of an annular stroke.

use crate::types::{CircleSymbol, Keypoint2, KeypointRole};

use super::segment::{Component, LocalMask};
use super::ParseError;

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Background regions (4-connected) not reachable from outside the component, largest first.
fn holes(mask: &LocalMask) -> Vec<Vec<(i64, i64)>> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut outside = vec![false; mask.bits.len()];
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let mut stack = vec![(0i64, 0i64)];
    outside[0] = true;
    while let Some((x, y)) = stack.pop() {
        for (dx, dy) in N4 {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            if !mask.get(nx, ny) && !outside[idx(nx, ny)] {
                outside[idx(nx, ny)] = true;
                stack.push((nx, ny));
            }
        }
    }
    let mut seen = outside;
    let mut regions = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) || seen[idx(x, y)] {
                continue;
            }
            seen[idx(x, y)] = true;
            let mut region = Vec::new();
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                region.push((cx, cy));
                for (dx, dy) in N4 {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    if !mask.get(nx, ny) && !seen[idx(nx, ny)] {
                        seen[idx(nx, ny)] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            regions.push(region);
        }
    }
    regions.sort_by_key(|r| std::cmp::Reverse(r.len()));
    regions
}

pub(crate) fn is_annulus(comp: &Component, min_hole_fraction: f64) -> bool {
    let mask = comp.local_mask(1);
    let bbox_area = comp.bbox_width() as f64 * comp.bbox_height() as f64;
    holes(&mask).first().is_some_and(|h| h.len() as f64 >= min_hole_fraction * bbox_area)
}

/// Center = centroid of the largest enclosed hole; radius = mean distance from it to the stroke.
pub fn extract_circle_keypoints(comp: &Component) -> Result<CircleSymbol, ParseError> {
    let mask = comp.local_mask(1);
    let hole = holes(&mask).into_iter().next().ok_or(ParseError::NotAnnular)?;
    let n = hole.len() as f64;
    let (sx, sy) = hole.iter().fold((0.0, 0.0), |acc, &(x, y)| {
        let (u, v) = mask.to_image(x, y);
        (acc.0 + u as f64, acc.1 + v as f64)
    });
    let center = (sx / n, sy / n);
    let radius = comp
        .pixels
        .iter()
        .map(|&(u, v)| ((u as f64 - center.0).powi(2) + (v as f64 - center.1).powi(2)).sqrt())
        .sum::<f64>()
        / comp.len() as f64;
    Ok(CircleSymbol {
        color: comp.color,
        center: Keypoint2::new(center.0, center.1, KeypointRole::Center),
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GREEN;

    fn disk(c: (f64, f64), r: f64) -> Vec<(u32, u32)> {
        let mut px = Vec::new();
        for v in 0..200u32 {
            for u in 0..200u32 {
                if ((u as f64 - c.0).powi(2) + (v as f64 - c.1).powi(2)).sqrt() <= r {
                    px.push((u, v));
                }
            }
        }
        px
    }

    #[test]
    fn filled_disk_is_not_annular() {
        let comp = Component::new(0, GREEN, disk((60.0, 60.0), 20.0));
        assert!(!is_annulus(&comp, 0.2));
        assert_eq!(extract_circle_keypoints(&comp).unwrap_err(), ParseError::NotAnnular);
    }
}
