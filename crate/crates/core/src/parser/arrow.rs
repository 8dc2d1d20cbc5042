//! Arrow keypoints: main skeleton path, head detection by ink density, tip refinement.

use std::collections::VecDeque;

use crate::types::{ArrowSymbol, DrawingStyle, Keypoint2, KeypointRole, StepColor};

use super::segment::{Component, LocalMask, N8};
use super::skeleton::{distance_transform, skeletonize, Skeleton};
use super::{style_or, ParseError, ParserConfig};

/// Geometry recovered from one arrow component, oriented tail to tip.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArrowAnalysis {
    pub polyline: Vec<(f64, f64)>,
    pub length: f64,
    pub stroke_width: f64,
    pub density_ratio: f64,
    pub style: DrawingStyle,
}

impl ArrowAnalysis {
    pub fn into_symbol(self, color: StepColor, max_waypoints: usize) -> ArrowSymbol {
        let keypoints = sample_keypoints(&self.polyline, max_waypoints);
        ArrowSymbol { color, keypoints, style: self.style }
    }
}

/// Recovers ordered arrow keypoints: tail `p_0`, arc-length-uniform waypoints, head tip `p_n`.
pub fn extract_arrow_keypoints(
    component: &Component,
    style_hint: Option<DrawingStyle>,
    cfg: &ParserConfig,
) -> Result<ArrowSymbol, ParseError> {
    let a = analyze(component, style_hint, cfg)?;
    Ok(a.into_symbol(component.color, cfg.max_waypoints))
}

struct Graph<'a> {
    skel: &'a Skeleton,
    alive: Vec<bool>,
}

impl Graph<'_> {
    fn degree(&self, i: usize) -> usize {
        self.skel.adjacency[i].iter().filter(|&&j| self.alive[j]).count()
    }

    fn endpoints(&self) -> Vec<usize> {
        (0..self.skel.len()).filter(|&i| self.alive[i] && self.degree(i) == 1).collect()
    }

    /// Removes leaf branches shorter than `max_len` that end in a junction.
    fn prune_spurs(&mut self, max_len: f64) {
        let mut doomed = Vec::new();
        for e in self.endpoints() {
            let mut branch = vec![e];
            let mut length = 0.0;
            let (mut prev, mut cur) = (usize::MAX, e);
            loop {
                let next: Vec<usize> =
                    self.skel.adjacency[cur].iter().copied().filter(|&j| self.alive[j] && j != prev).collect();
                if next.len() != 1 {
                    break;
                }
                let n = next[0];
                length += self.skel.edge_length(cur, n);
                if self.degree(n) >= 3 {
                    if length < max_len {
                        doomed.extend(branch.iter().copied());
                    }
                    break;
                }
                if self.degree(n) == 1 || length >= max_len {
                    break;
                }
                branch.push(n);
                prev = cur;
                cur = n;
            }
        }
        for i in doomed {
            self.alive[i] = false;
        }
    }
}

fn arc_lengths(pts: &[(f64, f64)]) -> Vec<f64> {
    let mut s = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    s.push(0.0);
    for w in pts.windows(2) {
        acc += ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        s.push(acc);
    }
    s
}

fn point_at(pts: &[(f64, f64)], s: &[f64], t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return pts[0];
    }
    let last = *s.last().unwrap();
    if t >= last {
        return *pts.last().unwrap();
    }
    let k = s.partition_point(|&x| x <= t).max(1) - 1;
    let seg = s[k + 1] - s[k];
    if seg <= 0.0 {
        return pts[k];
    }
    let f = (t - s[k]) / seg;
    (pts[k].0 + f * (pts[k + 1].0 - pts[k].0), pts[k].1 + f * (pts[k + 1].1 - pts[k].1))
}

fn unit(v: (f64, f64)) -> Option<(f64, f64)> {
    let n = (v.0 * v.0 + v.1 * v.1).sqrt();
    (n > 1e-9).then(|| (v.0 / n, v.1 / n))
}

/// Extreme component pixel along `dir` near `from`, within a 60° forward cone.
fn extreme_along(comp: &Component, from: (f64, f64), dir: (f64, f64), radius: f64) -> Option<((f64, f64), f64)> {
    let cos_cone = 0.5;
    let mut best: Option<((f64, f64), f64, f64)> = None;
    for &(u, v) in &comp.pixels {
        let d = (u as f64 - from.0, v as f64 - from.1);
        let r = (d.0 * d.0 + d.1 * d.1).sqrt();
        if r > radius {
            continue;
        }
        let proj = d.0 * dir.0 + d.1 * dir.1;
        if r > 0.0 && proj < cos_cone * r {
            continue;
        }
        let lateral = (d.0 * dir.1 - d.1 * dir.0).abs();
        let better = match best {
            None => true,
            Some((_, bp, bl)) => proj > bp + 1e-9 || ((proj - bp).abs() <= 1e-9 && lateral < bl),
        };
        if better {
            best = Some(((u as f64, v as f64), proj, lateral));
        }
    }
    best.map(|(p, proj, _)| (p, proj))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Multi-source geodesic BFS over the component: each pixel gets the index of the path node
/// it is reached from first.
fn assign_to_path(mask: &LocalMask, sources: &[(u32, u32)]) -> Vec<(i64, i64, usize)> {
    let w = mask.width as i64;
    let mut owner = vec![usize::MAX; mask.bits.len()];
    let mut queue = VecDeque::new();
    for (k, &(u, v)) in sources.iter().enumerate() {
        let (x, y) = mask.to_local(u, v);
        let i = (y * w + x) as usize;
        if owner[i] == usize::MAX {
            owner[i] = k;
            queue.push_back((x, y));
        }
    }
    let mut out = Vec::new();
    while let Some((x, y)) = queue.pop_front() {
        let k = owner[(y * w + x) as usize];
        out.push((x, y, k));
        for (dx, dy) in N8 {
            let (nx, ny) = (x + dx, y + dy);
            if mask.get(nx, ny) && owner[(ny * w + nx) as usize] == usize::MAX {
                owner[(ny * w + nx) as usize] = k;
                queue.push_back((nx, ny));
            }
        }
    }
    out
}

pub(crate) fn analyze(
    comp: &Component,
    style_hint: Option<DrawingStyle>,
    cfg: &ParserConfig,
) -> Result<ArrowAnalysis, ParseError> {
    let skel = skeletonize(comp);
    if skel.len() < 2 {
        return Err(ParseError::DegenerateArrow { length: 0.0 });
    }
    let mask = comp.local_mask(1);
    let dt = distance_transform(&mask);
    let dt_at = |(u, v): (u32, u32)| {
        let (x, y) = mask.to_local(u, v);
        dt[y as usize * mask.width as usize + x as usize]
    };
    let coarse_width = (2.0 * median(skel.points.iter().map(|&p| dt_at(p)).collect()) - 1.0).max(1.0);

    let mut g = Graph { skel: &skel, alive: vec![true; skel.len()] };
    for _ in 0..2 {
        g.prune_spurs((2.0 * coarse_width).max(3.0));
    }
    let ends = g.endpoints();
    if ends.len() < 2 {
        return Err(ParseError::NotAnArrow("skeleton has no open path".into()));
    }

    // tree diameter between endpoints
    let (d0, _) = skel.dijkstra(ends[0], &g.alive);
    let a = *ends.iter().max_by(|&&x, &&y| d0[x].partial_cmp(&d0[y]).unwrap().then(y.cmp(&x))).unwrap();
    let (da, prev) = skel.dijkstra(a, &g.alive);
    let b = *ends
        .iter()
        .filter(|&&e| da[e].is_finite())
        .max_by(|&&x, &&y| da[x].partial_cmp(&da[y]).unwrap().then(y.cmp(&x)))
        .unwrap();
    let mut path = vec![b];
    while let Some(p) = prev[*path.last().unwrap()] {
        path.push(p);
    }
    path.reverse();
    let total = da[b];
    if total < cfg.min_path_length {
        return Err(ParseError::DegenerateArrow { length: total });
    }
    let mut s = vec![0.0; path.len()];
    for k in 1..path.len() {
        s[k] = s[k - 1] + skel.edge_length(path[k - 1], path[k]);
    }

    let owned = assign_to_path(&mask, &path.iter().map(|&n| skel.points[n]).collect::<Vec<_>>());
    // the thinner of two windows away from the ends is pure shaft
    let window = |lo: f64, hi: f64| owned.iter().filter(|o| s[o.2] >= lo * total && s[o.2] < hi * total).count();
    let mid = window(0.15, 0.45).min(window(0.55, 0.85));
    let width = (mid as f64 / (0.3 * total).max(1.0)).max(1.0);
    let zone = 6.0 * width;

    // side branches leaving the shaft mean this is not a single stroke
    let on_path: std::collections::HashSet<usize> = path.iter().copied().collect();
    let mut branch_owner = vec![usize::MAX; skel.len()];
    let mut queue = VecDeque::new();
    for (k, &n) in path.iter().enumerate() {
        branch_owner[n] = k;
        queue.push_back(n);
    }
    while let Some(i) = queue.pop_front() {
        for &j in &skel.adjacency[i] {
            if g.alive[j] && branch_owner[j] == usize::MAX {
                branch_owner[j] = branch_owner[i];
                queue.push_back(j);
            }
        }
    }
    let interior_branch = (0..skel.len())
        .filter(|&i| g.alive[i] && !on_path.contains(&i) && branch_owner[i] != usize::MAX)
        .filter(|&i| {
            let at = s[branch_owner[i]];
            at > zone + 2.0 * width && at < total - zone - 2.0 * width
        })
        .count();
    if interior_branch as f64 > 2.0 * width {
        return Err(ParseError::NotAnArrow("skeleton has branches along the shaft".into()));
    }

    // the head end carries the extra ink of the triangle or barbs
    let mass_first = owned.iter().filter(|o| s[o.2] <= zone).count() as f64;
    let mass_last = owned.iter().filter(|o| total - s[o.2] <= zone).count() as f64;
    let ratio = mass_first.max(mass_last) / mass_first.min(mass_last).max(1.0);
    if ratio < cfg.head_density_ratio {
        return Err(ParseError::AmbiguousHead { ratio });
    }
    let pt = |n: usize| (skel.points[n].0 as f64, skel.points[n].1 as f64);
    let mut nodes: Vec<(f64, f64)> = path.iter().map(|&n| pt(n)).collect();
    let mut arc = s.clone();
    if mass_first > mass_last {
        nodes.reverse();
        arc = arc.iter().rev().map(|x| total - x).collect();
    }
    // drop the head region: its skeleton follows barbs or a spike, not the shaft
    let cut = (0..nodes.len()).rev().find(|&k| arc[k] <= total - zone).unwrap_or(0).max(1);
    nodes.truncate(cut + 1);

    // moving average; ends pinned
    let half = ((width / 2.0).round() as usize).max(1);
    let smooth: Vec<(f64, f64)> = (0..nodes.len())
        .map(|k| {
            if k == 0 || k == nodes.len() - 1 {
                return nodes[k];
            }
            let lo = k.saturating_sub(half).max(1);
            let hi = (k + half).min(nodes.len() - 2);
            let n = (hi - lo + 1) as f64;
            let (sx, sy) = nodes[lo..=hi].iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
            (sx / n, sy / n)
        })
        .collect();
    let ss = arc_lengths(&smooth);
    let slen = *ss.last().unwrap();
    let probe = (3.0 * width).min(slen / 2.0);
    let head_end = *smooth.last().unwrap();
    let tail_end = smooth[0];
    let back = point_at(&smooth, &ss, slen - probe);
    let head_dir = unit((head_end.0 - back.0, head_end.1 - back.1)).ok_or(ParseError::DegenerateArrow { length: slen })?;
    let fwd = point_at(&smooth, &ss, probe);
    let tail_dir = unit((tail_end.0 - fwd.0, tail_end.1 - fwd.1)).ok_or(ParseError::DegenerateArrow { length: slen })?;

    let (tip_px, advance) = extreme_along(comp, head_end, head_dir, zone + 2.0 * width).unwrap_or((head_end, 0.0));
    // a triangle reaches a full head length past the shaft, barbs only the cap
    let detected = if advance > zone - 2.5 * width { DrawingStyle::Geometric } else { DrawingStyle::Loose };
    let style = style_or(style_hint, detected);
    let cap = width / 2.0;
    let tip = if detected == DrawingStyle::Loose && advance > cap {
        (tip_px.0 - head_dir.0 * cap, tip_px.1 - head_dir.1 * cap)
    } else {
        tip_px
    };
    let tail = match extreme_along(comp, tail_end, tail_dir, 3.0 * width) {
        Some((p, proj)) if proj > cap => (p.0 - tail_dir.0 * cap, p.1 - tail_dir.1 * cap),
        _ => tail_end,
    };

    let mut polyline = vec![tail];
    polyline.extend_from_slice(&smooth[1..smooth.len() - 1]);
    polyline.push(head_end);
    polyline.push(tip);
    polyline.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    let length = *arc_lengths(&polyline).last().unwrap();
    if length < cfg.min_path_length {
        return Err(ParseError::DegenerateArrow { length });
    }
    Ok(ArrowAnalysis { polyline, length, stroke_width: width, density_ratio: ratio, style })
}

/// Tail, up to `max_waypoints` arc-length-uniform interior points, and tip.
fn sample_keypoints(polyline: &[(f64, f64)], max_waypoints: usize) -> Vec<Keypoint2<f64>> {
    let s = arc_lengths(polyline);
    let len = *s.last().unwrap();
    // keep at least 2 px between samples
    let fit = ((len / 2.0).floor() as usize).saturating_sub(1);
    let k = max_waypoints.min(fit);
    let mut out = vec![Keypoint2::new(polyline[0].0, polyline[0].1, KeypointRole::Start)];
    for j in 1..=k {
        let p = point_at(polyline, &s, len * j as f64 / (k + 1) as f64);
        out.push(Keypoint2::new(p.0, p.1, KeypointRole::Waypoint));
    }
    let end = polyline.last().unwrap();
    out.push(Keypoint2::new(end.0, end.1, KeypointRole::End));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GREEN;

    fn capsule(a: (f64, f64), b: (f64, f64), w: f64) -> Vec<(u32, u32)> {
        let mut px = Vec::new();
        for v in 0..300u32 {
            for u in 0..300u32 {
                let p = (u as f64, v as f64);
                let d = (b.0 - a.0, b.1 - a.1);
                let t = (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / (d.0 * d.0 + d.1 * d.1)).clamp(0.0, 1.0);
                let q = (a.0 + t * d.0, a.1 + t * d.1);
                if ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() <= w / 2.0 {
                    px.push((u, v));
                }
            }
        }
        px
    }

    #[test]
    fn bare_segment_is_ambiguous() {
        let comp = Component::new(0, GREEN, capsule((40.0, 100.0), (200.0, 100.0), 5.0));
        let err = extract_arrow_keypoints(&comp, None, &ParserConfig::default()).unwrap_err();
        assert!(matches!(err, ParseError::AmbiguousHead { .. }), "{err:?}");
    }

    #[test]
    fn waypoint_sampling_is_uniform_and_bounded() {
        let line = vec![(0.0, 0.0), (90.0, 0.0)];
        let kps = sample_keypoints(&line, 8);
        assert_eq!(kps.len(), 10);
        for (j, k) in kps.iter().enumerate() {
            assert!((k.u - 10.0 * j as f64).abs() < 1e-9);
        }
        let short = sample_keypoints(&[(0.0, 0.0), (5.0, 0.0)], 8);
        assert_eq!(short.len(), 3);
    }
}
