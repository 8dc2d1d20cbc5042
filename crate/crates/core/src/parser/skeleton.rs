//! Topology-preserving thinning and the skeleton graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::segment::{Component, LocalMask};

/// A 1-pixel-wide skeleton with reduced 8-neighborhood adjacency.
///
/// A diagonal link is dropped whenever both pixels share a 4-neighbor in the skeleton,
/// so junction degrees reflect branch counts rather than pixel corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    /// `(u, v)` in raster order.
    pub points: Vec<(u32, u32)>,
    pub adjacency: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn from_points(mut points: Vec<(u32, u32)>) -> Self {
        points.sort_unstable_by_key(|&(u, v)| (v, u));
        points.dedup();
        let index = |p: (i64, i64)| -> Option<usize> {
            if p.0 < 0 || p.1 < 0 {
                return None;
            }
            let key = (p.1 as u32, p.0 as u32);
            points.binary_search_by_key(&key, |&(u, v)| (v, u)).ok()
        };
        let mut adjacency = vec![Vec::new(); points.len()];
        for (i, &(u, v)) in points.iter().enumerate() {
            let (x, y) = (u as i64, v as i64);
            for (dx, dy) in super::segment::N8 {
                let Some(j) = index((x + dx, y + dy)) else { continue };
                if dx != 0 && dy != 0 && (index((x + dx, y)).is_some() || index((x, y + dy)).is_some()) {
                    continue;
                }
                adjacency[i].push(j);
            }
        }
        Self { points, adjacency }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn endpoints(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.degree(i) == 1).collect()
    }

    pub fn junctions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.degree(i) >= 3).collect()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.points[a], self.points[b]);
        if pa.0 != pb.0 && pa.1 != pb.1 {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    /// Single-source shortest path lengths and predecessors restricted to `alive` nodes.
    pub fn dijkstra(&self, source: usize, alive: &[bool]) -> (Vec<f64>, Vec<Option<usize>>) {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then_with(|| o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut prev = vec![None; self.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &j in &self.adjacency[i] {
                if !alive[j] {
                    continue;
                }
                let nd = d + self.edge_length(i, j);
                if nd < dist[j] {
                    dist[j] = nd;
                    prev[j] = Some(i);
                    heap.push(Item(nd, j));
                }
            }
        }
        (dist, prev)
    }
}

// Neighbors ordered counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
const RING: [(i64, i64); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

fn ring(mask: &LocalMask, x: i64, y: i64) -> [bool; 8] {
    let mut r = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        r[k] = mask.get(x + dx, y + dy);
    }
    r
}

/// Yokoi connectivity number for 8-connected foreground.
fn connectivity_number(r: &[bool; 8]) -> u32 {
    let c = |k: usize| u32::from(!r[k % 8]);
    [0usize, 2, 4, 6].iter().map(|&k| c(k) - c(k) * c(k + 1) * c(k + 2)).sum()
}

/// Thins a component to a 1-pixel-wide, 8-connected skeleton.
///
/// Border pixels are peeled in four directional sub-passes; each removal is re-checked against
/// the current mask so that only simple, non-end pixels are deleted. The result is a fixed point,
/// so thinning a skeleton returns it unchanged.
pub fn skeletonize(component: &Component) -> Skeleton {
    let mut mask = component.local_mask(1);
    thin_in_place(&mut mask);
    let mut points = Vec::with_capacity(mask.count());
    for y in 0..mask.height as i64 {
        for x in 0..mask.width as i64 {
            if mask.get(x, y) {
                points.push(mask.to_image(x, y));
            }
        }
    }
    Skeleton::from_points(points)
}

pub(crate) fn thin_in_place(mask: &mut LocalMask) {
    // N, S, E, W
    const DIRS: [(i64, i64); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];
    loop {
        let mut changed = false;
        for (dx, dy) in DIRS {
            let mut candidates = Vec::new();
            for y in 0..mask.height as i64 {
                for x in 0..mask.width as i64 {
                    if mask.get(x, y) && !mask.get(x + dx, y + dy) {
                        candidates.push((x, y));
                    }
                }
            }
            for (x, y) in candidates {
                let r = ring(mask, x, y);
                let neighbors = r.iter().filter(|b| **b).count();
                if neighbors >= 2 && connectivity_number(&r) == 1 {
                    mask.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Exact Euclidean distance from each mask pixel to the nearest background pixel center.
pub fn distance_transform(mask: &LocalMask) -> Vec<f64> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let inf = 1e20;
    let mut g = vec![0.0f64; w * h];
    for (i, b) in mask.bits.iter().enumerate() {
        g[i] = if *b { inf } else { 0.0 };
    }
    let mut buf = vec![0.0; w.max(h)];
    for x in 0..w {
        let col: Vec<f64> = (0..h).map(|y| g[y * w + x]).collect();
        squared_edt_1d(&col, &mut buf[..h]);
        for y in 0..h {
            g[y * w + x] = buf[y];
        }
    }
    for y in 0..h {
        let row: Vec<f64> = g[y * w..(y + 1) * w].to_vec();
        squared_edt_1d(&row, &mut buf[..w]);
        g[y * w..(y + 1) * w].copy_from_slice(&buf[..w]);
    }
    g.into_iter().map(f64::sqrt).collect()
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn squared_edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}
