//! Visvalingam–Whyatt simplification, ring by ring.
//!
//! Every distinct vertex of a closed ring is a removal candidate; its
//! effective area is the triangle it forms with its current neighbours
//! (cyclically). The smallest triangle goes first, lowest original index on
//! ties, and neighbours are re-scored after each removal. A ring never drops
//! below three distinct vertices.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{FeatureSet, GeometryError, Polygon, RegionFeature, Ring};
use crate::scalar::Scalar;

/// Area of the triangle `(prev, v, next)`.
pub fn effective_area<T: Scalar>(prev: [T; 2], v: [T; 2], next: [T; 2]) -> T {
    ((v[0] - prev[0]) * (next[1] - prev[1]) - (next[0] - prev[0]) * (v[1] - prev[1])).abs() / T::two()
}

struct Candidate<T> {
    area: T,
    index: usize,
    generation: u32,
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Candidate<T> {}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// max-heap: smaller area, then smaller index, ranks higher
impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .area
            .partial_cmp(&self.area)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Number of distinct vertices kept out of `count` for a retain fraction.
fn target_count(count: usize, retain: f64) -> usize {
    // the epsilon keeps products like 0.7 * 10 from rounding up to 8
    let wanted = (retain * count as f64 - 1e-9).ceil().max(0.0) as usize;
    wanted.max(3).min(count)
}

/// Simplifies one ring so that `ceil(retain · n)` of its `n` distinct
/// vertices remain (never fewer than three).
pub fn simplify_ring<T: Scalar>(ring: &Ring<T>, retain: f64) -> Ring<T> {
    let pts = &ring.points()[..ring.vertex_count()];
    let n = pts.len();
    let target = target_count(n, retain);
    if target >= n {
        return ring.clone();
    }

    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut alive = vec![true; n];
    let mut generation = vec![0u32; n];
    let area_at = |i: usize, prev: &[usize], next: &[usize]| effective_area(pts[prev[i]], pts[i], pts[next[i]]);

    let mut heap: BinaryHeap<Candidate<T>> =
        (0..n).map(|i| Candidate { area: area_at(i, &prev, &next), index: i, generation: 0 }).collect();
    let mut remaining = n;
    while remaining > target {
        let Some(c) = heap.pop() else { break };
        if !alive[c.index] || c.generation != generation[c.index] {
            continue;
        }
        alive[c.index] = false;
        remaining -= 1;
        let (p, q) = (prev[c.index], next[c.index]);
        next[p] = q;
        prev[q] = p;
        for j in [p, q] {
            generation[j] += 1;
            heap.push(Candidate { area: area_at(j, &prev, &next), index: j, generation: generation[j] });
        }
    }

    let mut out: Vec<[T; 2]> = pts.iter().zip(&alive).filter(|(_, &a)| a).map(|(p, _)| *p).collect();
    out.push(out[0]);
    Ring::new(out).expect("at least three vertices survive")
}

/// Simplifies every ring of every feature; bounding boxes are recomputed.
pub fn simplify<T: Scalar>(fs: &FeatureSet<T>, retain: f64) -> Result<FeatureSet<T>, GeometryError> {
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(GeometryError::InvalidRetain(retain));
    }
    let features = fs
        .features()
        .iter()
        .map(|f| {
            let polygons = f
                .polygons()
                .iter()
                .map(|p| {
                    Polygon::new(
                        simplify_ring(&p.exterior, retain),
                        p.holes.iter().map(|h| simplify_ring(h, retain)).collect(),
                    )
                })
                .collect();
            RegionFeature::new(f.region_id, f.region_name.clone(), polygons)
        })
        .collect::<Result<Vec<_>, _>>()?;
    FeatureSet::new(fs.level(), features)
}
