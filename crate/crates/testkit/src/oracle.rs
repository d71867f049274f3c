//! Independent reference computations.

/// Least-squares line by solving the raw 2×2 normal equations
/// `[n Σx; Σx Σx²]·[b; m] = [Σy; Σxy]` with Cramer's rule. Returns
/// `(slope, intercept)`.
pub fn normal_equations_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    (slope, intercept)
}

/// Area of the triangle `abc`.
pub fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs() / 2.0
}

/// Quadratic-time Visvalingam–Whyatt on a closed ring: recompute every
/// remaining vertex's cyclic triangle area, drop the smallest (lowest index on
/// ties) until `keep` distinct vertices remain. Returns the closed ring,
/// starting at the lowest surviving index.
pub fn visvalingam_bruteforce(ring: &[(f64, f64)], keep: usize) -> Vec<(f64, f64)> {
    let distinct = &ring[..ring.len() - 1];
    let mut alive: Vec<usize> = (0..distinct.len()).collect();
    while alive.len() > keep.max(3) {
        let m = alive.len();
        let mut best: Option<(f64, usize)> = None;
        for k in 0..m {
            let prev = distinct[alive[(k + m - 1) % m]];
            let cur = distinct[alive[k]];
            let next = distinct[alive[(k + 1) % m]];
            let area = triangle_area(prev, cur, next);
            if best.is_none_or(|(a, _)| area < a) {
                best = Some((area, k));
            }
        }
        alive.remove(best.unwrap().1);
    }
    let mut out: Vec<(f64, f64)> = alive.iter().map(|&i| distinct[i]).collect();
    out.push(out[0]);
    out
}

/// Median by full sort; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
