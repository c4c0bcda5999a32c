//! k-means++ seeding and Lloyd iterations on row-major f32 points.

use rand::Rng;

use crate::linalg::sq_dist;

pub(crate) const MAX_ITER: usize = 50;
/// Convergence threshold on centroid movement, relative to the data spread.
const REL_SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct Clustering {
    pub k: usize,
    pub centroids: Vec<f32>,
    pub assignment: Vec<usize>,
}

fn row(points: &[f32], d: usize, i: usize) -> &[f32] {
    &points[i * d..(i + 1) * d]
}

/// Draws an index with probability proportional to `weights`; `None` if all
/// weights are zero.
pub(crate) fn weighted_draw<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// k-means++ seeding. The first seed is uniform; each following seed is drawn
/// proportional to the squared distance to the nearest chosen seed. When every
/// remaining point coincides with a seed the lowest unchosen index is taken.
pub(crate) fn plus_plus_seeds<R: Rng>(points: &[f32], d: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len() / d;
    debug_assert!(k <= n);
    let mut seeds = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    seeds.push(first);
    chosen[first] = true;
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| f64::from(sq_dist(row(points, d, i), row(points, d, first))))
        .collect();
    while seeds.len() < k {
        let weights: Vec<f64> = nearest
            .iter()
            .zip(&chosen)
            .map(|(&w, &c)| if c { 0.0 } else { w })
            .collect();
        let next = weighted_draw(&weights, rng)
            .unwrap_or_else(|| chosen.iter().position(|c| !c).expect("k <= n"));
        seeds.push(next);
        chosen[next] = true;
        for (i, near) in nearest.iter_mut().enumerate() {
            let dist = f64::from(sq_dist(row(points, d, i), row(points, d, next)));
            if dist < *near {
                *near = dist;
            }
        }
    }
    seeds
}

fn nearest_centroid(x: &[f32], centroids: &[f32], d: usize, k: usize) -> usize {
    let mut best = 0;
    let mut best_dist = f32::INFINITY;
    for c in 0..k {
        let dist = sq_dist(x, &centroids[c * d..(c + 1) * d]);
        if dist < best_dist {
            best_dist = dist;
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeds, at most 50 iterations. Stops early
/// when assignments stop changing or no centroid moves by more than 1e-6 of
/// the data's RMS radius. Empty clusters keep their previous centroid.
pub(crate) fn kmeans<R: Rng>(points: &[f32], d: usize, k: usize, rng: &mut R) -> Clustering {
    let n = points.len() / d;
    assert!(k >= 1 && k <= n, "k-means needs 1 <= k <= n");
    let mut centroids = Vec::with_capacity(k * d);
    for s in plus_plus_seeds(points, d, k, rng) {
        centroids.extend_from_slice(row(points, d, s));
    }

    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(row(points, d, i)) {
            *m += f64::from(v) / n as f64;
        }
    }
    let spread: f64 = (0..n)
        .map(|i| {
            row(points, d, i)
                .iter()
                .zip(&mean)
                .map(|(&v, m)| (f64::from(v) - m).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64;
    let tol = REL_SHIFT_TOL * REL_SHIFT_TOL * spread;

    let mut assignment: Vec<usize> = (0..n)
        .map(|i| nearest_centroid(row(points, d, i), &centroids, d, k))
        .collect();
    let mut sums = vec![0f64; k * d];
    let mut counts = vec![0usize; k];
    for _ in 0..MAX_ITER {
        sums.fill(0.0);
        counts.fill(0);
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums[a * d..(a + 1) * d].iter_mut().zip(row(points, d, i)) {
                *s += f64::from(v);
            }
        }
        let mut max_shift = 0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut shift = 0f64;
            for j in 0..d {
                let updated = (sums[c * d + j] / counts[c] as f64) as f32;
                shift += f64::from(updated - centroids[c * d + j]).powi(2);
                centroids[c * d + j] = updated;
            }
            max_shift = max_shift.max(shift);
        }
        let mut changed = false;
        for (i, a) in assignment.iter_mut().enumerate() {
            let next = nearest_centroid(row(points, d, i), &centroids, d, k);
            if next != *a {
                *a = next;
                changed = true;
            }
        }
        if !changed || max_shift <= tol {
            break;
        }
    }
    Clustering {
        k,
        centroids,
        assignment,
    }
}

/// For each centroid in order, the closest point not already taken.
pub(crate) fn representatives(points: &[f32], d: usize, clustering: &Clustering) -> Vec<usize> {
    let n = points.len() / d;
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(clustering.k);
    for c in 0..clustering.k {
        let centroid = &clustering.centroids[c * d..(c + 1) * d];
        let mut best = None;
        let mut best_dist = f32::INFINITY;
        for (i, _) in taken.iter().enumerate().filter(|(_, &t)| !t) {
            let dist = sq_dist(row(points, d, i), centroid);
            if best.is_none() || dist < best_dist {
                best = Some(i);
                best_dist = dist;
            }
        }
        if let Some(i) = best {
            taken[i] = true;
            out.push(i);
        }
    }
    out
}
