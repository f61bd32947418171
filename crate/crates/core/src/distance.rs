//! Exact Euclidean distance transform.
//!
//! Two separable passes of the lower-envelope-of-parabolas algorithm
//! (Felzenszwalb & Huttenlocher): first along rows, then along columns.

use crate::mask::BinaryMask;

/// Squared distance from every pixel to the nearest feature pixel, row-major.
/// Returns `None` when there is no feature pixel at all.
pub fn squared_edt(features: &[bool], width: usize, height: usize) -> Option<Vec<f64>> {
    assert_eq!(features.len(), width * height);
    if !features.iter().any(|&f| f) {
        return None;
    }
    // Large but finite so that parabola intersections stay well defined.
    let inf = ((width * width + height * height) as f64 + 1.0) * 4.0;
    let mut grid: Vec<f64> = features
        .iter()
        .map(|&f| if f { 0.0 } else { inf })
        .collect();

    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for r in 0..height {
        f[..width].copy_from_slice(&grid[r * width..(r + 1) * width]);
        transform_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        grid[r * width..(r + 1) * width].copy_from_slice(&d[..width]);
    }
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        transform_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for r in 0..height {
            grid[r * width + c] = d[r];
        }
    }
    Some(grid)
}

fn transform_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            // z[0] is -inf, so this stops at k = 0
            if s > z[k] {
                break;
            }
            k -= 1;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        d[q] = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Euclidean distance from every pixel to the nearest foreground pixel of `mask`.
pub fn distance_to_foreground(mask: &BinaryMask) -> Option<Vec<f64>> {
    let feats: Vec<bool> = mask.data().iter().map(|&v| v != 0).collect();
    squared_edt(&feats, mask.width(), mask.height()).map(|g| g.into_iter().map(f64::sqrt).collect())
}

/// Foreground pixels with at least one 4-neighbour that is background or
/// outside the grid.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut out = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let (ri, ci) = (r as isize, c as isize);
            out[r * w + c] = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dr, dc)| !mask.get_signed(ri + dr, ci + dc));
        }
    }
    out
}

/// Euclidean distance from every pixel to the foreground boundary of `mask`
/// (zero on the boundary itself).
pub fn distance_to_boundary(mask: &BinaryMask) -> Option<Vec<f64>> {
    let feats = boundary_pixels(mask);
    squared_edt(&feats, mask.width(), mask.height()).map(|g| g.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(features: &[bool], w: usize, h: usize) -> Vec<f64> {
        let pts: Vec<(usize, usize)> = (0..w * h)
            .filter(|&i| features[i])
            .map(|i| (i / w, i % w))
            .collect();
        (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                pts.iter()
                    .map(|&(pr, pc)| {
                        let (dr, dc) = (pr as f64 - r as f64, pc as f64 - c as f64);
                        dr * dr + dc * dc
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let density = [0.02, 0.1, 0.5][trial % 3];
            let mut feats: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
            feats[rng.gen_range(0..w * h)] = true;
            assert_eq!(squared_edt(&feats, w, h).unwrap(), brute(&feats, w, h));
        }
    }

    #[test]
    fn empty_features() {
        assert!(squared_edt(&[false; 6], 3, 2).is_none());
    }

    #[test]
    fn boundary_of_filled_square() {
        let m = BinaryMask::from_fn(7, 7, |r, c| (1..6).contains(&r) && (1..6).contains(&c));
        let d = distance_to_boundary(&m).unwrap();
        assert_eq!(d[3 * 7 + 3], 2.0);
        assert_eq!(d[7 + 1], 0.0);
        assert_eq!(d[0], 2f64.sqrt());
    }
}
