//! Parallel-beam projection matrix from exact ray-pixel intersection lengths.
//!
//! The image occupies `[-W/2, W/2] x [-H/2, H/2]` with unit pixels, pixel
//! row 0 at the top. Ray `k * n_detectors + i` has angle `k pi / n_angles`
//! and offset `t_i` along the detector axis, with the detectors spread
//! evenly over the image diagonal.

use super::ImageGrid;
use crate::error::{config_err, Result};
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// Segments shorter than this are treated as corner touches and dropped.
const MIN_SEGMENT: f64 = 1e-12;

/// Pixels crossed by the line `origin + a * dir` and the length inside each,
/// in the order visited. `dir` need not be normalized.
pub fn ray_pixel_lengths(grid: &ImageGrid, origin: (f64, f64), dir: (f64, f64)) -> Vec<(usize, f64)> {
    let (w, h) = (grid.width() as f64, grid.height() as f64);
    let (x0, y0) = (-w / 2.0, -h / 2.0);
    let norm = dir.0.hypot(dir.1);
    if norm == 0.0 {
        return Vec::new();
    }
    let d = (dir.0 / norm, dir.1 / norm);
    // parametric interval inside the bounding box
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, di, a, b) in [(origin.0, d.0, x0, -x0), (origin.1, d.1, y0, -y0)] {
        if di.abs() < 1e-15 {
            if o < a || o > b {
                return Vec::new();
            }
        } else {
            let (t1, t2) = ((a - o) / di, (b - o) / di);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    if hi - lo <= MIN_SEGMENT {
        return Vec::new();
    }
    let mut alphas = vec![lo, hi];
    for (o, di, start, count) in [(origin.0, d.0, x0, grid.width()), (origin.1, d.1, y0, grid.height())] {
        if di.abs() < 1e-15 {
            continue;
        }
        for k in 0..=count {
            let t = (start + k as f64 - o) / di;
            if t > lo && t < hi {
                alphas.push(t);
            }
        }
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for pair in alphas.windows(2) {
        let len = pair[1] - pair[0];
        if len <= MIN_SEGMENT {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        let (px, py) = (origin.0 + mid * d.0, origin.1 + mid * d.1);
        let c = ((px - x0).floor() as isize).clamp(0, grid.width() as isize - 1) as usize;
        let r = ((-y0 - py).floor() as isize).clamp(0, grid.height() as isize - 1) as usize;
        out.push((grid.index(r, c), len));
    }
    out
}

/// `(n_angles * n_detectors) x m` projection matrix.
pub fn siddon_matrix<T: Scalar>(grid: &ImageGrid, n_angles: usize, n_detectors: usize) -> Result<SparseMatrix<T>> {
    if n_angles == 0 || n_detectors == 0 {
        return Err(config_err("angle and detector counts must be positive"));
    }
    if grid.width() < 2 || grid.height() < 2 {
        return Err(config_err("projection needs a grid of at least 2x2"));
    }
    let diag = (grid.width() as f64).hypot(grid.height() as f64);
    let mut trip = Vec::new();
    for k in 0..n_angles {
        let theta = k as f64 * std::f64::consts::PI / n_angles as f64;
        let dir = (theta.cos(), theta.sin());
        let normal = (-theta.sin(), theta.cos());
        for i in 0..n_detectors {
            let t = -diag / 2.0 + (i as f64 + 0.5) * diag / n_detectors as f64;
            let row = k * n_detectors + i;
            for (p, len) in ray_pixel_lengths(grid, (t * normal.0, t * normal.1), dir) {
                trip.push((row, p, T::lit(len)));
            }
        }
    }
    SparseMatrix::from_triplets(n_angles * n_detectors, grid.pixels(), &trip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_ray_crosses_a_full_row() {
        let grid = ImageGrid::new(4, 3).unwrap();
        // center line of pixel row 1 is y = 1.5 - 1 - 0.5 = 0
        let hits = ray_pixel_lengths(&grid, (-10.0, 0.0), (1.0, 0.0));
        assert_eq!(hits.len(), 4);
        for (c, &(p, len)) in hits.iter().enumerate() {
            assert_eq!(p, grid.index(1, c));
            assert!((len - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_of_one_pixel() {
        let grid = ImageGrid::new(2, 2).unwrap();
        // y = x + 1 runs along the diagonal of the top-left pixel
        let hits = ray_pixel_lengths(&grid, (-1.0, 0.0), (1.0, 1.0));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, grid.index(0, 0));
        assert!((hits[0].1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rows_are_bounded_by_the_diagonal() {
        let grid = ImageGrid::new(7, 5).unwrap();
        let a = siddon_matrix::<f64>(&grid, 9, 11).unwrap();
        let diag = 74f64.sqrt();
        for s in a.row_abs_sums() {
            assert!(s <= diag + 1e-12);
        }
        assert!(a.nnz() > 0);
        assert!(siddon_matrix::<f64>(&grid, 0, 11).is_err());
    }
}
