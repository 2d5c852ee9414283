use super::ImageGrid;
use crate::error::{config_err, Result};
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// Forward differences with zero rows on the far boundary, `2m x m`.
///
/// Pixels are column-major, `p = c * height + r`. Rows `0..m` are
/// horizontal differences `x[r, c+1] - x[r, c]` stored at row `c * height + r`;
/// rows `m..2m` are vertical differences `x[r+1, c] - x[r, c]` stored at row
/// `m + r * width + c`. Differences that would leave the image are all-zero rows.
pub fn grad2d<T: Scalar>(grid: &ImageGrid) -> Result<SparseMatrix<T>> {
    let (w, h) = (grid.width(), grid.height());
    if w < 2 || h < 2 {
        return Err(config_err(format!("finite differences need a grid of at least 2x2, got {w}x{h}")));
    }
    let m = grid.pixels();
    let mut trip = Vec::with_capacity(4 * m);
    for c in 0..w {
        for r in 0..h {
            let p = grid.index(r, c);
            if c + 1 < w {
                let row = c * h + r;
                trip.push((row, grid.index(r, c + 1), T::one()));
                trip.push((row, p, -T::one()));
            }
            if r + 1 < h {
                let row = m + r * w + c;
                trip.push((row, grid.index(r + 1, c), T::one()));
                trip.push((row, p, -T::one()));
            }
        }
    }
    SparseMatrix::from_triplets(2 * m, m, &trip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_convention() {
        let g = grad2d::<f64>(&ImageGrid::new(2, 2).unwrap()).unwrap();
        let d = g.matvec(&[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_image_has_no_variation() {
        let grid = ImageGrid::new(5, 3).unwrap();
        let g = grad2d::<f64>(&grid).unwrap();
        assert!(g.matvec(&[0.7; 15]).unwrap().iter().all(|&v| v == 0.0));
        assert!(grad2d::<f64>(&ImageGrid::new(1, 4).unwrap()).is_err());
    }
}
