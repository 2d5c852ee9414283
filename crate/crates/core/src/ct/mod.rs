//! Total-variation regularized CT reconstruction
//!
//! ```text
//! min_x lambda ||grad x||_1 + 1/2 ||A x - b||^2
//! ```
//!
//! solved with the primal-dual iteration over `z = (x, s, t)`, where `s` is
//! dual to the finite differences and `t` to the projections. Blocks bundle
//! one image column with the dual entries attached to it.

mod grad;
mod phantom;
mod siddon;

pub use grad::grad2d;
pub use phantom::phantom;
pub use siddon::{ray_pixel_lengths, siddon_matrix};

use rand::Rng;

use crate::error::{check_len, config_err, Result};
use crate::io::GrayImage;
use crate::linalg::{norm1, norm2, norm2_sq, standard_normal};
use crate::primal_dual::{
    build_simplified, LinfBallProx, QuadraticConjugateProx, SimplifiedPd, StackedLayout, StackedProx, Steps,
};
use crate::selection::stream_rng;
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// Pixel grid with column-major indexing `p = c * height + r`, so every image
/// column is a contiguous slice of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(config_err("image dimensions must be positive"));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        col * self.height + row
    }

    /// Row-major image with values clamped to `[0, 1]`.
    pub fn to_gray<T: Scalar>(&self, x: &[T]) -> Result<GrayImage> {
        check_len(self.pixels(), x.len())?;
        let mut pixels = Vec::with_capacity(self.pixels());
        for r in 0..self.height {
            for c in 0..self.width {
                pixels.push(x[self.index(r, c)].as_f64().clamp(0.0, 1.0));
            }
        }
        Ok(GrayImage { width: self.width, height: self.height, pixels })
    }

    pub fn from_gray<T: Scalar>(img: &GrayImage) -> Result<(Self, Vec<T>)> {
        let grid = Self::new(img.width, img.height)?;
        check_len(grid.pixels(), img.pixels.len())?;
        let mut x = vec![T::zero(); grid.pixels()];
        for r in 0..grid.height {
            for c in 0..grid.width {
                x[grid.index(r, c)] = T::lit(img.pixels[r * grid.width + c]);
            }
        }
        Ok((grid, x))
    }
}

/// Stacked layout for `z = (x, s, t)` with one bundle per image column.
///
/// Bundle `j` holds column `j` of `x`, the difference rows whose left or top
/// pixel lies in column `j`, and the `j`-th of `width` contiguous, nearly
/// equal chunks of the `n_radon` projection duals.
pub fn bundle_blocks(grid: &ImageGrid, n_radon: usize) -> Result<StackedLayout> {
    let (w, h, m) = (grid.width, grid.height, grid.pixels());
    let n1 = 2 * m;
    let primal = m;
    let bundles: Vec<Vec<usize>> = (0..w)
        .map(|j| {
            let mut b: Vec<usize> = (j * h..(j + 1) * h).collect();
            b.extend((0..h).map(|r| primal + j * h + r));
            b.extend((0..h).map(|r| primal + m + r * w + j));
            b.extend((j * n_radon / w..(j + 1) * n_radon / w).map(|i| primal + n1 + i));
            b
        })
        .collect();
    StackedLayout::permuted(primal, n1 + n_radon, &bundles)
}

#[derive(Debug, Clone)]
pub struct CtInstance<T> {
    pub grid: ImageGrid,
    /// `2m x m` finite differences.
    pub grad: SparseMatrix<T>,
    /// `n_2 x m` projections.
    pub radon: SparseMatrix<T>,
    pub b: Vec<T>,
    pub lambda: T,
    pub eta: T,
    pub gamma: T,
}

impl<T: Scalar> CtInstance<T> {
    pub fn new(grid: ImageGrid, radon: SparseMatrix<T>, b: Vec<T>, lambda: T, eta: T, gamma: T) -> Result<Self> {
        let grad = grad2d(&grid)?;
        check_len(grid.pixels(), radon.ncols())?;
        check_len(radon.nrows(), b.len())?;
        if !(lambda >= T::zero()) {
            return Err(config_err("lambda must be nonnegative"));
        }
        if !(eta > T::zero() && gamma > T::zero()) {
            return Err(config_err("step sizes must be positive"));
        }
        Ok(Self { grid, grad, radon, b, lambda, eta, gamma })
    }

    pub fn with_steps(&self, eta: T, gamma: T) -> Result<Self> {
        Self::new(self.grid, self.radon.clone(), self.b.clone(), self.lambda, eta, gamma)
    }

    /// `[grad; A]`.
    pub fn stacked_matrix(&self) -> SparseMatrix<T> {
        self.grad.vstack(&self.radon).expect("both blocks have m columns")
    }

    pub fn objective(&self, x: &[T]) -> T {
        objective_ct(self, x)
    }
}

/// The operator over `z = (x, s, t)` stored bundle by bundle.
pub fn build_ct_operator<T: Scalar>(inst: &CtInstance<T>) -> Result<SimplifiedPd<T>> {
    let n1 = inst.grad.nrows();
    let prox = StackedProx::new(
        n1,
        Box::new(LinfBallProx::new(inst.lambda)?),
        Box::new(QuadraticConjugateProx::new(inst.gamma, inst.b.clone())?),
    );
    build_simplified(
        inst.stacked_matrix(),
        Box::new(prox),
        Steps::Uniform(inst.eta),
        Steps::Uniform(inst.gamma),
        bundle_blocks(&inst.grid, inst.radon.nrows())?,
    )
}

/// `lambda ||grad x||_1 + 1/2 ||A x - b||^2`.
pub fn objective_ct<T: Scalar>(inst: &CtInstance<T>, x: &[T]) -> T {
    let gx = inst.grad.matvec(x).expect("x has one entry per pixel");
    let mut r = inst.radon.matvec(x).expect("x has one entry per pixel");
    for (ri, &bi) in r.iter_mut().zip(&inst.b) {
        *ri -= bi;
    }
    inst.lambda * norm1(&gx) + norm2_sq(&r) / T::lit(2.0)
}

/// Projections of `image` plus Gaussian noise scaled to
/// `||noise|| = noise_rel * ||A image||`.
pub fn noisy_projections<T: Scalar>(radon: &SparseMatrix<T>, image: &[T], noise_rel: f64, seed: u64) -> Result<Vec<T>> {
    let clean = radon.matvec(image)?;
    if noise_rel == 0.0 {
        return Ok(clean);
    }
    if noise_rel < 0.0 {
        return Err(config_err("noise level must be nonnegative"));
    }
    let mut rng = stream_rng(seed, 0);
    let noise: Vec<T> = (0..clean.len()).map(|_| standard_normal(&mut rng)).collect();
    let scale = T::lit(noise_rel) * norm2(&clean) / norm2(&noise).max(T::min_positive_value());
    Ok(clean.iter().zip(&noise).map(|(&c, &e)| c + scale * e).collect())
}

/// Phantom, projection matrix and noisy data for a `size x size` grid.
#[allow(clippy::too_many_arguments)]
pub fn gen_ct_instance<T: Scalar>(
    grid: ImageGrid,
    n_angles: usize,
    n_detectors: usize,
    noise_rel: f64,
    lambda: T,
    eta: T,
    gamma: T,
    seed: u64,
) -> Result<(CtInstance<T>, Vec<T>)> {
    let radon = siddon_matrix(&grid, n_angles, n_detectors)?;
    let truth: Vec<T> = phantom(&grid).into_iter().map(T::lit).collect();
    let b = noisy_projections(&radon, &truth, noise_rel, seed)?;
    Ok((CtInstance::new(grid, radon, b, lambda, eta, gamma)?, truth))
}

/// Random image with i.i.d. uniform pixels, for tests and probes.
pub fn random_image<T: Scalar, R: Rng + ?Sized>(rng: &mut R, grid: &ImageGrid) -> Vec<T> {
    (0..grid.pixels()).map(|_| T::lit(rng.random::<f64>())).collect()
}
