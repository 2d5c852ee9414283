use super::ImageGrid;

/// `(intensity, semi-axis a, semi-axis b, center x, center y, rotation in degrees)`
/// on the square `[-1, 1]^2`, y pointing up.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Modified Shepp-Logan head phantom sampled at pixel centers, clamped to
/// `[0, 1]`, in the column-major pixel order of [`ImageGrid`].
pub fn phantom(grid: &ImageGrid) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let mut img = vec![0.0; grid.pixels()];
    for c in 0..w {
        for r in 0..h {
            let u = 2.0 * (c as f64 + 0.5) / w as f64 - 1.0;
            let v = 1.0 - 2.0 * (r as f64 + 0.5) / h as f64;
            let mut val = 0.0;
            for &(a0, ea, eb, cx, cy, deg) in &ELLIPSES {
                let (s, co) = deg.to_radians().sin_cos();
                let (du, dv) = (u - cx, v - cy);
                let xr = du * co + dv * s;
                let yr = -du * s + dv * co;
                if (xr / ea).powi(2) + (yr / eb).powi(2) <= 1.0 {
                    val += a0;
                }
            }
            img[grid.index(r, c)] = val.clamp(0.0, 1.0);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_deterministic() {
        let grid = ImageGrid::new(32, 32).unwrap();
        let p = phantom(&grid);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(p, phantom(&grid));
        // the skull ring is brighter than the brain
        assert!(p.iter().any(|&v| v > 0.9));
        assert!(p.iter().any(|&v| v > 0.1 && v < 0.4));
    }
}
