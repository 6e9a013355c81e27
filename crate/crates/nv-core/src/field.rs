//! Square periodic grids and complex sampled fields.
//!
//! The plane is treated as complex: a point (x1, x2) is the number x1 + i x2,
//! and frequency samples are zeta = xi1 + i xi2. All arrays are row-major with
//! index (i, j) mapping to x = (-L + i h) + i (-L + j h) sqrt(-1).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    n: usize,
}

impl Grid {
    /// `n` must be a power of two (>= 16) so spectral steps stay exact
    /// and fast; `half_width` is the L of the domain [-L, L)^2.
    pub fn new(half_width: f64, n: usize) -> Result<Grid> {
        if !(half_width > 0.0) {
            return Err(Error::config(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        Ok(Grid { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Coordinate along one axis: -L + i h.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coord(i), self.coord(j))
    }

    /// FFT frequency for index i, in standard order: the signed index times
    /// pi/L, covering (pi/L) * {-n/2, ..., n/2 - 1}.
    pub fn freq(&self, i: usize) -> f64 {
        let signed = if i < self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        };
        signed * std::f64::consts::PI / self.half_width
    }

    pub fn zeta(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.freq(i), self.freq(j))
    }

    pub fn zeta_lattice(&self) -> Array2<Complex64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| self.zeta(i, j))
    }

    /// Grid of the same spacing covering [-2L, 2L)^2; used for zero-padded
    /// convolutions and for reconstruction halos.
    pub fn doubled(&self) -> Grid {
        Grid {
            half_width: 2.0 * self.half_width,
            n: 2 * self.n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Grid,
    pub values: Array2<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field {
            grid,
            values: Array2::zeros((grid.n(), grid.n())),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid,
            values: Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| f(grid.point(i, j))),
        }
    }

    pub fn from_values(grid: Grid, values: Array2<Complex64>) -> Field {
        assert_eq!(values.dim(), (grid.n(), grid.n()));
        Field { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Field {
        Field {
            grid,
            values: Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
                Complex64::new(f(grid.coord(i), grid.coord(j)), 0.0)
            }),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Largest |a - b| over the grid; the two fields must share a grid.
    pub fn sup_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Drop imaginary parts in place.
    pub fn realify(&mut self) {
        self.values.mapv_inplace(|v| Complex64::new(v.re, 0.0));
    }

    pub fn scaled(&self, s: Complex64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.mapv(|v| v * s),
        }
    }
}

/// The unimodular pairing factor exp(i sign 2 Re(k x)) sampled over the grid.
/// With sign = +1 this is e_k(x); with sign = -1 it is e_{-x}(k) read as a
/// function of the grid variable (the pairing kx + conj(kx) is symmetric).
pub fn pairing_factor(grid: Grid, k: Complex64, sign: f64) -> Field {
    Field::from_fn(grid, |x| {
        Complex64::from_polar(1.0, sign * 2.0 * (k * x).re)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_arithmetic() {
        let g = Grid::new(4.0, 128).unwrap();
        assert_eq!(g.spacing(), 0.0625);
        let g = Grid::new(6.0, 256).unwrap();
        assert_eq!(g.spacing(), 0.046875);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(4.0, 100).is_err());
        assert!(Grid::new(4.0, 8).is_err());
        assert!(Grid::new(0.0, 128).is_err());
        assert!(Grid::new(-1.0, 128).is_err());
    }

    #[test]
    fn frequencies_cover_standard_lattice() {
        let g = Grid::new(4.0, 16).unwrap();
        let step = std::f64::consts::PI / 4.0;
        assert_eq!(g.freq(0), 0.0);
        assert!((g.freq(1) - step).abs() < 1e-15);
        assert!((g.freq(8) - (-8.0 * step)).abs() < 1e-15);
        assert!((g.freq(15) - (-step)).abs() < 1e-15);
    }

    #[test]
    fn pairing_factor_unimodular_and_reciprocal() {
        let g = Grid::new(4.0, 16).unwrap();
        let k = Complex64::new(0.7, -1.3);
        let plus = pairing_factor(g, k, 1.0);
        let minus = pairing_factor(g, -k, 1.0);
        for (a, b) in plus.values.iter().zip(minus.values.iter()) {
            assert!((a.norm() - 1.0).abs() < 1e-14);
            assert!((a * b - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn pairing_factor_zero_k_is_one() {
        let g = Grid::new(4.0, 16).unwrap();
        let f = pairing_factor(g, Complex64::ZERO, 1.0);
        for v in f.values.iter() {
            assert_eq!(*v, Complex64::new(1.0, 0.0));
        }
    }
}
