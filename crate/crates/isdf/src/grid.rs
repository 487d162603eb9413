//! Uniform periodic grids on the unit torus `[0, 1)^dim`.
//!
//! Grid points are flattened row-major with the last axis fastest; in 3D the
//! point `(a, b, c)` has flat index `(a*m + b)*m + c`. Fourier modes use the
//! standard FFT bin convention: bin `a` carries the signed integer wave
//! number `a` for `a < m/2` and `a - m` otherwise, so wave numbers per axis
//! run over `[-m/2, m/2)`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicGrid {
    dim: usize,
    points_per_axis: usize,
}

impl PeriodicGrid {
    /// Builds a grid with `points_per_axis` points along each of `dim` axes.
    /// `dim` must be 1 or 3 and `points_per_axis` even (so the mode range is
    /// symmetric apart from the unpaired Nyquist bin).
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 3 {
            return Err(Error::UnsupportedDim(dim));
        }
        if points_per_axis < 2 || points_per_axis % 2 != 0 {
            return Err(Error::BadAxisPoints(points_per_axis));
        }
        Ok(Self {
            dim,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total number of grid points `n = m^dim`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one grid cell, `h = 1/n`. This is the volume
    /// element in every dimension: cell length in 1D, `(1/m)^3` in 3D.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Decomposes a flat point index into per-axis indices. Unused axes are 0.
    pub fn decompose(&self, index: usize) -> [usize; 3] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [index, 0, 0],
            _ => [index / (m * m), (index / m) % m, index % m],
        }
    }

    /// Flat index of per-axis indices (each taken modulo the axis length).
    pub fn flatten(&self, axes: [i64; 3]) -> usize {
        let m = self.points_per_axis as i64;
        let wrap = |a: i64| a.rem_euclid(m) as usize;
        match self.dim {
            1 => wrap(axes[0]),
            _ => (wrap(axes[0]) * self.points_per_axis + wrap(axes[1])) * self.points_per_axis + wrap(axes[2]),
        }
    }

    /// Signed integer wave number carried by FFT bin `a` along one axis.
    pub fn axis_wave_number(&self, a: usize) -> i64 {
        let m = self.points_per_axis;
        if a < m / 2 {
            a as i64
        } else {
            a as i64 - m as i64
        }
    }

    /// Signed wave numbers of the mode at flat index `index`.
    pub fn wave_number(&self, index: usize) -> [i64; 3] {
        let axes = self.decompose(index);
        let mut k = [0i64; 3];
        for (out, &a) in k.iter_mut().zip(axes.iter()).take(self.dim) {
            *out = self.axis_wave_number(a);
        }
        k
    }

    /// Squared Euclidean norm `|k|^2` of the mode at flat index `index`.
    pub fn mode_norm_sq(&self, index: usize) -> i64 {
        let k = self.wave_number(index);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }
}
