//! Internal FFT plumbing shared by the model, kernel, and sketch code.
//!
//! Convention (pinned by tests): the forward transform is the unnormalized
//! sum with kernel `e^{-2 pi i k x}`, the inverse carries the full `1/n`
//! factor. In 3D the transform is applied axis by axis on the flat layout.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::PeriodicGrid;

/// Plans a forward FFT of arbitrary length (used by the sketch over the
/// orbital-pair axis, whose length N^2 is unrelated to the grid).
pub(crate) fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(len)
}

/// Cached per-axis FFT plans for one grid.
pub(crate) struct GridFft {
    grid: PeriodicGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub(crate) fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.points_per_axis();
        Self {
            grid,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    /// Unnormalized forward transform, in place over the flat grid layout.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the `1/n` normalization, in place.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let scale = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.len();
        assert_eq!(data.len(), n, "field length does not match grid");
        let m = self.grid.points_per_axis();
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if self.grid.dim() == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        // z axis: contiguous lines
        for line in data.chunks_exact_mut(m) {
            plan.process_with_scratch(line, &mut scratch);
        }
        // y axis: stride m within each (a, *) plane
        let mut line = vec![Complex64::default(); m];
        for a in 0..m {
            for c in 0..m {
                let base = a * m * m + c;
                for (b, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + b * m];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (b, slot) in line.iter().enumerate() {
                    data[base + b * m] = *slot;
                }
            }
        }
        // x axis: stride m^2
        for b in 0..m {
            for c in 0..m {
                let base = b * m + c;
                for (a, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + a * m * m];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (a, slot) in line.iter().enumerate() {
                    data[base + a * m * m] = *slot;
                }
            }
        }
    }
}
