//! Planned 2D complex FFTs on square grids.
//!
//! rustfft only provides 1D transforms; the 2D transform is rows, transpose,
//! rows, transpose. The partial variants skip transforms of all-zero rows
//! (zero-padded convolution inputs) or of rows whose output is discarded
//! (cropped convolution outputs), which saves about a quarter of the work in
//! the convolution hot path.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Clone for Fft2 {
    fn clone(&self) -> Self {
        Fft2 {
            n: self.n,
            fwd: Arc::clone(&self.fwd),
            inv: Arc::clone(&self.inv),
            scratch: vec![Complex64::ZERO; self.scratch.len()],
        }
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::ZERO; len],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn rows(&mut self, a: &mut Array2<Complex64>, count: usize, forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let buf = a.as_slice_mut().expect("fft needs standard layout");
        for r in 0..count {
            plan.process_with_scratch(&mut buf[r * self.n..(r + 1) * self.n], &mut self.scratch);
        }
    }

    /// Unnormalized forward 2D transform.
    pub fn forward(&mut self, a: &mut Array2<Complex64>) {
        let n = self.n;
        self.rows(a, n, true);
        transpose_square(a);
        self.rows(a, n, true);
        transpose_square(a);
    }

    /// Inverse 2D transform, normalized by 1/n².
    pub fn inverse(&mut self, a: &mut Array2<Complex64>) {
        let n = self.n;
        self.rows(a, n, false);
        transpose_square(a);
        self.rows(a, n, false);
        transpose_square(a);
        let s = 1.0 / (n * n) as f64;
        a.mapv_inplace(|v| v * s);
    }

    /// Forward transform of an array whose rows `nz..n` are all zero.
    /// Leaves the result transposed (spectrum indexed [col][row]).
    pub fn forward_padded_t(&mut self, a: &mut Array2<Complex64>, nz: usize) {
        self.rows(a, nz, true);
        transpose_square(a);
        let n = self.n;
        self.rows(a, n, true);
    }

    /// Inverse of a transposed spectrum keeping only rows `0..keep` of the
    /// natural-layout result valid; no 1/n² normalization is applied.
    pub fn inverse_cropped_t(&mut self, a: &mut Array2<Complex64>, keep: usize) {
        let n = self.n;
        self.rows(a, n, false);
        transpose_square(a);
        self.rows(a, keep, false);
    }
}

fn transpose_square(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    let buf = a.as_slice_mut().expect("fft needs standard layout");
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
