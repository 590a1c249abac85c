//! Discrete Fourier transforms on 2-D grids.
//!
//! The optics use the *unitary, centered* transform: along an axis of length
//! `n` the sample at index `n / 2` (integer division) is the origin, both for
//! the input (pupil plane) and the output (image plane), and the transform is
//! scaled by `1 / sqrt(rows * cols)` so that it preserves energy.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized in-place 2-D DFT of a row-major `rows x cols` buffer.
pub(crate) fn fft2_in_place(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), rows * cols);
    plan(cols, inverse).process(buf);
    let mut t = transpose(buf, rows, cols);
    plan(rows, inverse).process(&mut t);
    let back = transpose(&t, cols, rows);
    buf.copy_from_slice(&back);
}

fn transpose(buf: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        let row = &buf[r * cols..(r + 1) * cols];
        for (c, v) in row.iter().enumerate() {
            out[c * rows + r] = *v;
        }
    }
    out
}

/// Unitary centered forward transform `U{x}`.
pub fn fft2_centered(x: &Array2<Complex64>) -> Array2<Complex64> {
    centered(x, false)
}

/// Unitary centered inverse transform; the adjoint of [`fft2_centered`].
pub fn ifft2_centered(x: &Array2<Complex64>) -> Array2<Complex64> {
    centered(x, true)
}

fn centered(x: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
    let (rows, cols) = x.dim();
    // ifftshift: origin at n/2 moves to index 0
    let mut buf = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let sr = (r + rows / 2) % rows;
        for c in 0..cols {
            buf.push(x[(sr, (c + cols / 2) % cols)]);
        }
    }
    fft2_in_place(&mut buf, rows, cols, inverse);
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    // fftshift: index 0 moves back to n/2
    let (hr, hc) = (rows.div_ceil(2), cols.div_ceil(2));
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        buf[((r + hr) % rows) * cols + (c + hc) % cols] * scale
    })
}
