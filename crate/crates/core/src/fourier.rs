//! Unitary, DC-centered discrete Fourier transforms.
//!
//! The centered transform of a length-`n` vector is
//! `fftshift(fft(ifftshift(v))) / √n`, so index `n / 2` holds the DC term in
//! both domains.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure, Result};
use crate::image::Image;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Centered unitary 1-D transform of a fixed length, applied to batches of
/// contiguous rows.
#[derive(Clone)]
pub struct CenteredFft<T: Scalar> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Scalar> std::fmt::Debug for CenteredFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredFft").field("len", &self.len).finish()
    }
}

impl<T: Scalar> CenteredFft<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self::with_planner(&mut planner, len)
    }

    pub fn with_planner(planner: &mut FftPlanner<T>, len: usize) -> Self {
        assert!(len > 0, "transform length must be nonzero");
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: T::one() / T::of(len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn scratch_len(&self) -> usize {
        self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())
    }

    /// Plain (uncentered, unscaled) transform of every contiguous chunk.
    pub(crate) fn process_raw(&self, data: &mut [Complex<T>], dir: Direction, scratch: &mut Vec<Complex<T>>) {
        let need = self.scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex::new(T::zero(), T::zero()));
        }
        let plan = match dir {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        plan.process_with_scratch(data, &mut scratch[..need]);
    }

    /// Transforms every contiguous chunk of `len` samples in place.
    pub fn process_rows(&self, data: &mut [Complex<T>], dir: Direction, scratch: &mut Vec<Complex<T>>) {
        let n = self.len;
        debug_assert_eq!(data.len() % n, 0);
        let need = self.scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex::new(T::zero(), T::zero()));
        }
        let half = n / 2;
        for row in data.chunks_exact_mut(n) {
            row.rotate_left(half);
        }
        let plan = match dir {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        plan.process_with_scratch(data, &mut scratch[..need]);
        for row in data.chunks_exact_mut(n) {
            row.rotate_right(half);
            for z in row.iter_mut() {
                *z = z.scale(self.scale);
            }
        }
    }
}

/// Centered unitary 2-D transform for `height × width` row-major buffers.
#[derive(Debug, Clone)]
pub struct Fourier2<T: Scalar> {
    height: usize,
    width: usize,
    rows: CenteredFft<T>,
    cols: CenteredFft<T>,
}

impl<T: Scalar> Fourier2<T> {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        let rows = CenteredFft::with_planner(&mut planner, width);
        let cols = CenteredFft::with_planner(&mut planner, height);
        Self { height, width, rows, cols }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Transform along the width axis only (each row independently).
    pub fn row_transform(&self) -> &CenteredFft<T> {
        &self.rows
    }

    /// Transform along the height axis only (each column independently).
    pub fn columns_in_place(&self, data: &mut [Complex<T>], dir: Direction, scratch: &mut Vec<Complex<T>>) {
        let (h, w) = (self.height, self.width);
        let mut t = transpose(data, h, w);
        self.cols.process_rows(&mut t, dir, scratch);
        let back = transpose(&t, w, h);
        data.copy_from_slice(&back);
    }

    pub fn process(&self, data: &mut [Complex<T>], dir: Direction, scratch: &mut Vec<Complex<T>>) {
        debug_assert_eq!(data.len(), self.height * self.width);
        self.rows.process_rows(data, dir, scratch);
        self.columns_in_place(data, dir, scratch);
    }
}

fn transpose<T: Copy>(src: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for c in 0..w {
        for r in 0..h {
            out.push(src[r * w + c]);
        }
    }
    out
}

fn transform<T: Scalar>(img: &Image<T>, dir: Direction) -> Result<Image<T>> {
    let (h, w) = img.shape();
    ensure!(h > 0 && w > 0, InvalidInput, "cannot transform an empty image");
    let plan = Fourier2::new(h, w);
    let mut data = img.data().to_vec();
    let mut scratch = Vec::new();
    plan.process(&mut data, dir, &mut scratch);
    Ok(Image::from_raw(h, w, data))
}

/// Centered unitary 2-D DFT.
pub fn fft2c<T: Scalar>(img: &Image<T>) -> Result<Image<T>> {
    transform(img, Direction::Forward)
}

/// Inverse of [`fft2c`].
pub fn ifft2c<T: Scalar>(img: &Image<T>) -> Result<Image<T>> {
    transform(img, Direction::Inverse)
}
