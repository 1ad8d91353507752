//! Dense complex containers: single images, multi-coil k-space and coil
//! sensitivity maps. All arrays are row-major; multi-coil arrays are
//! coil-major on top of that.

use num_complex::Complex;

use crate::error::{ensure, Result};
use crate::Scalar;

fn check_finite<T: Scalar>(data: &[Complex<T>], what: &str) -> Result<()> {
    ensure!(
        data.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        InvalidInput,
        "{what} contains non-finite values"
    );
    Ok(())
}

/// An `height × width` complex image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        ensure!(height > 0 && width > 0, InvalidInput, "image dimensions must be nonzero, got {height}x{width}");
        ensure!(
            data.len() == height * width,
            Dimension,
            "image {height}x{width} needs {} samples, got {}",
            height * width,
            data.len()
        );
        check_finite(&data, "image")?;
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![Complex::new(T::zero(), T::zero()); height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    /// Wraps a buffer produced internally; the caller guarantees the length.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.width + col]
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.data)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn magnitude(&self) -> Vec<T> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: Complex<T>, other: &Image<T>) -> Result<Image<T>> {
        ensure!(self.shape() == other.shape(), Dimension, "image shapes {:?} vs {:?}", self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a + alpha * *b).collect();
        Ok(Image::from_raw(self.height, self.width, data))
    }

    pub fn scale(&self, alpha: Complex<T>) -> Image<T> {
        Image::from_raw(self.height, self.width, self.data.iter().map(|z| *z * alpha).collect())
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image::from_raw(self.height, self.width, cast_slice(&self.data))
    }

    /// Central `rows × cols` window.
    pub fn crop_center(&self, rows: usize, cols: usize) -> Result<Image<T>> {
        ensure!(
            rows > 0 && cols > 0 && rows <= self.height && cols <= self.width,
            InvalidInput,
            "crop {rows}x{cols} does not fit in {}x{}",
            self.height,
            self.width
        );
        let r0 = (self.height - rows) / 2;
        let c0 = (self.width - cols) / 2;
        Ok(Image::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c)))
    }
}

/// Fully or partially sampled multi-coil k-space with DC at
/// `(height / 2, width / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace<T> {
    ncoils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> KSpace<T> {
    pub fn new(ncoils: usize, height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        ensure!(ncoils > 0 && height > 0 && width > 0, InvalidInput, "k-space dimensions must be nonzero");
        ensure!(
            data.len() == ncoils * height * width,
            Dimension,
            "k-space {ncoils}x{height}x{width} needs {} samples, got {}",
            ncoils * height * width,
            data.len()
        );
        check_finite(&data, "k-space")?;
        Ok(Self { ncoils, height, width, data })
    }

    pub fn zeros(ncoils: usize, height: usize, width: usize) -> Self {
        Self { ncoils, height, width, data: vec![Complex::new(T::zero(), T::zero()); ncoils * height * width] }
    }

    pub(crate) fn from_raw(ncoils: usize, height: usize, width: usize, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), ncoils * height * width);
        Self { ncoils, height, width, data }
    }

    pub fn ncoils(&self) -> usize {
        self.ncoils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn coil(&self, c: usize) -> &[Complex<T>] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.data)
    }

    pub fn cast<U: Scalar>(&self) -> KSpace<U> {
        KSpace::from_raw(self.ncoils, self.height, self.width, cast_slice(&self.data))
    }
}

/// Complex coil sensitivity profiles with an object support mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps<T> {
    ncoils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
    support: Vec<bool>,
}

/// Tolerance on the root-sum-of-squares normalization.
pub const RSS_TOL: f64 = 1e-6;

impl<T: Scalar> CoilMaps<T> {
    /// Validates shapes and the normalization invariant
    /// (`Σ_c |S_c|² = 1` on support, `≤ 1` elsewhere).
    pub fn new(ncoils: usize, height: usize, width: usize, data: Vec<Complex<T>>, support: Vec<bool>) -> Result<Self> {
        let maps = Self::new_unchecked_norm(ncoils, height, width, data, support)?;
        let tol = RSS_TOL.max(T::epsilon().to_f64_lossy() * 16.0);
        for (p, (&inside, rss)) in maps.support.iter().zip(maps.rss_sqr()).enumerate() {
            let rss = rss.to_f64_lossy();
            if inside {
                ensure!((rss - 1.0).abs() <= tol, InvalidInput, "coil maps not normalized at pixel {p}: {rss}");
            } else {
                ensure!(rss <= 1.0 + tol, InvalidInput, "coil maps exceed unit energy at pixel {p}: {rss}");
            }
        }
        Ok(maps)
    }

    fn new_unchecked_norm(
        ncoils: usize,
        height: usize,
        width: usize,
        data: Vec<Complex<T>>,
        support: Vec<bool>,
    ) -> Result<Self> {
        ensure!(ncoils > 0 && height > 0 && width > 0, InvalidInput, "coil map dimensions must be nonzero");
        ensure!(data.len() == ncoils * height * width, Dimension, "coil map data length {}", data.len());
        ensure!(support.len() == height * width, Dimension, "support length {}", support.len());
        check_finite(&data, "coil maps")?;
        Ok(Self { ncoils, height, width, data, support })
    }

    /// Builds maps from raw profiles by dividing by the root-sum-of-squares
    /// on `support` and zeroing everything outside it.
    pub fn normalized(ncoils: usize, height: usize, width: usize, mut raw: Vec<Complex<T>>, support: Vec<bool>) -> Result<Self> {
        ensure!(raw.len() == ncoils * height * width, Dimension, "coil map data length {}", raw.len());
        ensure!(support.len() == height * width, Dimension, "support length {}", support.len());
        let n = height * width;
        for p in 0..n {
            let rss = (0..ncoils).map(|c| raw[c * n + p].norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
            let inside = support[p];
            ensure!(!inside || rss > T::zero(), InvalidInput, "all coils vanish at support pixel {p}");
            for c in 0..ncoils {
                let v = &mut raw[c * n + p];
                *v = if inside { *v / rss } else { Complex::new(T::zero(), T::zero()) };
            }
        }
        Self::new(ncoils, height, width, raw, support)
    }

    /// Single coil with unit sensitivity everywhere.
    pub fn identity(height: usize, width: usize) -> Self {
        Self {
            ncoils: 1,
            height,
            width,
            data: vec![Complex::new(T::one(), T::zero()); height * width],
            support: vec![true; height * width],
        }
    }

    pub fn ncoils(&self) -> usize {
        self.ncoils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn coil(&self, c: usize) -> &[Complex<T>] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// `Σ_c |S_c(p)|²` per pixel.
    pub fn rss_sqr(&self) -> Vec<T> {
        let n = self.height * self.width;
        (0..n)
            .map(|p| (0..self.ncoils).map(|c| self.data[c * n + p].norm_sqr()).fold(T::zero(), |a, b| a + b))
            .collect()
    }

    /// Converts precision, keeping the normalization check loose enough for
    /// `f32` rounding.
    pub fn cast<U: Scalar>(&self) -> CoilMaps<U> {
        CoilMaps {
            ncoils: self.ncoils,
            height: self.height,
            width: self.width,
            data: cast_slice(&self.data),
            support: self.support.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        ncoils: usize,
        height: usize,
        width: usize,
        data: Vec<Complex<T>>,
        support: Vec<bool>,
    ) -> Result<Self> {
        Self::new_unchecked_norm(ncoils, height, width, data, support)
    }
}

pub(crate) fn cast_slice<T: Scalar, U: Scalar>(data: &[Complex<T>]) -> Vec<Complex<U>> {
    data.iter().map(|z| Complex::new(U::of(z.re.to_f64_lossy()), U::of(z.im.to_f64_lossy()))).collect()
}

pub(crate) fn norm_sqr<T: Scalar>(data: &[Complex<T>]) -> T {
    data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// `Σ conj(a_i) b_i`
pub fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Rounds every component to `f32` and back, the on-disk precision.
pub fn quantize_f32<T: Scalar>(data: &mut [Complex<T>]) {
    for z in data {
        z.re = T::of(z.re.to_f64_lossy() as f32 as f64);
        z.im = T::of(z.im.to_f64_lossy() as f32 as f64);
    }
}
