//! Multi-coil Cartesian encoding `A = M F S` and its adjoint.
//!
//! Line masks select whole k-space columns, so `Fᴴ M F` only mixes samples
//! within an image row. [`NormalOp`] exploits that and applies
//! `Aᴴ A + λI` with 1-D transforms along the width axis. [`Acquisition`]
//! keeps k-space inverse-transformed along the height axis, from which
//! `Aᴴ M y` for any set of columns costs one row transform per coil.

use num_complex::Complex;

use crate::error::{ensure, Result};
use crate::fourier::{CenteredFft, Direction, Fourier2};
use crate::image::{CoilMaps, Image, KSpace};
use crate::mask::LineMask;
use crate::recon::LinearOperator;
use crate::Scalar;

fn check_mask_width(width: usize, mask: &LineMask) -> Result<()> {
    ensure!(mask.width() == width, Dimension, "mask width {} vs data width {width}", mask.width());
    Ok(())
}

fn check_maps(shape: (usize, usize), smaps: &CoilMaps<impl Scalar>) -> Result<()> {
    ensure!(smaps.image_shape() == shape, Dimension, "coil maps {:?} vs data {:?}", smaps.image_shape(), shape);
    Ok(())
}

/// Zeroes every column not in `mask`, for every coil.
pub fn apply_mask<T: Scalar>(ksp: &KSpace<T>, mask: &LineMask) -> Result<KSpace<T>> {
    check_mask_width(ksp.width(), mask)?;
    let keep = mask.indicator();
    let mut out = ksp.clone();
    zero_unsampled(out.data_mut(), ksp.width(), &keep);
    Ok(out)
}

fn zero_unsampled<T: Scalar>(data: &mut [Complex<T>], width: usize, keep: &[bool]) {
    let zero = Complex::new(T::zero(), T::zero());
    for row in data.chunks_exact_mut(width) {
        for (z, &k) in row.iter_mut().zip(keep) {
            if !k {
                *z = zero;
            }
        }
    }
}

/// `y_c = M F (S_c ⊙ x)` for every coil.
pub fn forward<T: Scalar>(x: &Image<T>, smaps: &CoilMaps<T>, mask: &LineMask) -> Result<KSpace<T>> {
    let (h, w) = x.shape();
    check_maps((h, w), smaps)?;
    check_mask_width(w, mask)?;
    let plan = Fourier2::new(h, w);
    let keep = mask.indicator();
    let nc = smaps.ncoils();
    let mut out = Vec::with_capacity(nc * h * w);
    let mut scratch = Vec::new();
    for c in 0..nc {
        let mut buf: Vec<Complex<T>> = smaps.coil(c).iter().zip(x.data()).map(|(s, v)| s * v).collect();
        plan.process(&mut buf, Direction::Forward, &mut scratch);
        zero_unsampled(&mut buf, w, &keep);
        out.extend_from_slice(&buf);
    }
    Ok(KSpace::from_raw(nc, h, w, out))
}

/// `x = Σ_c conj(S_c) ⊙ Fᴴ M y_c`, the exact adjoint of [`forward`].
pub fn adjoint<T: Scalar>(y: &KSpace<T>, smaps: &CoilMaps<T>, mask: &LineMask) -> Result<Image<T>> {
    let (h, w) = y.image_shape();
    check_maps((h, w), smaps)?;
    check_mask_width(w, mask)?;
    ensure!(y.ncoils() == smaps.ncoils(), Dimension, "{} k-space coils vs {} maps", y.ncoils(), smaps.ncoils());
    let plan = Fourier2::new(h, w);
    let keep = mask.indicator();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); h * w];
    let mut scratch = Vec::new();
    for c in 0..y.ncoils() {
        let mut buf = y.coil(c).to_vec();
        zero_unsampled(&mut buf, w, &keep);
        plan.process(&mut buf, Direction::Inverse, &mut scratch);
        for ((a, s), v) in acc.iter_mut().zip(smaps.coil(c)).zip(&buf) {
            *a += s.conj() * v;
        }
    }
    Ok(Image::from_raw(h, w, acc))
}

/// `Aᴴ A + λI` for a fixed column set, applied row by row.
///
/// The centering shifts are folded into the map products and the mask, so
/// each coil costs one plain forward and one plain inverse row transform.
#[derive(Debug, Clone)]
pub struct NormalOp<'a, T: Scalar> {
    smaps: &'a CoilMaps<T>,
    /// Unsampled columns in uncentered frequency order.
    dropped: Vec<usize>,
    lambda: T,
    rows: CenteredFft<T>,
}

impl<'a, T: Scalar> NormalOp<'a, T> {
    pub fn new(smaps: &'a CoilMaps<T>, mask: &LineMask, lambda: T) -> Result<Self> {
        check_mask_width(smaps.width(), mask)?;
        Ok(Self::with_plan(smaps, mask.indicator(), lambda, CenteredFft::new(smaps.width())))
    }

    pub(crate) fn with_plan(smaps: &'a CoilMaps<T>, keep: Vec<bool>, lambda: T, rows: CenteredFft<T>) -> Self {
        let w = keep.len();
        let half = w / 2;
        // centered column k sits at raw frequency (k - w/2) mod w
        let dropped = (0..w).filter(|m| !keep[(m + half) % w]).collect();
        Self { smaps, dropped, lambda, rows }
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}

impl<T: Scalar> LinearOperator<T> for NormalOp<'_, T> {
    fn apply(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        let w = self.smaps.width();
        // input shift of the centered transform: raw sample j is pixel (j + w/2) mod w
        let half = w / 2;
        let tail = w - half;
        let zero = Complex::new(T::zero(), T::zero());
        out.fill(zero);
        let mut buf = vec![zero; x.len()];
        let mut scratch = Vec::new();
        for c in 0..self.smaps.ncoils() {
            let s = self.smaps.coil(c);
            for ((b, sr), xr) in buf.chunks_exact_mut(w).zip(s.chunks_exact(w)).zip(x.chunks_exact(w)) {
                for ((b, sv), v) in b[..tail].iter_mut().zip(&sr[half..]).zip(&xr[half..]) {
                    *b = sv * v;
                }
                for ((b, sv), v) in b[tail..].iter_mut().zip(&sr[..half]).zip(&xr[..half]) {
                    *b = sv * v;
                }
            }
            self.rows.process_raw(&mut buf, Direction::Forward, &mut scratch);
            for row in buf.chunks_exact_mut(w) {
                for &m in &self.dropped {
                    row[m] = zero;
                }
            }
            self.rows.process_raw(&mut buf, Direction::Inverse, &mut scratch);
            for ((b, sr), or) in buf.chunks_exact(w).zip(s.chunks_exact(w)).zip(out.chunks_exact_mut(w)) {
                for ((b, sv), o) in b[..tail].iter().zip(&sr[half..]).zip(&mut or[half..]) {
                    *o += sv.conj() * b;
                }
                for ((b, sv), o) in b[tail..].iter().zip(&sr[..half]).zip(&mut or[..half]) {
                    *o += sv.conj() * b;
                }
            }
        }
        // plain transforms leave a factor w from the forward/inverse pair
        let inv_n = T::one() / T::of(w as f64);
        for (o, v) in out.iter_mut().zip(x) {
            *o = o.scale(inv_n) + v.scale(self.lambda);
        }
    }
}

/// A fully sampled acquisition prepared for repeated partial adjoints.
#[derive(Debug, Clone)]
pub struct Acquisition<T: Scalar> {
    smaps: CoilMaps<T>,
    /// k-space after the inverse transform along the height axis.
    hybrid: Vec<Complex<T>>,
    rows: CenteredFft<T>,
    /// Row-space image of each unit column: `F_wᴴ e_k`.
    column_basis: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> Acquisition<T> {
    pub fn new(ksp: &KSpace<T>, smaps: &CoilMaps<T>) -> Result<Self> {
        let (h, w) = ksp.image_shape();
        check_maps((h, w), smaps)?;
        ensure!(ksp.ncoils() == smaps.ncoils(), Dimension, "{} k-space coils vs {} maps", ksp.ncoils(), smaps.ncoils());
        let plan = Fourier2::new(h, w);
        let mut hybrid = ksp.data().to_vec();
        let mut scratch = Vec::new();
        for coil in hybrid.chunks_exact_mut(h * w) {
            plan.columns_in_place(coil, Direction::Inverse, &mut scratch);
        }
        let rows = plan.row_transform().clone();
        let column_basis = (0..w)
            .map(|k| {
                let mut e = vec![Complex::new(T::zero(), T::zero()); w];
                e[k] = Complex::new(T::one(), T::zero());
                rows.process_rows(&mut e, Direction::Inverse, &mut scratch);
                e
            })
            .collect();
        Ok(Self { smaps: smaps.clone(), hybrid, rows, column_basis })
    }

    pub fn smaps(&self) -> &CoilMaps<T> {
        &self.smaps
    }

    pub fn shape(&self) -> (usize, usize) {
        self.smaps.image_shape()
    }

    /// `Aᴴ M y` for the given columns.
    pub fn adjoint_lines(&self, lines: &[usize]) -> Image<T> {
        let (h, w) = self.shape();
        let n = h * w;
        let mut keep = vec![false; w];
        for &l in lines {
            keep[l] = true;
        }
        let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch = Vec::new();
        for c in 0..self.smaps.ncoils() {
            buf.copy_from_slice(&self.hybrid[c * n..(c + 1) * n]);
            zero_unsampled(&mut buf, w, &keep);
            self.rows.process_rows(&mut buf, Direction::Inverse, &mut scratch);
            for ((a, s), b) in acc.iter_mut().zip(self.smaps.coil(c)).zip(&buf) {
                *a += s.conj() * b;
            }
        }
        Image::from_raw(h, w, acc)
    }

    /// Contribution of a single column to [`Acquisition::adjoint_lines`].
    /// Adjoints are linear in the column set, so `Aᴴ M_{Ω∪{k}} y` equals
    /// `Aᴴ M_Ω y + column_image(k)` for `k ∉ Ω`.
    pub fn column_image(&self, k: usize) -> Image<T> {
        let (h, w) = self.shape();
        let n = h * w;
        let basis = &self.column_basis[k];
        let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
        for c in 0..self.smaps.ncoils() {
            let hyb = &self.hybrid[c * n..(c + 1) * n];
            let s = self.smaps.coil(c);
            for r in 0..h {
                let coef = hyb[r * w + k];
                let row = r * w..(r + 1) * w;
                for ((a, sv), e) in acc[row.clone()].iter_mut().zip(&s[row]).zip(basis) {
                    *a += sv.conj() * coef * e;
                }
            }
        }
        Image::from_raw(h, w, acc)
    }

    pub fn normal_op(&self, lines: &[usize], lambda: T) -> NormalOp<'_, T> {
        let mut keep = vec![false; self.smaps.width()];
        for &l in lines {
            keep[l] = true;
        }
        NormalOp::with_plan(&self.smaps, keep, lambda, self.rows.clone())
    }
}
