//! Reconstructors `f(Aᴴ M y)`: zero-filled adjoint, Tikhonov-regularized
//! least squares and an unrolled alternation between a Gaussian denoiser and
//! conjugate-gradient data consistency. The scalar parameters are "trained"
//! by exhaustive grid search.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::ScanBundle;
use crate::error::{ensure, Error, Result};
use crate::image::{inner, norm_sqr, CoilMaps, Image, KSpace};
use crate::mask::LineMask;
use crate::metrics::nmse;
use crate::operator::{adjoint, Acquisition, NormalOp};
use crate::Scalar;

/// A linear map on flattened images.
pub trait LinearOperator<T: Scalar> {
    fn apply(&self, x: &[Complex<T>], out: &mut [Complex<T>]);
}

impl<T: Scalar, F> LinearOperator<T> for F
where
    F: Fn(&[Complex<T>], &mut [Complex<T>]),
{
    fn apply(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        self(x, out)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Image<T>,
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖` from the recurrence.
    pub relative_residual: f64,
    /// Relative residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

/// Conjugate gradients for a Hermitian positive (semi-)definite `op`.
///
/// Stops once the recurrence residual drops to `tol · ‖rhs‖` or after
/// `maxiter` iterations, whichever comes first.
pub fn cg_solve<T: Scalar, A: LinearOperator<T> + ?Sized>(
    op: &A,
    rhs: &Image<T>,
    x0: Option<&Image<T>>,
    tol: f64,
    maxiter: usize,
) -> Result<CgOutcome<T>> {
    ensure!(tol > 0.0, InvalidInput, "cg tolerance must be positive, got {tol}");
    let (h, w) = rhs.shape();
    let n = h * w;
    let zero = Complex::new(T::zero(), T::zero());
    let b = rhs.data();
    let b_norm = norm_sqr(b).to_f64_lossy().sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome { x: Image::zeros(h, w), iterations: 0, relative_residual: 0.0, residual_history: vec![0.0] });
    }

    let mut x = match x0 {
        Some(init) => {
            ensure!(init.shape() == rhs.shape(), Dimension, "cg initial guess shape {:?}", init.shape());
            init.data().to_vec()
        }
        None => vec![zero; n],
    };
    let mut ap = vec![zero; n];
    let mut r: Vec<Complex<T>> = if x0.is_some() {
        op.apply(&x, &mut ap);
        b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect()
    } else {
        b.to_vec()
    };
    let mut p = r.clone();
    let mut rr = norm_sqr(&r);
    let mut history = vec![rr.to_f64_lossy().sqrt() / b_norm];
    let mut iterations = 0;

    while iterations < maxiter && *history.last().unwrap() > tol {
        op.apply(&p, &mut ap);
        let pap = inner(&p, &ap).re;
        if !pap.is_finite() {
            return Err(Error::Numerical(format!("non-finite curvature at cg iteration {iterations}")));
        }
        if pap <= T::zero() {
            return Err(Error::Numerical(format!("operator is not positive definite (pᴴAp = {pap:e})")));
        }
        let alpha = rr / pap;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += pi.scale(alpha);
            *ri -= api.scale(alpha);
        }
        let rr_new = norm_sqr(&r);
        if !rr_new.is_finite() {
            return Err(Error::Numerical(format!("non-finite residual at cg iteration {iterations}")));
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = *ri + pi.scale(beta);
        }
        rr = rr_new;
        iterations += 1;
        history.push(rr.to_f64_lossy().sqrt() / b_norm);
    }

    let x = Image::new(h, w, x).map_err(|_| Error::Numerical("cg produced non-finite iterate".into()))?;
    Ok(CgOutcome { x, iterations, relative_residual: *history.last().unwrap(), residual_history: history })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconKind {
    ZeroFilled,
    TikhonovCg,
    ModlUnrolled,
}

impl ReconKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReconKind::ZeroFilled => "zero-filled",
            ReconKind::TikhonovCg => "tikhonov-cg",
            ReconKind::ModlUnrolled => "modl-unrolled",
        }
    }
}

impl std::fmt::Display for ReconKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-filled" => Ok(ReconKind::ZeroFilled),
            "tikhonov-cg" => Ok(ReconKind::TikhonovCg),
            "modl-unrolled" => Ok(ReconKind::ModlUnrolled),
            other => Err(Error::InvalidInput(format!("unknown reconstructor kind `{other}`"))),
        }
    }
}

/// Parameters of a classical reconstructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReconParams", into = "RawReconParams")]
pub struct ReconParams {
    pub kind: ReconKind,
    pub lambda: f64,
    pub n_blocks: usize,
    pub cg_tol: f64,
    pub cg_maxiter: usize,
    pub denoiser_sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReconParams {
    kind: ReconKind,
    lambda: f64,
    n_blocks: usize,
    cg_tol: f64,
    cg_maxiter: usize,
    denoiser_sigma: f64,
}

impl TryFrom<RawReconParams> for ReconParams {
    type Error = Error;

    fn try_from(r: RawReconParams) -> Result<Self> {
        let p = ReconParams {
            kind: r.kind,
            lambda: r.lambda,
            n_blocks: r.n_blocks,
            cg_tol: r.cg_tol,
            cg_maxiter: r.cg_maxiter,
            denoiser_sigma: r.denoiser_sigma,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<ReconParams> for RawReconParams {
    fn from(p: ReconParams) -> Self {
        RawReconParams {
            kind: p.kind,
            lambda: p.lambda,
            n_blocks: p.n_blocks,
            cg_tol: p.cg_tol,
            cg_maxiter: p.cg_maxiter,
            denoiser_sigma: p.denoiser_sigma,
        }
    }
}

pub const DEFAULT_CG_TOL: f64 = 1e-8;
pub const DEFAULT_CG_MAXITER: usize = 50;

impl ReconParams {
    pub fn zero_filled() -> Self {
        Self {
            kind: ReconKind::ZeroFilled,
            lambda: 0.0,
            n_blocks: 1,
            cg_tol: DEFAULT_CG_TOL,
            cg_maxiter: DEFAULT_CG_MAXITER,
            denoiser_sigma: 0.0,
        }
    }

    pub fn tikhonov(lambda: f64) -> Self {
        Self { kind: ReconKind::TikhonovCg, lambda, ..Self::zero_filled() }
    }

    pub fn modl(lambda: f64, denoiser_sigma: f64, n_blocks: usize) -> Self {
        Self { kind: ReconKind::ModlUnrolled, lambda, denoiser_sigma, n_blocks, ..Self::zero_filled() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.lambda >= 0.0 && self.lambda.is_finite(), InvalidInput, "lambda must be ≥ 0, got {}", self.lambda);
        ensure!(self.cg_tol > 0.0, InvalidInput, "cg_tol must be > 0, got {}", self.cg_tol);
        ensure!(self.n_blocks >= 1, InvalidInput, "n_blocks must be ≥ 1");
        ensure!(
            self.denoiser_sigma >= 0.0 && self.denoiser_sigma.is_finite(),
            InvalidInput,
            "denoiser_sigma must be ≥ 0, got {}",
            self.denoiser_sigma
        );
        Ok(())
    }

    /// Search grid used when the reconstructor is tuned.
    pub fn default_grid(kind: ReconKind) -> Vec<ReconParams> {
        const LAMBDAS: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        match kind {
            ReconKind::ZeroFilled => vec![Self::zero_filled()],
            ReconKind::TikhonovCg => LAMBDAS.iter().map(|&l| Self::tikhonov(l)).collect(),
            ReconKind::ModlUnrolled => {
                let mut grid = Vec::new();
                for &l in &LAMBDAS {
                    for sigma in [0.5, 1.0, 2.0] {
                        for blocks in [1, 3] {
                            grid.push(Self::modl(l, sigma, blocks));
                        }
                    }
                }
                grid
            }
        }
    }
}

/// Separable Gaussian blur of real and imaginary parts with mirrored
/// borders. `sigma = 0` is the identity.
pub fn gaussian_blur<T: Scalar>(img: &Image<T>, sigma: f64) -> Image<T> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let kernel: Vec<T> = kernel.into_iter().map(T::of).collect();

    let (h, w) = img.shape();
    let src = img.data();
    let zero = Complex::new(T::zero(), T::zero());
    let mut tmp = vec![zero; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = zero;
            for (k, &kv) in kernel.iter().enumerate() {
                let cc = mirror(c as isize + k as isize - radius, w);
                acc += src[r * w + cc].scale(kv);
            }
            tmp[r * w + c] = acc;
        }
    }
    let mut out = vec![zero; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = zero;
            for (k, &kv) in kernel.iter().enumerate() {
                let rr = mirror(r as isize + k as isize - radius, h);
                acc += tmp[rr * w + c].scale(kv);
            }
            out[r * w + c] = acc;
        }
    }
    Image::from_raw(h, w, out)
}

/// Half-sample symmetric reflection of `i` into `[0, n)`.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Runs a reconstructor given the zero-filled adjoint `Aᴴ M y` and the
/// normal operator for the same mask.
pub(crate) fn reconstruct_from_adjoint<T: Scalar>(
    aty: Image<T>,
    normal: &NormalOp<'_, T>,
    params: &ReconParams,
) -> Result<Image<T>> {
    params.validate()?;
    match params.kind {
        ReconKind::ZeroFilled => Ok(aty),
        ReconKind::TikhonovCg => Ok(cg_solve(normal, &aty, None, params.cg_tol, params.cg_maxiter)?.x),
        ReconKind::ModlUnrolled => {
            let lambda = Complex::new(normal.lambda(), T::zero());
            let mut x = aty.clone();
            for block in 0..params.n_blocks {
                let z = gaussian_blur(&x, params.denoiser_sigma);
                let rhs = aty.add_scaled(lambda, &z)?;
                let init = if block == 0 { None } else { Some(&x) };
                x = cg_solve(normal, &rhs, init, params.cg_tol, params.cg_maxiter)?.x;
            }
            Ok(x)
        }
    }
}

/// `f(Aᴴ M y)` for the chosen reconstructor. `y` may or may not already be
/// masked.
pub fn reconstruct<T: Scalar>(
    y: &KSpace<T>,
    smaps: &CoilMaps<T>,
    mask: &LineMask,
    params: &ReconParams,
) -> Result<Image<T>> {
    params.validate()?;
    let aty = adjoint(y, smaps, mask)?;
    let normal = NormalOp::new(smaps, mask, T::of(params.lambda))?;
    reconstruct_from_adjoint(aty, &normal, params)
}

/// Same as [`reconstruct`] on a prepared acquisition for an arbitrary
/// column set.
pub fn reconstruct_lines<T: Scalar>(acq: &Acquisition<T>, lines: &[usize], params: &ReconParams) -> Result<Image<T>> {
    params.validate()?;
    let normal = acq.normal_op(lines, T::of(params.lambda));
    reconstruct_from_adjoint(acq.adjoint_lines(lines), &normal, params)
}

/// Mean NMSE of one parameter setting over `(scan, mask)` pairs.
pub fn mean_nmse<T: Scalar>(pairs: &[(&Acquisition<T>, &Image<T>, &LineMask)], params: &ReconParams) -> Result<f64> {
    let losses = pairs
        .par_iter()
        .map(|(acq, gt, mask)| {
            let rec = reconstruct_lines(acq, mask.lines(), params)?;
            Ok(nmse(gt, &rec)?.to_f64_lossy())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Relative tolerance under which two grid scores count as tied.
pub const TUNE_TIE_TOL: f64 = 1e-12;

/// Picks the grid element with the lowest mean NMSE over `(scan, mask)`
/// pairs. Ties go to smaller `lambda`, then smaller `denoiser_sigma`, then
/// fewer `n_blocks`, then grid order.
pub fn tune_reconstructor<T: Scalar>(
    scans: &[(ScanBundle<T>, LineMask)],
    kind: ReconKind,
    grid: &[ReconParams],
) -> Result<ReconParams> {
    ensure!(!scans.is_empty(), InvalidInput, "no scans to tune the reconstructor on");
    let acqs = scans.iter().map(|(s, _)| s.acquisition()).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = acqs.iter().zip(scans).map(|(a, (s, m))| (a, s.gt(), m)).collect();
    tune_prepared(&pairs, kind, grid).map(|(p, _)| p)
}

/// Grid search over already prepared acquisitions; returns the winner and
/// every grid score in grid order.
pub fn tune_prepared<T: Scalar>(
    pairs: &[(&Acquisition<T>, &Image<T>, &LineMask)],
    kind: ReconKind,
    grid: &[ReconParams],
) -> Result<(ReconParams, Vec<f64>)> {
    ensure!(!pairs.is_empty(), InvalidInput, "no scans to tune the reconstructor on");
    ensure!(!grid.is_empty(), InvalidInput, "empty reconstructor grid");
    for p in grid {
        ensure!(p.kind == kind, InvalidInput, "grid entry of kind {} while tuning {kind}", p.kind);
        p.validate()?;
    }
    let scores = grid.iter().map(|p| mean_nmse(pairs, p)).collect::<Result<Vec<_>>>()?;
    Ok((grid[select_best(grid, &scores)], scores))
}

fn select_best(grid: &[ReconParams], scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tied = |s: f64| s <= best + TUNE_TIE_TOL * best.abs();
    let mut winner: Option<usize> = None;
    for (i, p) in grid.iter().enumerate() {
        if !tied(scores[i]) {
            continue;
        }
        winner = match winner {
            None => Some(i),
            Some(j) => {
                let q = &grid[j];
                let key = |p: &ReconParams| (p.lambda, p.denoiser_sigma, p.n_blocks);
                if key(p).partial_cmp(&key(q)) == Some(std::cmp::Ordering::Less) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    winner.expect("at least one score equals the minimum")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex<f64> {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn setup(nc: usize, h: usize, w: usize, seed: u64) -> (Image<f64>, CoilMaps<f64>, KSpace<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..nc * h * w).map(|_| rand_c(&mut rng) + Complex::new(1.0, 0.0)).collect();
        let maps = CoilMaps::normalized(nc, h, w, raw, vec![true; h * w]).unwrap();
        let x = Image::from_fn(h, w, |_, _| rand_c(&mut rng));
        let y = forward(&x, &maps, &LineMask::full(w)).unwrap();
        (x, maps, y)
    }

    #[test]
    fn identity_operator_converges_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = Image::from_fn(4, 4, |_, _| rand_c(&mut rng));
        let id = |x: &[Complex<f64>], out: &mut [Complex<f64>]| out.copy_from_slice(x);
        let out = cg_solve(&id, &b, None, 1e-10, 50).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let id = |x: &[Complex<f64>], out: &mut [Complex<f64>]| out.copy_from_slice(x);
        let out = cg_solve(&id, &Image::zeros(3, 3), None, 1e-10, 50).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x.norm_sqr(), 0.0);
    }

    #[test]
    fn indefinite_operator_is_a_numerical_failure() {
        let neg = |x: &[Complex<f64>], out: &mut [Complex<f64>]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = -v;
            }
        };
        let b = Image::from_fn(2, 2, |_, _| Complex::new(1.0, 0.0));
        assert!(matches!(cg_solve(&neg, &b, None, 1e-10, 10), Err(Error::Numerical(_))));
        let nan = |_: &[Complex<f64>], out: &mut [Complex<f64>]| out.fill(Complex::new(f64::NAN, 0.0));
        assert!(matches!(cg_solve(&nan, &b, None, 1e-10, 10), Err(Error::Numerical(_))));
    }

    #[test]
    fn full_mask_reconstructions_are_exact() {
        let (x, maps, y) = setup(3, 8, 8, 2);
        let full = LineMask::full(8);
        for params in [ReconParams::zero_filled(), ReconParams::tikhonov(0.0), ReconParams::tikhonov(1e-12)] {
            let rec = reconstruct(&y, &maps, &full, &params).unwrap();
            for (a, b) in rec.data().iter().zip(x.data()) {
                assert!((a - b).norm() < 1e-8, "{params:?}");
            }
        }
        let normal = NormalOp::new(&maps, &full, 0.0).unwrap();
        let aty = adjoint(&y, &maps, &full).unwrap();
        assert_eq!(cg_solve(&normal, &aty, None, 1e-8, 50).unwrap().iterations, 1);
    }

    #[test]
    fn modl_single_block_identity_denoiser_is_one_cg_solve() {
        let (_, maps, y) = setup(2, 8, 8, 3);
        let mask = LineMask::from_lines(8, vec![1, 3, 4, 6]).unwrap();
        let params = ReconParams::modl(0.05, 0.0, 1);
        let rec = reconstruct(&y, &maps, &mask, &params).unwrap();
        let aty = adjoint(&y, &maps, &mask).unwrap();
        let rhs = aty.add_scaled(Complex::new(0.05, 0.0), &aty).unwrap();
        let normal = NormalOp::new(&maps, &mask, 0.05).unwrap();
        let direct = cg_solve(&normal, &rhs, None, params.cg_tol, params.cg_maxiter).unwrap().x;
        assert_eq!(rec, direct);
    }

    #[test]
    fn prepared_and_direct_paths_agree() {
        let (_, maps, y) = setup(2, 8, 10, 4);
        let mask = LineMask::from_lines(10, vec![0, 4, 5, 9]).unwrap();
        let acq = Acquisition::new(&y, &maps).unwrap();
        for params in [ReconParams::zero_filled(), ReconParams::tikhonov(0.01), ReconParams::modl(0.01, 1.0, 2)] {
            let a = reconstruct(&y, &maps, &mask, &params).unwrap();
            let b = reconstruct_lines(&acq, mask.lines(), &params).unwrap();
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let img = Image::from_fn(9, 7, |_, _| Complex::new(2.0, -1.0));
        let b = gaussian_blur(&img, 1.5);
        for z in b.data() {
            assert!((z - Complex::new(2.0, -1.0)).norm() < 1e-12);
        }
        assert_eq!(gaussian_blur(&img, 0.0), img);
        // radius larger than the image still mirrors correctly
        let tiny = Image::from_fn(2, 2, |r, c| Complex::new((r + c) as f64, 0.0));
        let t = gaussian_blur(&tiny, 3.0);
        assert!((t.data().iter().map(|z| z.re).sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_indexing() {
        assert_eq!(mirror(-1, 4), 0);
        assert_eq!(mirror(-2, 4), 1);
        assert_eq!(mirror(4, 4), 3);
        assert_eq!(mirror(9, 4), 1);
    }

    #[test]
    fn params_json_field_names() {
        let p = ReconParams::modl(0.01, 1.0, 3);
        let v: serde_json::Value = serde_json::to_value(p).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["cg_maxiter", "cg_tol", "denoiser_sigma", "kind", "lambda", "n_blocks"]);
        assert_eq!(v["kind"], "modl-unrolled");
        let back: ReconParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"kind":"tikhonov-cg","lambda":-1,"n_blocks":1,"cg_tol":1e-8,"cg_maxiter":5,"denoiser_sigma":0}"#;
        assert!(serde_json::from_str::<ReconParams>(bad).is_err());
    }

    #[test]
    fn tie_break_prefers_small_lambda_then_sigma_then_blocks() {
        let grid = vec![
            ReconParams::modl(0.1, 1.0, 3),
            ReconParams::modl(0.01, 2.0, 1),
            ReconParams::modl(0.01, 1.0, 3),
            ReconParams::modl(0.01, 1.0, 1),
            ReconParams::modl(0.001, 0.5, 1),
        ];
        assert_eq!(select_best(&grid, &[0.2, 0.2, 0.2, 0.2, 0.3]), 3);
        assert_eq!(select_best(&grid, &[0.1, 0.2, 0.2, 0.2, 0.3]), 0);
    }
}
