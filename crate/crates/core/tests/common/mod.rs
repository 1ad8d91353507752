#![allow(dead_code)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanmask::{CoilMaps, Image, KSpace, LineMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> Complex<f64> {
    // Box-Muller is enough for test data.
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    let m = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    Complex::new(m * t.cos(), m * t.sin())
}

pub fn random_image(h: usize, w: usize, seed: u64) -> Image<f64> {
    let mut r = rng(seed);
    Image::from_fn(h, w, |_, _| gaussian(&mut r))
}

pub fn random_kspace(nc: usize, h: usize, w: usize, seed: u64) -> KSpace<f64> {
    let mut r = rng(seed);
    KSpace::new(nc, h, w, (0..nc * h * w).map(|_| gaussian(&mut r)).collect()).unwrap()
}

/// RSS-normalized random maps on full support.
pub fn random_maps(nc: usize, h: usize, w: usize, seed: u64) -> CoilMaps<f64> {
    let mut r = rng(seed);
    let raw = (0..nc * h * w).map(|_| gaussian(&mut r) + Complex::new(0.5, 0.0)).collect();
    CoilMaps::normalized(nc, h, w, raw, vec![true; h * w]).unwrap()
}

pub fn random_mask(width: usize, fraction: f64, seed: u64) -> LineMask {
    let mut r = rng(seed);
    let lines: Vec<usize> = (0..width).filter(|_| r.random::<f64>() < fraction).collect();
    LineMask::from_lines(width, lines).unwrap()
}

pub fn dot(a: &[Complex<f64>], b: &[Complex<f64>]) -> Complex<f64> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn l2(a: &[Complex<f64>]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let d: Vec<Complex<f64>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&d) / l2(b).max(f64::MIN_POSITIVE)
}
