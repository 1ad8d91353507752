//! Synthetic multi-coil scans: randomized Shepp-Logan-style phantoms with a
//! smooth phase, Gaussian-profile receive coils on a ring, and noisy fully
//! sampled k-space.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{ensure, Result};
use crate::image::{CoilMaps, Image, KSpace};
use crate::mask::LineMask;
use crate::operator::forward;
use crate::seed::rng_from;
use crate::Scalar;

pub const MIN_PHANTOM_SIZE: usize = 16;

/// `(intensity, semi-axis x, semi-axis y, centre x, centre y, angle in degrees)`
/// of the modified Shepp-Logan head.
const ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

fn uniform(rng: &mut impl Rng, half_width: f64) -> f64 {
    rng.random_range(-half_width..=half_width)
}

/// Normalized coordinate of pixel `i` on an axis of `n` pixels, centre at
/// `n / 2`, spanning roughly `[-1, 1)`.
fn axis_coord(i: usize, n: usize) -> f64 {
    (i as f64 - (n / 2) as f64) / (n as f64 / 2.0)
}

/// Smooth phase built from the lowest spatial frequencies.
fn smooth_field(rng: &mut impl Rng, h: usize, w: usize) -> Vec<f64> {
    let mut terms = Vec::new();
    for kx in 0..=2i32 {
        for ky in -2..=2i32 {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            let decay = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            terms.push((kx as f64, ky as f64, a * decay, b * decay));
        }
    }
    let mut field = Vec::with_capacity(h * w);
    for r in 0..h {
        let y = axis_coord(r, h);
        for c in 0..w {
            let x = axis_coord(c, w);
            let v: f64 = terms
                .iter()
                .map(|&(kx, ky, a, b)| {
                    let arg = FRAC_PI_2 * (kx * x + ky * y);
                    a * arg.cos() + b * arg.sin()
                })
                .sum();
            field.push(v);
        }
    }
    field
}

/// Randomized phantom, deterministic per seed, magnitude normalized to a
/// maximum of one and multiplied by a smooth phase with `|φ| ≤ π/2`.
pub fn gen_phantom(seed: u64, height: usize, width: usize) -> Result<Image<f64>> {
    ensure!(
        height >= MIN_PHANTOM_SIZE && width >= MIN_PHANTOM_SIZE,
        InvalidInput,
        "phantom needs at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {height}x{width}"
    );
    let mut rng = rng_from(seed);

    // The skull pair shares one perturbation so the brain stays inside it.
    let head_dx = uniform(&mut rng, 0.05);
    let head_dy = uniform(&mut rng, 0.05);
    let head_scale = 1.0 + uniform(&mut rng, 0.05);
    let head_angle = uniform(&mut rng, 15.0);

    let mut ellipses = Vec::with_capacity(ELLIPSES.len());
    for (i, e) in ELLIPSES.iter().enumerate() {
        let [a, ax, ay, cx, cy, ang] = *e;
        let p = if i < 2 {
            [a, ax * head_scale, ay * head_scale, cx + head_dx, cy + head_dy, ang + head_angle]
        } else {
            [
                a * (1.0 + uniform(&mut rng, 0.2)),
                ax * (1.0 + uniform(&mut rng, 0.15)),
                ay * (1.0 + uniform(&mut rng, 0.15)),
                cx + uniform(&mut rng, 0.1) + head_dx,
                cy + uniform(&mut rng, 0.1) + head_dy,
                ang + uniform(&mut rng, 15.0) + head_angle,
            ]
        };
        ellipses.push(p);
    }

    let mut magnitude = vec![0.0; height * width];
    for r in 0..height {
        let y = axis_coord(r, height);
        for c in 0..width {
            let x = axis_coord(c, width);
            let mut v = 0.0;
            for &[a, ax, ay, cx, cy, ang] in &ellipses {
                let (s, co) = (ang * PI / 180.0).sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let u = dx * co + dy * s;
                let t = -dx * s + dy * co;
                if (u / ax).powi(2) + (t / ay).powi(2) <= 1.0 {
                    v += a;
                }
            }
            magnitude[r * width + c] = v.max(0.0);
        }
    }
    let peak = magnitude.iter().copied().fold(0.0, f64::max);
    ensure!(peak > 0.0, InvalidInput, "phantom came out empty for seed {seed}");

    let mut phase = smooth_field(&mut rng, height, width);
    let max_abs = phase.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let target = FRAC_PI_2 * rng.random_range(0.3..=1.0);
    if max_abs > 0.0 {
        phase.iter_mut().for_each(|p| *p *= target / max_abs);
    }

    let data = magnitude.iter().zip(&phase).map(|(m, p)| Complex::from_polar(m / peak, *p)).collect();
    Image::new(height, width, data)
}

/// `ncoils` Gaussian-profile coils on a ring around the field of view with a
/// smooth linear phase each, root-sum-of-squares normalized on `support`.
pub fn gen_smaps(seed: u64, ncoils: usize, height: usize, width: usize, support: &[bool]) -> Result<CoilMaps<f64>> {
    ensure!(ncoils >= 1, InvalidInput, "need at least one coil");
    ensure!(height > 0 && width > 0, InvalidInput, "coil maps need a nonempty grid");
    let mut rng = rng_from(seed);
    let mut raw = Vec::with_capacity(ncoils * height * width);
    for c in 0..ncoils {
        let theta = 2.0 * PI * c as f64 / ncoils as f64 + uniform(&mut rng, 0.2);
        let radius = 1.2 + uniform(&mut rng, 0.1);
        let (cx, cy) = (radius * theta.cos(), radius * theta.sin());
        let spread = rng.random_range(0.7..=1.0);
        let offset = uniform(&mut rng, PI);
        let gx = uniform(&mut rng, 0.5);
        let gy = uniform(&mut rng, 0.5);
        for r in 0..height {
            let y = axis_coord(r, height);
            for col in 0..width {
                let x = axis_coord(col, width);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-d2 / (2.0 * spread * spread)).exp();
                raw.push(Complex::from_polar(mag, offset + gx * x + gy * y));
            }
        }
    }
    CoilMaps::normalized(ncoils, height, width, raw, support.to_vec())
}

/// Fully sampled `F (S_c ⊙ x)` plus i.i.d. complex Gaussian noise with
/// standard deviation `noise_sigma` per real component.
pub fn simulate_kspace<T: Scalar>(x: &Image<T>, smaps: &CoilMaps<T>, noise_sigma: f64, seed: u64) -> Result<KSpace<T>> {
    ensure!(noise_sigma >= 0.0 && noise_sigma.is_finite(), InvalidInput, "noise sigma must be ≥ 0");
    let mut k = forward(x, smaps, &LineMask::full(x.width()))?;
    if noise_sigma > 0.0 {
        let mut rng = rng_from(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
        for z in k.data_mut() {
            z.re += T::of(normal.sample(&mut rng));
            z.im += T::of(normal.sample(&mut rng));
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmse;

    #[test]
    fn phantom_is_deterministic_and_normalized() {
        let a = gen_phantom(3, 32, 32).unwrap();
        let b = gen_phantom(3, 32, 32).unwrap();
        assert_eq!(a, b);
        let peak = a.magnitude().into_iter().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        assert!(gen_phantom(3, 8, 32).is_err());
    }

    #[test]
    fn phantom_phase_is_bounded() {
        let a = gen_phantom(9, 48, 40).unwrap();
        for z in a.data() {
            if z.norm() > 0.0 {
                assert!(z.arg().abs() <= FRAC_PI_2 + 1e-12);
            }
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_anatomy() {
        for s in 0..10u64 {
            let a = gen_phantom(s, 64, 64).unwrap();
            let b = gen_phantom(s + 100, 64, 64).unwrap();
            assert!(nmse(&a, &b).unwrap() > 0.01);
        }
    }

    #[test]
    fn single_coil_has_unit_magnitude() {
        let maps = gen_smaps(1, 1, 16, 16, &[true; 256]).unwrap();
        for z in maps.data() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maps_are_normalized_and_smooth() {
        for nc in [2, 4, 8] {
            let maps = gen_smaps(nc as u64, nc, 64, 64, &[true; 64 * 64]).unwrap();
            for v in maps.rss_sqr() {
                assert!((v - 1.0).abs() < 1e-6);
            }
            let mut max_grad: f64 = 0.0;
            for c in 0..nc {
                let s = maps.coil(c);
                for r in 0..63 {
                    for col in 0..63 {
                        let p = s[r * 64 + col];
                        let gx = s[r * 64 + col + 1] - p;
                        let gy = s[(r + 1) * 64 + col] - p;
                        max_grad = max_grad.max((gx.norm_sqr() + gy.norm_sqr()).sqrt());
                    }
                }
            }
            assert!(max_grad < 0.2, "{nc} coils: max gradient {max_grad}");
        }
    }

    #[test]
    fn maps_vanish_outside_support() {
        let mut support = vec![true; 256];
        support[0] = false;
        let maps = gen_smaps(2, 3, 16, 16, &support).unwrap();
        assert_eq!(maps.rss_sqr()[0], 0.0);
    }

    #[test]
    fn noiseless_kspace_is_forward_and_seeded_noise_repeats() {
        let x = gen_phantom(1, 16, 16).unwrap();
        let maps = gen_smaps(2, 2, 16, 16, &[true; 256]).unwrap();
        let clean = simulate_kspace(&x, &maps, 0.0, 5).unwrap();
        assert_eq!(clean, forward(&x, &maps, &LineMask::full(16)).unwrap());
        let a = simulate_kspace(&x, &maps, 0.01, 5).unwrap();
        let b = simulate_kspace(&x, &maps, 0.01, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_kspace(&x, &maps, 0.01, 6).unwrap());
    }

    #[test]
    fn noise_energy_matches_expectation() {
        let (nc, h, w, sigma) = (2usize, 16usize, 16usize, 0.05);
        let x = gen_phantom(1, h, w).unwrap();
        let maps = gen_smaps(2, nc, h, w, &vec![true; h * w]).unwrap();
        let clean = simulate_kspace(&x, &maps, 0.0, 0).unwrap();
        let mut total = 0.0;
        for seed in 0..100 {
            let noisy = simulate_kspace(&x, &maps, sigma, seed).unwrap();
            total += noisy.data().iter().zip(clean.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
        let expected = 2.0 * sigma * sigma * (nc * h * w) as f64;
        assert!(((total / 100.0) / expected - 1.0).abs() < 0.05);
    }
}
