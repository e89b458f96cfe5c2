//! Deterministic synthetic images: rasterized shapes for oracles and the
//! demo lesion used by the workflow fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imaging::{BinaryMask, RasterImage};

/// Pixel centers inside the ellipse with semi-axes `(a, b)` rotated by
/// `theta` radians about `center`.
pub fn ellipse_mask(width: usize, height: usize, center: (f64, f64), axes: (f64, f64), theta: f64) -> BinaryMask {
    let (s, c) = theta.sin_cos();
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / axes.0).powi(2) + (v / axes.1).powi(2) <= 1.0
    })
    .expect("non-empty dimensions")
}

/// Pixel centers with `(x - cx)^2 + (y - cy)^2 <= r^2`.
pub fn disk_mask(width: usize, height: usize, center: (f64, f64), radius: f64) -> BinaryMask {
    ellipse_mask(width, height, center, (radius, radius), 0.0)
}

pub fn paint(mask: &BinaryMask, fg: [u8; 3], bg: [u8; 3]) -> RasterImage {
    let pixels = mask.bits().iter().map(|&b| if b { fg } else { bg }).collect();
    RasterImage::new(mask.width(), mask.height(), pixels).expect("mask dimensions are valid")
}

/// `paint` plus i.i.d. Gaussian noise of standard deviation `sigma` per channel.
pub fn noisy_paint(mask: &BinaryMask, fg: [u8; 3], bg: [u8; 3], sigma: f64, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let pixels = mask
        .bits()
        .iter()
        .map(|&b| {
            let base = if b { fg } else { bg };
            let mut out = [0u8; 3];
            for c in 0..3 {
                out[c] = (base[c] as f64 + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    RasterImage::new(mask.width(), mask.height(), pixels).expect("mask dimensions are valid")
}

/// A 256x256 pigmented lesion: an irregular lobed outline with pink, red
/// and near-black regions on light skin, lightly textured.
pub fn demo_lesion_image() -> RasterImage {
    let (w, h) = (256usize, 256usize);
    let mut rng = ChaCha8Rng::seed_from_u64(0xde7a);
    let noise = Normal::new(0.0, 4.0).expect("finite sigma");
    let (cx, cy) = (128.0, 124.0);
    let pixels = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let (dx, dy) = (x - cx, y - cy);
            let angle = dy.atan2(dx);
            let radius = 70.0 + 9.0 * (3.0 * angle).sin() + 6.0 * (5.0 * angle + 0.7).cos() + 4.0 * (2.0 * angle).cos();
            let r = dx.hypot(dy);
            let base: [f64; 3] = if r <= radius {
                if dy > 18.0 && dx > -30.0 {
                    [45.0, 30.0, 35.0]
                } else if r < 0.5 * radius {
                    [150.0, 60.0, 70.0]
                } else {
                    [120.0, 70.0, 75.0]
                }
            } else {
                [214.0, 178.0, 160.0]
            };
            let jitter: f64 = noise.sample(&mut rng) + rng.random_range(-1.0..1.0);
            [
                (base[0] + jitter).round().clamp(0.0, 255.0) as u8,
                (base[1] + jitter).round().clamp(0.0, 255.0) as u8,
                (base[2] + jitter).round().clamp(0.0, 255.0) as u8,
            ]
        })
        .collect();
    RasterImage::new(w, h, pixels).expect("fixed dimensions")
}

/// A pale oval ulcer on pink mucosa.
pub fn demo_condition_image() -> RasterImage {
    let mask = ellipse_mask(192, 160, (96.0, 84.0), (34.0, 22.0), 0.3);
    noisy_paint(&mask, [228, 214, 170], [196, 96, 104], 5.0, 0xc0d)
}

/// Not skin at all: a grey mug body on a white table.
pub fn demo_object_image() -> RasterImage {
    let mask = BinaryMask::from_fn(128, 128, |x, y| (40..88).contains(&x) && (30..100).contains(&y)).expect("fixed dimensions");
    noisy_paint(&mask, [120, 124, 130], [245, 245, 242], 2.0, 0x0b1)
}

/// Uniform-colored disk on skin: a symmetric, benign-looking lesion.
pub fn demo_benign_image() -> RasterImage {
    let mask = disk_mask(160, 160, (80.0, 80.0), 40.0);
    noisy_paint(&mask, [110, 80, 70], [214, 178, 160], 3.0, 0xbe9)
}
