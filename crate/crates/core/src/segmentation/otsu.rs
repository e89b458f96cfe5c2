use super::SegmentationError;
use crate::imaging::{BinaryMask, GrayImage};

/// Threshold and the mask of the darker class (`luma <= threshold`).
#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    pub threshold: u8,
    pub mask: BinaryMask,
}

/// Between-class variance of splitting the histogram into `<= t` and `> t`.
/// Zero when either class is empty.
pub fn between_class_variance(hist: &[u64; 256], t: u8) -> f64 {
    let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
    for (v, &c) in hist.iter().enumerate() {
        if v <= t as usize {
            n0 += c;
            s0 += c * v as u64;
        } else {
            n1 += c;
            s1 += c * v as u64;
        }
    }
    variance_from_sums(n0, s0, n1, s1)
}

fn variance_from_sums(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let total = (n0 + n1) as f64;
    let (w0, w1) = (n0 as f64 / total, n1 as f64 / total);
    let diff = s0 as f64 / n0 as f64 - s1 as f64 / n1 as f64;
    w0 * w1 * diff * diff
}

/// Otsu's threshold over `t in 0..=254`, smallest `t` on ties. The darker
/// class (`<= t`) becomes foreground.
pub fn otsu_threshold(gray: &GrayImage) -> Result<OtsuResult, SegmentationError> {
    let hist = gray.histogram();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SegmentationError::DegenerateHistogram);
    }
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &c)| c * v as u64).sum();

    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best = (0u8, f64::NEG_INFINITY);
    for t in 0..=254u8 {
        n0 += hist[t as usize];
        s0 += hist[t as usize] * t as u64;
        let var = variance_from_sums(n0, s0, total_n - n0, total_s - s0);
        if var > best.1 {
            best = (t, var);
        }
    }
    let threshold = best.0;
    let bits = gray.intensities().iter().map(|&v| v <= threshold).collect();
    let mask = BinaryMask::from_bits(gray.width(), gray.height(), bits)
        .expect("gray image dimensions are valid");
    Ok(OtsuResult { threshold, mask })
}
