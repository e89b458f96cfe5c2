//! Pixel buffers, binary masks, contours and the mask geometry shared by
//! segmentation and feature extraction.

mod morphology;

pub use morphology::{component_labels, dilate, fill_holes, squared_distance_to_foreground};

use std::io::Cursor;

use image::{ImageFormat, ImageReader};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("mask dimensions {a:?} and {b:?} differ")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("mask has no foreground pixels: no lesion")]
    EmptyMask,
    #[error("unsupported image format (only PNG and JPEG are accepted)")]
    UnsupportedFormat,
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error("could not encode image: {0}")]
    Encode(String),
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImagingError::BufferLength { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// Decodes PNG or JPEG bytes. Anything else is rejected.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImagingError> {
        let format = image::guess_format(bytes).map_err(|_| ImagingError::UnsupportedFormat)?;
        if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
            return Err(ImagingError::UnsupportedFormat);
        }
        let decoded = ImageReader::with_format(Cursor::new(bytes), format)
            .decode()
            .map_err(|e| ImagingError::Decode(e.to_string()))?
            .to_rgb8();
        let (w, h) = decoded.dimensions();
        let pixels = decoded.pixels().map(|p| p.0).collect();
        Self::new(w as usize, h as usize, pixels)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let buf = image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Rgb(self.get(x as usize, y as usize))
        });
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ImagingError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }
}

/// 8-bit luma image with the dimensions of its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    intensities: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, intensities: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyDimensions { width, height });
        }
        if intensities.len() != width * height {
            return Err(ImagingError::BufferLength {
                expected: width * height,
                actual: intensities.len(),
            });
        }
        Ok(Self { width, height, intensities })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[u8] {
        &self.intensities
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.intensities {
            hist[v as usize] += 1;
        }
        hist
    }
}

/// BT.601 luma, rounded to nearest.
pub fn to_grayscale(image: &RasterImage) -> GrayImage {
    let intensities = image.pixels.iter().map(|&rgb| luma(rgb)).collect();
    GrayImage { width: image.width, height: image.height, intensities }
}

pub fn luma([r, g, b]: [u8; 3]) -> u8 {
    // Fixed-point BT.601 with 1e4 scale keeps the rounding exact: 0.299/0.587/0.114.
    let scaled = 2990 * r as u32 + 5870 * g as u32 + 1140 * b as u32;
    ((scaled + 5000) / 10000).min(255) as u8
}

/// Foreground/background flag per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyDimensions { width, height });
        }
        Ok(Self { width, height, bits: vec![false; width * height] })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(ImagingError::BufferLength { expected: width * height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ImagingError> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                mask.bits[y * width + x] = f(x, y);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds reads are background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bb: Option<BoundingBox> = None;
        for (x, y) in self.foreground() {
            bb = Some(match bb {
                None => BoundingBox { min_x: x, min_y: y, max_x: x, max_y: y },
                Some(b) => BoundingBox {
                    min_x: b.min_x.min(x),
                    min_y: b.min_y.min(y),
                    max_x: b.max_x.max(x),
                    max_y: b.max_y.max(y),
                },
            });
        }
        bb
    }

    fn check_dims(&self, other: &Self) -> Result<(), ImagingError> {
        if self.dims() != other.dims() {
            return Err(ImagingError::DimensionMismatch { a: self.dims(), b: other.dims() });
        }
        Ok(())
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<Self, ImagingError> {
        self.check_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { width: self.width, height: self.height, bits })
    }

    pub fn and(&self, other: &Self) -> Result<Self, ImagingError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Result<Self, ImagingError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn xor(&self, other: &Self) -> Result<Self, ImagingError> {
        self.zip_with(other, |a, b| a != b)
    }

    pub fn not(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Intersection over union; 1.0 when both masks are empty.
    pub fn iou(&self, other: &Self) -> Result<f64, ImagingError> {
        let inter = mask_area(&self.and(other)?);
        let union = mask_area(&self.or(other)?);
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (x, y) in self.foreground() {
            sx += x as f64;
            sy += y as f64;
            n += 1;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Rotates by 90 degrees clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = self.dims();
        let mut out = Self { width: h, height: w, bits: vec![false; w * h] };
        for (x, y) in self.foreground() {
            out.set(h - 1 - y, x, true);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    /// Grows the box by `margin` on every side, clipped to `width`x`height`.
    pub fn expand(&self, margin: usize, width: usize, height: usize) -> Self {
        Self {
            min_x: self.min_x.saturating_sub(margin),
            min_y: self.min_y.saturating_sub(margin),
            max_x: (self.max_x + margin).min(width - 1),
            max_y: (self.max_y + margin).min(height - 1),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// Closed 8-connected boundary through pixel centers.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Contour {
    points: Vec<(i64, i64)>,
}

impl Contour {
    /// Validates closure and 8-adjacency; at least three points are required.
    pub fn new(points: Vec<(i64, i64)>) -> Option<Self> {
        if points.len() < 3 {
            return None;
        }
        let n = points.len();
        let adjacent = (0..n).all(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            let (dx, dy) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
            dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
        });
        adjacent.then_some(Self { points })
    }

    /// Polygon vertices, not necessarily 8-adjacent. Used for analytic shapes.
    pub fn polygon(points: Vec<(i64, i64)>) -> Option<Self> {
        (points.len() >= 3).then_some(Self { points })
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn mask_area(mask: &BinaryMask) -> usize {
    mask.bits.iter().filter(|&&b| b).count()
}

/// A line through `origin` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: (f64, f64),
    pub direction: (f64, f64),
}

impl Axis {
    pub fn new(origin: (f64, f64), direction: (f64, f64)) -> Self {
        let norm = direction.0.hypot(direction.1);
        Self { origin, direction: (direction.0 / norm, direction.1 / norm) }
    }

    pub fn reflect(&self, (px, py): (f64, f64)) -> (f64, f64) {
        let (ox, oy) = self.origin;
        let (ux, uy) = self.direction;
        let (dx, dy) = (px - ox, py - oy);
        let along = dx * ux + dy * uy;
        (ox + 2.0 * along * ux - dx, oy + 2.0 * along * uy - dy)
    }
}

/// Mirror image of `mask` across `axis`, nearest-pixel rounding.
///
/// Each output pixel takes the value of the source pixel nearest to its
/// mirror position. Because a reflection is its own inverse this is the
/// foreground mapped to its mirror positions, without the holes a forward
/// scatter leaves when rounding. Mirror positions outside the frame are
/// background.
pub fn reflect_mask(mask: &BinaryMask, axis: &Axis) -> Result<BinaryMask, ImagingError> {
    if mask.is_empty() {
        return Err(ImagingError::EmptyMask);
    }
    let mut out = BinaryMask::new(mask.width, mask.height)?;
    for y in 0..mask.height {
        for x in 0..mask.width {
            let (mx, my) = axis.reflect((x as f64, y as f64));
            if mask.get_signed(mx.round() as i64, my.round() as i64) {
                out.set(x, y, true);
            }
        }
    }
    Ok(out)
}

/// `|a XOR b| / |a OR b|`, zero when both masks are empty.
pub fn symmetric_difference_ratio(a: &BinaryMask, b: &BinaryMask) -> Result<f64, ImagingError> {
    a.check_dims(b)?;
    let (mut diff, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        diff += (p != q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 0.0 } else { diff as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        let img = RasterImage::new(3, 1, vec![[255, 255, 255], [0, 0, 0], [100, 150, 200]]).unwrap();
        assert_eq!(to_grayscale(&img).intensities(), &[255, 0, 141]);
    }

    #[test]
    fn grayscale_matches_float_formula() {
        for r in (0..=255u32).step_by(5) {
            for g in (0..=255u32).step_by(7) {
                for b in (0..=255u32).step_by(11) {
                    // Exact rational value; ties round up.
                    let exact = 299 * r + 587 * g + 114 * b;
                    let expected = (exact * 2 + 1000) / 2000;
                    let float = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                    assert_eq!(luma([r as u8, g as u8, b as u8]) as u32, expected, "{r} {g} {b}");
                    assert!((luma([r as u8, g as u8, b as u8]) as f64 - float).abs() <= 0.5 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(RasterImage::new(0, 3, vec![]), Err(ImagingError::EmptyDimensions { .. })));
        assert!(matches!(
            RasterImage::new(2, 2, vec![[0; 3]; 3]),
            Err(ImagingError::BufferLength { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn decode_rejects_text() {
        assert_eq!(RasterImage::decode(b"hello, not an image"), Err(ImagingError::UnsupportedFormat));
    }

    #[test]
    fn png_round_trip() {
        let img = RasterImage::new(2, 2, vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]]).unwrap();
        let bytes = img.encode_png().unwrap();
        assert_eq!(RasterImage::decode(&bytes).unwrap(), img);
    }

    #[test]
    fn area_examples() {
        assert_eq!(mask_area(&BinaryMask::new(10, 10).unwrap()), 0);
        assert_eq!(mask_area(&BinaryMask::from_fn(10, 10, |_, _| true).unwrap()), 100);
        let disk = BinaryMask::from_fn(101, 101, |x, y| {
            let (dx, dy) = (x as i64 - 50, y as i64 - 50);
            dx * dx + dy * dy <= 1600
        })
        .unwrap();
        // Lattice-point count for x^2 + y^2 <= 40^2.
        assert_eq!(mask_area(&disk), 5025);
        let rel = (5025.0 - std::f64::consts::PI * 1600.0).abs() / (std::f64::consts::PI * 1600.0);
        assert!(rel < 0.02);
    }

    #[test]
    fn reflect_symmetric_rectangle_is_fixed_point() {
        let m = rect(20, 20, 4, 6, 14, 12);
        let c = m.centroid().unwrap();
        for dir in [(1.0, 0.0), (0.0, 1.0)] {
            assert_eq!(reflect_mask(&m, &Axis::new(c, dir)).unwrap(), m);
        }
    }

    #[test]
    fn reflect_single_pixel() {
        let mut m = BinaryMask::new(5, 5).unwrap();
        m.set(2, 3, true);
        let c = m.centroid().unwrap();
        assert_eq!(reflect_mask(&m, &Axis::new(c, (0.6, 0.8))).unwrap(), m);
    }

    #[test]
    fn reflect_l_shape_across_vertical_line() {
        // L: vertical bar x=2, y=1..=6 plus foot y=6, x=2..=5.
        let mut m = BinaryMask::new(10, 8).unwrap();
        let cells: Vec<(usize, usize)> =
            (1..=6).map(|y| (2, y)).chain((3..=5).map(|x| (x, 6))).collect();
        for &(x, y) in &cells {
            m.set(x, y, true);
        }
        let (cx, cy) = m.centroid().unwrap();
        let out = reflect_mask(&m, &Axis::new((cx, cy), (0.0, 1.0))).unwrap();
        // Oracle: x' = round(2*cx - x), same y.
        let mut expected = BinaryMask::new(10, 8).unwrap();
        for &(x, y) in &cells {
            let xr = (2.0 * cx - x as f64).round() as i64;
            if (0..10).contains(&xr) {
                expected.set(xr as usize, y, true);
            }
        }
        assert_eq!(out, expected);
    }

    #[test]
    fn reflect_empty_mask_errors() {
        let m = BinaryMask::new(4, 4).unwrap();
        assert_eq!(reflect_mask(&m, &Axis::new((1.0, 1.0), (1.0, 0.0))), Err(ImagingError::EmptyMask));
    }

    #[test]
    fn symmetric_difference_examples() {
        let a = rect(10, 10, 0, 0, 3, 3);
        assert_eq!(symmetric_difference_ratio(&a, &a).unwrap(), 0.0);
        let b = rect(10, 10, 5, 5, 8, 8);
        assert_eq!(symmetric_difference_ratio(&a, &b).unwrap(), 1.0);
        let half = rect(10, 10, 0, 0, 3, 1);
        assert_eq!(symmetric_difference_ratio(&a, &half).unwrap(), 0.5);
        let empty = BinaryMask::new(10, 10).unwrap();
        assert_eq!(symmetric_difference_ratio(&empty, &empty).unwrap(), 0.0);
        let other = BinaryMask::new(9, 10).unwrap();
        assert!(matches!(
            symmetric_difference_ratio(&a, &other),
            Err(ImagingError::DimensionMismatch { .. })
        ));
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn xor_area_identity(a in arb_mask(), seed in any::<u64>()) {
            let b = BinaryMask::from_fn(a.width(), a.height(), |x, y| {
                (seed.rotate_left((x * 7 + y * 13) as u32 % 64) & 1) == 1
            }).unwrap();
            let lhs = mask_area(&a.xor(&b).unwrap()) as i64;
            let rhs = mask_area(&a) as i64 + mask_area(&b) as i64
                - 2 * mask_area(&a.and(&b).unwrap()) as i64;
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn reflection_is_near_involution(
            cx in 30.0f64..50.0, cy in 30.0f64..50.0,
            a in 8.0f64..20.0, b in 8.0f64..20.0, theta in 0.0f64..std::f64::consts::PI,
            phi in 0.0f64..std::f64::consts::PI,
        ) {
            let (s, c) = theta.sin_cos();
            let m = BinaryMask::from_fn(80, 80, |x, y| {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }).unwrap();
            prop_assume!(mask_area(&m) >= 100);
            let axis = Axis::new(m.centroid().unwrap(), (phi.cos(), phi.sin()));
            let twice = reflect_mask(&reflect_mask(&m, &axis).unwrap(), &axis).unwrap();
            // Rounding can only lose pixels near the boundary.
            let boundary = m.foreground().filter(|&(x, y)| {
                let (x, y) = (x as i64, y as i64);
                !(m.get_signed(x - 1, y) && m.get_signed(x + 1, y) && m.get_signed(x, y - 1) && m.get_signed(x, y + 1))
            }).count();
            let lost = mask_area(&m) - mask_area(&m.and(&twice).unwrap());
            prop_assert!(lost <= boundary, "lost {} boundary {}", lost, boundary);
        }

        #[test]
        fn reflection_recovers_ninety_nine_percent_of_large_masks(
            a in 40.0f64..80.0, b in 40.0f64..80.0, theta in 0.0f64..std::f64::consts::PI,
            phi in 0.0f64..std::f64::consts::PI,
        ) {
            let (s, c) = theta.sin_cos();
            let m = BinaryMask::from_fn(200, 200, |x, y| {
                let (dx, dy) = (x as f64 - 100.0, y as f64 - 100.0);
                ((dx * c + dy * s) / a).powi(2) + ((-dx * s + dy * c) / b).powi(2) <= 1.0
            }).unwrap();
            let axis = Axis::new(m.centroid().unwrap(), (phi.cos(), phi.sin()));
            let twice = reflect_mask(&reflect_mask(&m, &axis).unwrap(), &axis).unwrap();
            let kept = mask_area(&m.and(&twice).unwrap()) as f64 / mask_area(&m) as f64;
            prop_assert!(kept >= 0.99, "kept {}", kept);
        }

        #[test]
        fn grayscale_bounded_and_gray_fixed(v in any::<u8>(), r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            prop_assert_eq!(luma([v, v, v]), v);
            let _ = luma([r, g, b]); // u8 by construction; exercises the clamp path
        }
    }
}
