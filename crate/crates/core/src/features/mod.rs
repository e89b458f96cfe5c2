//! Border, asymmetry and color measurements of a segmented lesion.

mod plots;
mod report;

pub use plots::{render_plots, PlotArtifact};
pub use report::{build_technical_report, parse_technical_report, TechnicalReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{
    component_labels, fill_holes, mask_area, reflect_mask, symmetric_difference_ratio, Axis, BinaryMask,
    Contour, ImagingError, RasterImage,
};
use crate::segmentation::{
    contour_perimeter, extract_contours, largest_contour, segment_lesion, GrabCutParams, SegmentationError,
};

/// Rasterized outlines can overshoot the analytic bound slightly.
pub const CIRCULARITY_CEILING: f64 = 1.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("area and perimeter must be positive (got {area}, {perimeter})")]
    NonPositive { area: f64, perimeter: f64 },
    #[error("mask is empty or collinear; principal axes are undefined")]
    DegenerateMask,
    #[error("mask is empty")]
    EmptyMask,
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error("technical report is missing the `{0}` field")]
    ReportField(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionFeatures {
    pub area: f64,
    pub perimeter: f64,
    pub circularity: f64,
    pub asymmetry_major: f64,
    pub asymmetry_minor: f64,
    pub asymmetry_avg: f64,
    /// Population standard deviation of R, G, B over the lesion.
    pub color_std: [f64; 3],
}

impl LesionFeatures {
    /// Derives circularity and the asymmetry average from the raw measurements.
    pub fn from_measurements(
        area: f64,
        perimeter: f64,
        asymmetry_major: f64,
        asymmetry_minor: f64,
        color_std: [f64; 3],
    ) -> Result<Self, FeatureError> {
        Ok(Self {
            area,
            perimeter,
            circularity: circularity(area, perimeter)?,
            asymmetry_major,
            asymmetry_minor,
            asymmetry_avg: (asymmetry_major + asymmetry_minor) / 2.0,
            color_std,
        })
    }
}

/// `4 * pi * area / perimeter^2`, clamped to `(0, 1.05]`.
pub fn circularity(area: f64, perimeter: f64) -> Result<f64, FeatureError> {
    if !(area > 0.0 && perimeter > 0.0) {
        return Err(FeatureError::NonPositive { area, perimeter });
    }
    Ok((4.0 * std::f64::consts::PI * area / (perimeter * perimeter)).min(CIRCULARITY_CEILING))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAxes {
    pub centroid: (f64, f64),
    pub major_axis: (f64, f64),
    pub minor_axis: (f64, f64),
    /// Second central moments along the major and minor axes.
    pub eigenvalues: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Major,
    Minor,
}

impl PrincipalAxes {
    pub fn axis(&self, kind: AxisKind) -> Axis {
        let dir = match kind {
            AxisKind::Major => self.major_axis,
            AxisKind::Minor => self.minor_axis,
        };
        Axis::new(self.centroid, dir)
    }
}

fn sign_normalize((x, y): (f64, f64)) -> (f64, f64) {
    const EPS: f64 = 1e-12;
    if x > EPS || (x.abs() <= EPS && y > 0.0) {
        (x, y)
    } else {
        (-x, -y)
    }
}

/// Centroid and eigenvectors of the 2x2 second-central-moment matrix.
/// Equal eigenvalues (disks, squares) resolve to the image axes.
pub fn principal_axes(mask: &BinaryMask) -> Result<PrincipalAxes, FeatureError> {
    let n = mask_area(mask);
    if n < 3 {
        return Err(FeatureError::DegenerateMask);
    }
    let (cx, cy) = mask.centroid().ok_or(FeatureError::DegenerateMask)?;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in mask.foreground() {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (mxx, myy, mxy) = (sxx / n as f64, syy / n as f64, sxy / n as f64);
    let half_trace = (mxx + myy) / 2.0;
    let spread = (((mxx - myy) / 2.0).powi(2) + mxy * mxy).sqrt();
    let (l1, l2) = (half_trace + spread, half_trace - spread);
    if l2 <= 1e-9 * l1.max(1e-300) {
        return Err(FeatureError::DegenerateMask);
    }
    let major = if spread <= 1e-9 * half_trace {
        (1.0, 0.0)
    } else if mxy.abs() > 1e-12 * l1 {
        let v = (l1 - myy, mxy);
        let norm = v.0.hypot(v.1);
        (v.0 / norm, v.1 / norm)
    } else if mxx >= myy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let major = sign_normalize(major);
    let minor = sign_normalize((-major.1, major.0));
    Ok(PrincipalAxes { centroid: (cx, cy), major_axis: major, minor_axis: minor, eigenvalues: (l1, l2) })
}

/// Union-normalized symmetric difference between the mask and its mirror
/// image across the chosen principal axis. Zero is perfect mirror symmetry.
pub fn asymmetry(mask: &BinaryMask, axis: AxisKind) -> Result<f64, FeatureError> {
    let axes = principal_axes(mask)?;
    asymmetry_about(mask, &axes, axis)
}

fn asymmetry_about(mask: &BinaryMask, axes: &PrincipalAxes, axis: AxisKind) -> Result<f64, FeatureError> {
    let mirrored = reflect_mask(mask, &axes.axis(axis))?;
    Ok(symmetric_difference_ratio(mask, &mirrored)?)
}

/// Population standard deviation of each channel over foreground pixels.
pub fn color_variability(image: &RasterImage, mask: &BinaryMask) -> Result<[f64; 3], FeatureError> {
    if (image.width(), image.height()) != mask.dims() {
        return Err(ImagingError::DimensionMismatch {
            a: (image.width(), image.height()),
            b: mask.dims(),
        }
        .into());
    }
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for (x, y) in mask.foreground() {
        let p = image.get(x, y);
        for c in 0..3 {
            sum[c] += p[c] as f64;
        }
        n += 1;
    }
    if n == 0 {
        return Err(FeatureError::EmptyMask);
    }
    let mean = sum.map(|s| s / n as f64);
    let mut var = [0.0f64; 3];
    for (x, y) in mask.foreground() {
        let p = image.get(x, y);
        for c in 0..3 {
            var[c] += (p[c] as f64 - mean[c]).powi(2);
        }
    }
    Ok(var.map(|v| (v / n as f64).sqrt()))
}

/// The region enclosed by `contour`: its 8-connected component in `mask`
/// with interior holes filled.
pub fn enclosed_region(mask: &BinaryMask, contour: &Contour) -> BinaryMask {
    let (labels, _) = component_labels(mask);
    let (sx, sy) = contour.points()[0];
    let label = labels[sy as usize * mask.width() + sx as usize];
    let bits = labels.iter().map(|&l| l == label && l != 0).collect();
    let component = BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("same dimensions");
    fill_holes(&component)
}

/// Measurements of the largest contour's region in `mask`.
///
/// Area is the pixel count of the enclosed region (boundary pixels
/// included); perimeter is the traced contour length.
pub fn measure_lesion(image: &RasterImage, mask: &BinaryMask) -> Result<LesionMeasurement, FeatureError> {
    let contours = extract_contours(mask);
    let contour = largest_contour(&contours)?.clone();
    let region = enclosed_region(mask, &contour);
    let area = mask_area(&region) as f64;
    let perimeter = contour_perimeter(&contour)?;
    let axes = principal_axes(&region)?;
    let major = asymmetry_about(&region, &axes, AxisKind::Major)?;
    let minor = asymmetry_about(&region, &axes, AxisKind::Minor)?;
    let color_std = color_variability(image, &region)?;
    let features = LesionFeatures::from_measurements(area, perimeter, major, minor, color_std)?;
    Ok(LesionMeasurement { features, region, contour, axes })
}

#[derive(Debug, Clone)]
pub struct LesionMeasurement {
    pub features: LesionFeatures,
    pub region: BinaryMask,
    pub contour: Contour,
    pub axes: PrincipalAxes,
}

/// Segmentation, measurement and report for one image.
pub fn assess_lesion(image: &RasterImage, params: &GrabCutParams) -> Result<LesionAssessment, FeatureError> {
    let mask = segment_lesion(image, params)?;
    let measurement = measure_lesion(image, &mask)?;
    let plots = render_plots(image, &measurement)?;
    let mut report = build_technical_report(&measurement.features);
    report.plots = plots;
    Ok(LesionAssessment { measurement, report })
}

#[derive(Debug, Clone)]
pub struct LesionAssessment {
    pub measurement: LesionMeasurement,
    pub report: TechnicalReport,
}
