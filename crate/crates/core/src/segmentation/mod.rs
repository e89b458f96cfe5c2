//! Lesion isolation: Otsu thresholding refined by GrabCut, and boundary
//! contour extraction.

mod contour;
pub mod gmm;
mod grabcut;
pub mod maxflow;
mod otsu;

pub use contour::{contour_area, contour_perimeter, extract_contours, largest_contour};
pub use gmm::GaussianMixture;
pub use grabcut::{grabcut_refine_traced, GrabCutOutcome};
pub use otsu::{between_class_variance, otsu_threshold, OtsuResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BinaryMask, RasterImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("degenerate histogram: image has fewer than two distinct intensities")]
    DegenerateHistogram,
    #[error("uninitialized trimap: init mask needs both foreground and background pixels")]
    UninitializedTrimap,
    #[error("invalid grabcut parameters: {0}")]
    InvalidParams(String),
    #[error("image and mask dimensions differ")]
    DimensionMismatch,
    #[error("contour needs at least three points")]
    DegenerateContour,
    #[error("no lesion found")]
    NoLesion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrabCutParams {
    pub gmm_components: usize,
    pub iterations: usize,
    pub gamma: f64,
    /// 4 or 8.
    pub connectivity: u8,
    /// Init foreground dilated by this many pixels starts as probable foreground.
    pub probable_foreground_margin: usize,
    /// Pixels farther than this outside the init bounding box are locked background.
    pub locked_margin: usize,
}

impl Default for GrabCutParams {
    fn default() -> Self {
        Self {
            gmm_components: 5,
            iterations: 5,
            gamma: 50.0,
            connectivity: 8,
            probable_foreground_margin: 10,
            locked_margin: 20,
        }
    }
}

impl GrabCutParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.gmm_components < 1 {
            return Err(SegmentationError::InvalidParams("gmm_components must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(SegmentationError::InvalidParams("iterations must be >= 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(SegmentationError::InvalidParams("gamma must be > 0".into()));
        }
        if self.connectivity != 4 && self.connectivity != 8 {
            return Err(SegmentationError::InvalidParams("connectivity must be 4 or 8".into()));
        }
        Ok(())
    }
}

/// GrabCut refinement of an initial lesion mask.
pub fn grabcut_refine(
    image: &RasterImage,
    init: &BinaryMask,
    params: &GrabCutParams,
) -> Result<BinaryMask, SegmentationError> {
    grabcut_refine_traced(image, init, params).map(|o| o.mask)
}

/// Otsu on luma followed by GrabCut, the full segmentation front half.
pub fn segment_lesion(image: &RasterImage, params: &GrabCutParams) -> Result<BinaryMask, SegmentationError> {
    let gray = crate::imaging::to_grayscale(image);
    let otsu = otsu_threshold(&gray)?;
    grabcut_refine(image, &otsu.mask, params)
}
