//! Dermatology image workflow engine.
//!
//! Stages:
//!
//! 1. **imaging** – raster/mask primitives, grayscale, reflection geometry.
//! 2. **segmentation** – Otsu threshold refined by GrabCut, contour tracing.
//! 3. **features** – circularity, two-axis asymmetry, color variability and
//!    the technical report handed to the text model.
//! 4. **rules** – rules-of-conduct prompts, response parsing, path
//!    classification and diagnosis entity extraction.
//! 5. **orchestrator** – the case state machine over pluggable model providers.
//! 6. **evaluation** – textual similarity, BERTScore, NLI and expert review
//!    aggregated into a capability report.
//! 7. **service** – HTTP API, file-backed case store and CLI plumbing.

pub mod imaging;
pub mod orchestrator;
pub mod evaluation;
pub mod features;
pub mod rules;
pub mod segmentation;
pub mod service;
pub mod synthetic;
