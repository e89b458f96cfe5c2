//! C ABI over the segmentation, feature and evaluation entry points.
//!
//! Every function returns a [`DmStatus`]. On failure the message is kept per
//! thread and read with [`dm_last_error_message`]. Handles are opaque and
//! released with their `_free` function; strings returned through `char**`
//! are released with [`dm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use dermacen_core::evaluation::{run_evaluation, EvalError, ScoringConfig, Weights};
use dermacen_core::features::{assess_lesion, parse_technical_report, FeatureError, LesionAssessment, LesionFeatures};
use dermacen_core::imaging::{to_grayscale, ImagingError, RasterImage};
use dermacen_core::orchestrator::{MockProvider, ProviderSet, RetryPolicy};
use dermacen_core::segmentation::{otsu_threshold, GrabCutParams, SegmentationError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidImage = 3,
    NoLesion = 4,
    Segmentation = 5,
    Features = 6,
    Evaluation = 7,
    Io = 8,
    Panic = 9,
}

/// A decoded RGB image.
pub struct DmImage(RasterImage);

/// Segmentation, features and technical report for one image.
pub struct DmAssessment(LesionAssessment);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DmFeatures {
    pub area: f64,
    pub perimeter: f64,
    pub circularity: f64,
    pub asymmetry_major: f64,
    pub asymmetry_minor: f64,
    pub asymmetry_avg: f64,
    pub color_std: [f64; 3],
}

impl From<&LesionFeatures> for DmFeatures {
    fn from(f: &LesionFeatures) -> Self {
        Self {
            area: f.area,
            perimeter: f.perimeter,
            circularity: f.circularity,
            asymmetry_major: f.asymmetry_major,
            asymmetry_minor: f.asymmetry_minor,
            asymmetry_avg: f.asymmetry_avg,
            color_std: f.color_std,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DmStatus, String);

impl From<ImagingError> for Failure {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::EmptyMask => Failure(DmStatus::NoLesion, e.to_string()),
            _ => Failure(DmStatus::InvalidImage, e.to_string()),
        }
    }
}

impl From<SegmentationError> for Failure {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::NoLesion => Failure(DmStatus::NoLesion, e.to_string()),
            _ => Failure(DmStatus::Segmentation, e.to_string()),
        }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Imaging(e) => e.into(),
            FeatureError::Segmentation(e) => e.into(),
            FeatureError::EmptyMask => Failure(DmStatus::NoLesion, e.to_string()),
            _ => Failure(DmStatus::Features, e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let message = match &e {
            EvalError::Corpus(issues) => {
                let lines: Vec<_> = issues.iter().map(|i| format!("{}: {}", i.file, i.message)).collect();
                format!("{e}: {}", lines.join("; "))
            }
            _ => e.to_string(),
        };
        match e {
            EvalError::Io(_) => Failure(DmStatus::Io, message),
            _ => Failure(DmStatus::Evaluation, message),
        }
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DmStatus::NullArgument, format!("{what} is null"))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(DmStatus::InvalidUtf8, "output holds a nul byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Decodes PNG or JPEG bytes.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_image_decode(bytes: *const u8, len: usize, out: *mut *mut DmImage) -> DmStatus {
    guard(|| {
        if bytes.is_null() {
            return Err(null("bytes"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let image = RasterImage::decode(std::slice::from_raw_parts(bytes, len))?;
        *out = Box::into_raw(Box::new(DmImage(image)));
        Ok(())
    })
}

/// # Safety
/// `image` must be NULL or a live handle; `width` and `height` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_image_size(image: *const DmImage, width: *mut usize, height: *mut usize) -> DmStatus {
    guard(|| {
        let image = &ref_arg(image, "image")?.0;
        if width.is_null() || height.is_null() {
            return Err(null("width/height"));
        }
        *width = image.width();
        *height = image.height();
        Ok(())
    })
}

/// # Safety
/// `image` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_image_free(image: *mut DmImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Otsu threshold of the image's luma.
///
/// # Safety
/// `image` must be a live handle; `threshold` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_otsu_threshold(image: *const DmImage, threshold: *mut u8) -> DmStatus {
    guard(|| {
        let image = &ref_arg(image, "image")?.0;
        if threshold.is_null() {
            return Err(null("threshold"));
        }
        *threshold = otsu_threshold(&to_grayscale(image))?.threshold;
        Ok(())
    })
}

/// Segments the lesion with default GrabCut parameters and measures it.
///
/// # Safety
/// `image` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_assess(image: *const DmImage, out: *mut *mut DmAssessment) -> DmStatus {
    guard(|| {
        let image = &ref_arg(image, "image")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let assessment = assess_lesion(image, &GrabCutParams::default())?;
        *out = Box::into_raw(Box::new(DmAssessment(assessment)));
        Ok(())
    })
}

/// # Safety
/// `assessment` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_assessment_features(assessment: *const DmAssessment, out: *mut DmFeatures) -> DmStatus {
    guard(|| {
        let a = &ref_arg(assessment, "assessment")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = (&a.measurement.features).into();
        Ok(())
    })
}

/// The technical report text. Free with `dm_string_free`.
///
/// # Safety
/// `assessment` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_assessment_report(assessment: *const DmAssessment, out: *mut *mut c_char) -> DmStatus {
    guard(|| {
        let a = &ref_arg(assessment, "assessment")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, a.report.text.clone())
    })
}

/// # Safety
/// `assessment` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_assessment_free(assessment: *mut DmAssessment) {
    if !assessment.is_null() {
        drop(Box::from_raw(assessment));
    }
}

/// Recovers features from technical report text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_parse_report(text: *const c_char, out: *mut DmFeatures) -> DmStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = (&parse_technical_report(text)?).into();
        Ok(())
    })
}

/// Scores a corpus against mock fixtures and writes the outcome as JSON.
/// `fixtures` may be NULL to use `<corpus>/mock`. Free with
/// `dm_string_free`.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL where allowed;
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_evaluate(
    corpus: *const c_char,
    reviews: *const c_char,
    fixtures: *const c_char,
    out_json: *mut *mut c_char,
) -> DmStatus {
    guard(|| {
        let corpus = Path::new(str_arg(corpus, "corpus")?);
        let reviews = Path::new(str_arg(reviews, "reviews")?);
        let fixtures = if fixtures.is_null() { corpus.join("mock") } else { str_arg(fixtures, "fixtures")?.into() };
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let mock = MockProvider::from_dir(&fixtures).map_err(|e| Failure(DmStatus::Io, e.to_string()))?;
        let providers = ProviderSet::from_mock(Arc::new(mock), RetryPolicy::default());
        let outcome =
            run_evaluation(corpus, reviews, &providers, &Weights::default(), &ScoringConfig::default(), &|_, _| {})?;
        out_string(out_json, serde_json::to_string(&outcome).expect("outcomes serialize"))
    })
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
