//! The case workflow: initial vision analysis, path classification, then
//! the lesion path (measurements, cross-model explanation, lab referral),
//! the condition follow-up, or the end.

mod demo;
mod http;
mod mock;
mod providers;
mod send2lab;

pub use demo::{demo_cases, demo_mock, insert_demo_case, DemoCase};
pub use http::HttpEndpoint;
pub use mock::{request_digest, MockError, MockFixture, MockProvider};
pub use providers::*;
pub use send2lab::{parse_send2lab, ReferralSource, Send2LabDecision};

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{assess_lesion, FeatureError, LesionFeatures, PlotArtifact};
use crate::imaging::{ImagingError, RasterImage};
use crate::rules::{
    build_condition_prompt, build_lesion_prompt, build_xai_prompt, classify_path, parse_assessment_under,
    ParsedAssessment, Path, PathDecision, RulesError, RulesOfConduct,
};
use crate::segmentation::{GrabCutParams, SegmentationError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum WorkflowState {
    Created,
    InitialAnalyzed,
    LesionMeasured,
    XaiComplete,
    ConditionFollowedUp,
    Ended,
    Failed(String),
}

impl WorkflowState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::XaiComplete | Self::ConditionFollowedUp | Self::Ended | Self::Failed(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Created => "created",
            Self::InitialAnalyzed => "initial_analyzed",
            Self::LesionMeasured => "lesion_measured",
            Self::XaiComplete => "xai_complete",
            Self::ConditionFollowedUp => "condition_followed_up",
            Self::Ended => "ended",
            Self::Failed(_) => "failed",
        }
    }

    /// Legal edges of the workflow graph; any non-terminal state may fail.
    pub fn can_move_to(&self, next: &WorkflowState) -> bool {
        use WorkflowState::*;
        match (self, next) {
            (s, Failed(_)) => !s.is_terminal(),
            (Created, InitialAnalyzed)
            | (InitialAnalyzed, LesionMeasured)
            | (InitialAnalyzed, ConditionFollowedUp)
            | (InitialAnalyzed, Ended)
            | (LesionMeasured, XaiComplete) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: WorkflowState,
    pub to: WorkflowState,
    pub at: DateTime<Utc>,
    /// Provider retries spent reaching this state.
    pub retries: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub initial_assessment: Option<ParsedAssessment>,
    pub path: Option<PathDecision>,
    pub features: Option<LesionFeatures>,
    pub technical_report: Option<String>,
    /// Lesion outline in image coordinates, for overlays.
    pub contour: Option<Vec<(i64, i64)>>,
    #[serde(default)]
    pub plots: Vec<PlotArtifact>,
    pub xai_report: Option<String>,
    pub send2lab: Option<Send2LabDecision>,
    pub followup: Option<ParsedAssessment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub image_sha256: String,
    pub state: WorkflowState,
    pub audit: Vec<Transition>,
    pub artifacts: Artifacts,
    #[serde(skip)]
    pub image: Vec<u8>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("cannot {action} a case in state {from}")]
    IllegalTransition { from: String, action: &'static str },
    #[error("provider failure: {0}")]
    Provider(#[from] RetryFailure),
    #[error("unstructured model response")]
    Unstructured,
    #[error("no lesion found")]
    NoLesion,
    #[error("image error: {0}")]
    Image(#[from] ImagingError),
    #[error("feature extraction failed: {0}")]
    Features(String),
    #[error("prompt error: {0}")]
    Prompt(String),
}

impl Case {
    pub fn new(id: impl Into<String>, image: Vec<u8>) -> Self {
        Self {
            id: id.into(),
            created_at: Utc::now(),
            image_sha256: hex::encode(Sha256::digest(&image)),
            state: WorkflowState::Created,
            audit: Vec::new(),
            artifacts: Artifacts::default(),
            image,
        }
    }

    /// Artifacts as canonical JSON followed by each plot's bytes. Ids and
    /// timestamps are excluded so replays compare equal.
    pub fn artifact_bundle(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.artifacts).expect("artifacts serialize");
        for p in &self.artifacts.plots {
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&p.bytes);
        }
        out
    }

    fn advance(&mut self, to: WorkflowState, retries: u32) {
        debug_assert!(self.state.can_move_to(&to), "{:?} -> {:?}", self.state, to);
        self.audit.push(Transition { from: self.state.clone(), to: to.clone(), at: Utc::now(), retries });
        self.state = to;
    }

    fn fail(&mut self, error: &WorkflowError) {
        let retries = match error {
            WorkflowError::Provider(f) => f.retries,
            _ => 0,
        };
        let reason = match error {
            WorkflowError::Unstructured => "unstructured".to_string(),
            WorkflowError::NoLesion => "no lesion".to_string(),
            other => other.to_string(),
        };
        self.advance(WorkflowState::Failed(reason), retries);
    }

    fn require(&self, expected: &WorkflowState, path: Option<Path>, action: &'static str) -> Result<(), WorkflowError> {
        let path_ok = path.is_none_or(|p| self.artifacts.path.as_ref().map(|d| d.path) == Some(p));
        if &self.state != expected || !path_ok {
            return Err(WorkflowError::IllegalTransition { from: self.state.name().to_string(), action });
        }
        Ok(())
    }

    fn image_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(&self.image)
    }
}

/// Runs `step`, moving the case to `Failed` on any error other than an
/// illegal transition.
fn guarded<T>(case: &mut Case, step: impl FnOnce(&mut Case) -> Result<T, WorkflowError>) -> Result<T, WorkflowError> {
    let out = step(case);
    if let Err(e) = &out {
        if !matches!(e, WorkflowError::IllegalTransition { .. }) && !case.state.is_terminal() {
            case.fail(e);
        }
    }
    out
}

fn parse_under(text: &str, rules: &RulesOfConduct) -> Result<ParsedAssessment, WorkflowError> {
    parse_assessment_under(text, rules).map_err(|e| match e {
        RulesError::Unstructured | RulesError::EmptyResponse => WorkflowError::Unstructured,
        other => WorkflowError::Prompt(other.to_string()),
    })
}

/// Vision call with the lesion rules, then path classification. An End
/// decision closes the case immediately.
pub fn run_initial_analysis(
    case: &mut Case,
    providers: &ProviderSet,
) -> Result<(ParsedAssessment, PathDecision), WorkflowError> {
    case.require(&WorkflowState::Created, None, "analyze")?;
    guarded(case, |case| {
        let request = VisionRequest { image: case.image_base64(), prompt: build_lesion_prompt() };
        let reply = providers.describe(&request)?;
        let assessment = parse_under(&reply.value.text, RulesOfConduct::lesion())?;
        let decision = classify_path(&assessment);
        case.artifacts.initial_assessment = Some(assessment.clone());
        case.artifacts.path = Some(decision.clone());
        case.advance(WorkflowState::InitialAnalyzed, reply.retries);
        if decision.path == Path::End {
            case.advance(WorkflowState::Ended, 0);
        }
        Ok((assessment, decision))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionPathOutcome {
    pub features: LesionFeatures,
    pub technical_report: String,
    pub xai_report: String,
    pub send2lab: Send2LabDecision,
}

/// Measurements on the case image, the cross-model explanation and the
/// lab-referral decision.
pub fn run_lesion_path(
    case: &mut Case,
    providers: &ProviderSet,
    params: &GrabCutParams,
) -> Result<LesionPathOutcome, WorkflowError> {
    case.require(&WorkflowState::InitialAnalyzed, Some(Path::Lesion), "run the lesion path on")?;
    guarded(case, |case| {
        let image = RasterImage::decode(&case.image)?;
        let assessment = assess_lesion(&image, params).map_err(|e| match e {
            FeatureError::Segmentation(
                SegmentationError::NoLesion
                | SegmentationError::DegenerateHistogram
                | SegmentationError::UninitializedTrimap
                | SegmentationError::DegenerateContour,
            )
            | FeatureError::EmptyMask
            | FeatureError::DegenerateMask => WorkflowError::NoLesion,
            other => WorkflowError::Features(other.to_string()),
        })?;
        let report = assessment.report;
        case.artifacts.features = Some(report.features.clone());
        case.artifacts.technical_report = Some(report.text.clone());
        case.artifacts.contour = Some(assessment.measurement.contour.points().to_vec());
        case.artifacts.plots = report.plots.clone();
        case.advance(WorkflowState::LesionMeasured, 0);

        let initial = case.artifacts.initial_assessment.clone().expect("analyzed case has an assessment");
        let prompt = build_xai_prompt(&initial, &report).map_err(|e| WorkflowError::Prompt(e.to_string()))?;
        let reply = providers.complete(&TextRequest { prompt })?;
        let send2lab = parse_send2lab(&reply.value.text);
        case.artifacts.xai_report = Some(reply.value.text.clone());
        case.artifacts.send2lab = Some(send2lab.clone());
        case.advance(WorkflowState::XaiComplete, reply.retries);
        Ok(LesionPathOutcome {
            features: report.features,
            technical_report: report.text,
            xai_report: reply.value.text,
            send2lab,
        })
    })
}

/// Second vision call under the condition rules.
pub fn run_condition_followup(case: &mut Case, providers: &ProviderSet) -> Result<ParsedAssessment, WorkflowError> {
    case.require(&WorkflowState::InitialAnalyzed, Some(Path::Condition), "follow up")?;
    guarded(case, |case| {
        let request = VisionRequest { image: case.image_base64(), prompt: build_condition_prompt() };
        let reply = providers.describe(&request)?;
        let assessment = parse_under(&reply.value.text, RulesOfConduct::condition())?;
        case.artifacts.followup = Some(assessment.clone());
        case.advance(WorkflowState::ConditionFollowedUp, reply.retries);
        Ok(assessment)
    })
}

/// Drives the case to a terminal state.
pub fn run_full(case: &mut Case, providers: &ProviderSet, params: &GrabCutParams) -> Result<(), WorkflowError> {
    while !case.state.is_terminal() {
        match (&case.state, case.artifacts.path.as_ref().map(|d| d.path)) {
            (WorkflowState::Created, _) => {
                run_initial_analysis(case, providers)?;
            }
            (WorkflowState::InitialAnalyzed, Some(Path::Lesion)) => {
                run_lesion_path(case, providers, params)?;
            }
            (WorkflowState::InitialAnalyzed, Some(Path::Condition)) => {
                run_condition_followup(case, providers)?;
            }
            (state, _) => {
                return Err(WorkflowError::IllegalTransition { from: state.name().to_string(), action: "resume" });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;
    use std::time::Duration;

    const UC1: &str = include_str!("../../fixtures/use-cases/lesion_initial.txt");
    const UC1_XAI: &str = include_str!("../../fixtures/use-cases/lesion_xai.txt");
    const UC2: &str = include_str!("../../fixtures/use-cases/condition_initial.txt");
    const UC2_FOLLOWUP: &str = include_str!("../../fixtures/use-cases/condition_followup.txt");

    fn fast_retry() -> RetryPolicy {
        RetryPolicy { max_retries: 2, initial_backoff: Duration::from_millis(1), deadline: Duration::from_secs(5) }
    }

    fn small_lesion_png() -> Vec<u8> {
        let m = crate::synthetic::ellipse_mask(96, 96, (48.0, 48.0), (28.0, 20.0), 0.4);
        crate::synthetic::noisy_paint(&m, [70, 45, 45], [210, 180, 165], 4.0, 3).encode_png().unwrap()
    }

    fn vision(image: &[u8], prompt: String) -> VisionRequest {
        VisionRequest { image: base64::engine::general_purpose::STANDARD.encode(image), prompt }
    }

    /// Mock for a lesion case whose XAI prompt is computed by a dry run.
    fn lesion_mock(image: &[u8], xai_reply: &str) -> Arc<MockProvider> {
        let mock = Arc::new(MockProvider::new());
        mock.insert_vision(&vision(image, build_lesion_prompt()), UC1);
        let initial = parse_assessment_under(UC1, RulesOfConduct::lesion()).unwrap();
        let rgb = RasterImage::decode(image).unwrap();
        let report = assess_lesion(&rgb, &GrabCutParams::default()).unwrap().report;
        mock.insert_text(&TextRequest { prompt: build_xai_prompt(&initial, &report).unwrap() }, xai_reply);
        mock
    }

    #[test]
    fn transition_table() {
        use WorkflowState::*;
        assert!(Created.can_move_to(&InitialAnalyzed));
        assert!(!Created.can_move_to(&LesionMeasured));
        assert!(!InitialAnalyzed.can_move_to(&XaiComplete));
        assert!(LesionMeasured.can_move_to(&Failed("x".into())));
        assert!(!Ended.can_move_to(&Failed("x".into())));
        assert!(!XaiComplete.can_move_to(&LesionMeasured));
    }

    #[test]
    fn lesion_case_runs_to_xai_with_referral() {
        let image = small_lesion_png();
        let providers = ProviderSet::from_mock(lesion_mock(&image, UC1_XAI), fast_retry());
        let mut case = Case::new("c1", image);
        let (a, d) = run_initial_analysis(&mut case, &providers).unwrap();
        assert_eq!(d.path, Path::Lesion);
        assert_eq!(a.diagnoses[0], "Melanoma");
        let out = run_lesion_path(&mut case, &providers, &GrabCutParams::default()).unwrap();
        assert!(out.send2lab.required);
        assert!(out.send2lab.rationale.contains("biopsy"));
        assert_eq!(case.state, WorkflowState::XaiComplete);
        let states: Vec<_> = case.audit.iter().map(|t| t.to.name()).collect();
        assert_eq!(states, ["initial_analyzed", "lesion_measured", "xai_complete"]);
        assert_eq!(case.artifacts.plots.len(), 4);
        assert!(out.technical_report.contains(&out.features.circularity.to_string()));
    }

    #[test]
    fn condition_case_follows_up() {
        let image = small_lesion_png();
        let mock = Arc::new(MockProvider::new());
        mock.insert_vision(&vision(&image, build_lesion_prompt()), UC2);
        mock.insert_vision(&vision(&image, build_condition_prompt()), UC2_FOLLOWUP);
        let providers = ProviderSet::from_mock(mock, fast_retry());
        let mut case = Case::new("c2", image);
        run_full(&mut case, &providers, &GrabCutParams::default()).unwrap();
        assert_eq!(case.state, WorkflowState::ConditionFollowedUp);
        let f = case.artifacts.followup.as_ref().unwrap();
        assert!(f.diagnoses.iter().any(|d| d == "Traumatic ulcer"));
        assert_eq!(f.final_diagnosis.as_deref(), Some("Aphthous stomatitis (canker sore)"));
        assert!(case.artifacts.features.is_none());
    }

    #[test]
    fn end_path_closes_case_and_blocks_further_calls() {
        let image = small_lesion_png();
        let mock = Arc::new(MockProvider::new());
        mock.insert_vision(
            &vision(&image, build_lesion_prompt()),
            include_str!("../../fixtures/use-cases/non_dermatology.txt"),
        );
        let providers = ProviderSet::from_mock(mock, fast_retry());
        let mut case = Case::new("c3", image);
        let (_, d) = run_initial_analysis(&mut case, &providers).unwrap();
        assert_eq!(d.path, Path::End);
        assert_eq!(case.state, WorkflowState::Ended);
        assert!(matches!(run_condition_followup(&mut case, &providers), Err(WorkflowError::IllegalTransition { .. })));
        assert!(matches!(
            run_lesion_path(&mut case, &providers, &GrabCutParams::default()),
            Err(WorkflowError::IllegalTransition { .. })
        ));
        assert_eq!(case.state, WorkflowState::Ended);
    }

    #[test]
    fn unstructured_reply_fails_the_case() {
        let image = small_lesion_png();
        let mock = Arc::new(MockProvider::new());
        mock.insert_vision(&vision(&image, build_lesion_prompt()), "I cannot help with that.");
        let providers = ProviderSet::from_mock(mock, fast_retry());
        let mut case = Case::new("c4", image);
        assert_eq!(run_initial_analysis(&mut case, &providers), Err(WorkflowError::Unstructured));
        assert_eq!(case.state, WorkflowState::Failed("unstructured".into()));
    }

    #[test]
    fn missing_fixture_fails_with_retry_count() {
        let mut case = Case::new("c5", small_lesion_png());
        let providers = ProviderSet::from_mock(Arc::new(MockProvider::new()), fast_retry());
        let err = run_initial_analysis(&mut case, &providers).unwrap_err();
        assert!(matches!(err, WorkflowError::Provider(RetryFailure { retries: 0, .. })));
        assert!(matches!(case.state, WorkflowState::Failed(_)));
    }

    struct Flaky {
        inner: Arc<MockProvider>,
        failures_left: AtomicU32,
    }

    impl TextModel for Flaky {
        fn complete(&self, request: &TextRequest) -> Result<TextResponse, ProviderError> {
            if self.failures_left.load(Ordering::SeqCst) > 0 {
                self.failures_left.fetch_sub(1, Ordering::SeqCst);
                return Err(ProviderError::Timeout);
            }
            self.inner.complete(request)
        }
    }

    #[test]
    fn xai_timeouts_are_retried() {
        let image = small_lesion_png();
        let mock = lesion_mock(&image, UC1_XAI);
        let mut providers = ProviderSet::from_mock(mock.clone(), fast_retry());
        providers.text = Arc::new(Flaky { inner: mock, failures_left: AtomicU32::new(2) });
        let mut case = Case::new("c6", image);
        run_full(&mut case, &providers, &GrabCutParams::default()).unwrap();
        assert_eq!(case.state, WorkflowState::XaiComplete);
        assert_eq!(case.audit.last().unwrap().retries, 2);
    }

    #[test]
    fn blank_image_has_no_lesion() {
        let image = RasterImage::filled(64, 64, [200, 170, 160]).unwrap().encode_png().unwrap();
        let mock = Arc::new(MockProvider::new());
        mock.insert_vision(&vision(&image, build_lesion_prompt()), UC1);
        let providers = ProviderSet::from_mock(mock, fast_retry());
        let mut case = Case::new("c7", image);
        assert_eq!(run_full(&mut case, &providers, &GrabCutParams::default()), Err(WorkflowError::NoLesion));
        assert_eq!(case.state, WorkflowState::Failed("no lesion".into()));
        let states: Vec<_> = case.audit.iter().map(|t| t.to.name()).collect();
        assert_eq!(states, ["initial_analyzed", "failed"]);
    }

    #[test]
    fn replay_is_byte_identical() {
        let image = small_lesion_png();
        let mock = lesion_mock(&image, UC1_XAI);
        let providers = ProviderSet::from_mock(mock, fast_retry());
        let run = || {
            let mut case = Case::new(uuid::Uuid::new_v4().to_string(), image.clone());
            run_full(&mut case, &providers, &GrabCutParams::default()).unwrap();
            case.artifact_bundle()
        };
        assert_eq!(run(), run());
    }
}
