//! Demo images with canned model replies, used by mock-mode serving and
//! the end-to-end tests.

use base64::Engine;

use super::{MockProvider, TextRequest, VisionRequest, WorkflowError, WorkflowState};
use crate::features::assess_lesion;
use crate::imaging::RasterImage;
use crate::rules::{build_condition_prompt, build_lesion_prompt, build_xai_prompt, parse_assessment_under, RulesOfConduct};
use crate::segmentation::GrabCutParams;
use crate::synthetic;

pub const LESION_INITIAL: &str = include_str!("../../fixtures/use-cases/lesion_initial.txt");
pub const LESION_XAI: &str = include_str!("../../fixtures/use-cases/lesion_xai.txt");
pub const CONDITION_INITIAL: &str = include_str!("../../fixtures/use-cases/condition_initial.txt");
pub const CONDITION_FOLLOWUP: &str = include_str!("../../fixtures/use-cases/condition_followup.txt");
pub const BENIGN_INITIAL: &str = include_str!("../../fixtures/use-cases/benign_initial.txt");
pub const BENIGN_XAI: &str = include_str!("../../fixtures/use-cases/benign_xai.txt");
pub const NON_DERMATOLOGY: &str = include_str!("../../fixtures/use-cases/non_dermatology.txt");

#[derive(Debug, Clone)]
pub struct DemoCase {
    pub name: &'static str,
    pub png: Vec<u8>,
    /// Where `run_full` ends with the demo mock.
    pub terminal: WorkflowState,
    initial: &'static str,
    second: Option<&'static str>,
}

fn png(image: RasterImage) -> Vec<u8> {
    image.encode_png().expect("demo images encode")
}

pub fn demo_cases() -> Vec<DemoCase> {
    vec![
        DemoCase {
            name: "lesion",
            png: png(synthetic::demo_lesion_image()),
            terminal: WorkflowState::XaiComplete,
            initial: LESION_INITIAL,
            second: Some(LESION_XAI),
        },
        DemoCase {
            name: "condition",
            png: png(synthetic::demo_condition_image()),
            terminal: WorkflowState::ConditionFollowedUp,
            initial: CONDITION_INITIAL,
            second: Some(CONDITION_FOLLOWUP),
        },
        DemoCase {
            name: "benign",
            png: png(synthetic::demo_benign_image()),
            terminal: WorkflowState::XaiComplete,
            initial: BENIGN_INITIAL,
            second: Some(BENIGN_XAI),
        },
        DemoCase {
            name: "object",
            png: png(synthetic::demo_object_image()),
            terminal: WorkflowState::Ended,
            initial: NON_DERMATOLOGY,
            second: None,
        },
    ]
}

fn vision(png: &[u8], prompt: String) -> VisionRequest {
    VisionRequest { image: base64::engine::general_purpose::STANDARD.encode(png), prompt }
}

/// Adds the replies for one demo case. Lesion-path explanation prompts
/// embed measured values, so they are computed here by a dry run.
pub fn insert_demo_case(mock: &MockProvider, case: &DemoCase, params: &GrabCutParams) -> Result<(), WorkflowError> {
    mock.insert_vision(&vision(&case.png, build_lesion_prompt()), case.initial);
    let Some(second) = case.second else { return Ok(()) };
    match case.terminal {
        WorkflowState::ConditionFollowedUp => {
            mock.insert_vision(&vision(&case.png, build_condition_prompt()), second);
        }
        _ => {
            let initial = parse_assessment_under(case.initial, RulesOfConduct::lesion())
                .map_err(|e| WorkflowError::Prompt(e.to_string()))?;
            let image = RasterImage::decode(&case.png)?;
            let report = assess_lesion(&image, params).map_err(|e| WorkflowError::Features(e.to_string()))?.report;
            let prompt = build_xai_prompt(&initial, &report).map_err(|e| WorkflowError::Prompt(e.to_string()))?;
            mock.insert_text(&TextRequest { prompt }, second);
        }
    }
    Ok(())
}

/// A mock answering every demo case.
pub fn demo_mock(params: &GrabCutParams) -> Result<MockProvider, WorkflowError> {
    let mock = MockProvider::new();
    for case in demo_cases() {
        insert_demo_case(&mock, &case, params)?;
    }
    Ok(mock)
}
