//! Rules-of-conduct prompts, response parsing, path classification and
//! diagnosis entity extraction.

mod entities;
mod parse;

pub use entities::{extract_entities, extract_entities_with, EntityList, Lexicon};
pub use parse::{
    asserts_skin_condition, classify_path, parse_assessment, parse_assessment_under, Abcde, AbcdeRecord,
    ComplianceIssue, ParsedAssessment, Path, PathDecision,
};

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::TechnicalReport;

const LESION_TEMPLATE: &str = include_str!("../../resources/prompts/lesion.v1.txt");
const CONDITION_TEMPLATE: &str = include_str!("../../resources/prompts/condition.v1.txt");
const XAI_TEMPLATE: &str = include_str!("../../resources/prompts/xai.v1.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RulesError {
    #[error("unstructured response: no recognizable section")]
    Unstructured,
    #[error("response is empty")]
    EmptyResponse,
    #[error("technical report is missing")]
    MissingReport,
    #[error("malformed rules template: {0}")]
    Template(String),
    #[error("cannot read lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RulesKind {
    Lesion,
    Condition,
    Xai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesOfConduct {
    pub kind: RulesKind,
    pub version: u32,
    /// (heading, instruction) in prompt order.
    pub sections: Vec<(String, String)>,
    pub allowed_diagnoses: Option<Vec<String>>,
}

impl RulesOfConduct {
    /// Parses a template: `# key: value` header lines, then one
    /// `Heading: instruction` line per section.
    pub fn from_template(text: &str) -> Result<Self, RulesError> {
        let mut kind = None;
        let mut version = None;
        let mut sections = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(meta) = line.strip_prefix('#') {
                match meta.split_once(':').map(|(k, v)| (k.trim(), v.trim())) {
                    Some(("kind", "lesion")) => kind = Some(RulesKind::Lesion),
                    Some(("kind", "condition")) => kind = Some(RulesKind::Condition),
                    Some(("kind", "xai")) => kind = Some(RulesKind::Xai),
                    Some(("version", v)) => {
                        version = Some(v.parse().map_err(|_| RulesError::Template(format!("bad version {v}")))?)
                    }
                    _ => {}
                }
                continue;
            }
            let (heading, body) =
                line.split_once(": ").ok_or_else(|| RulesError::Template(format!("no heading in `{line}`")))?;
            sections.push((heading.trim().to_string(), body.trim().to_string()));
        }
        let kind = kind.ok_or_else(|| RulesError::Template("missing kind".into()))?;
        let allowed_diagnoses = match kind {
            RulesKind::Lesion => {
                let answer = sections
                    .iter()
                    .find(|(h, _)| h == "Answer Selection")
                    .ok_or_else(|| RulesError::Template("missing Answer Selection".into()))?;
                let (_, list) = answer.1.split_once('[').ok_or_else(|| RulesError::Template("no label list".into()))?;
                let list = list.trim_end_matches(']');
                Some(list.split(", ").map(|s| s.trim().to_string()).collect())
            }
            _ => None,
        };
        Ok(Self { kind, version: version.unwrap_or(1), sections, allowed_diagnoses })
    }

    pub fn lesion() -> &'static Self {
        &LESION_RULES
    }

    pub fn condition() -> &'static Self {
        &CONDITION_RULES
    }

    pub fn xai() -> &'static Self {
        &XAI_RULES
    }

    pub fn allows(&self, diagnosis: &str) -> bool {
        match &self.allowed_diagnoses {
            None => true,
            Some(list) => {
                let d = fold(diagnosis);
                list.iter().any(|l| fold(l) == d)
            }
        }
    }

    fn render_sections(&self) -> String {
        self.sections.iter().map(|(h, b)| format!("{h}: {b}\n")).collect()
    }
}

pub(crate) fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

static LESION_RULES: LazyLock<RulesOfConduct> =
    LazyLock::new(|| RulesOfConduct::from_template(LESION_TEMPLATE).expect("bundled lesion template"));
static CONDITION_RULES: LazyLock<RulesOfConduct> =
    LazyLock::new(|| RulesOfConduct::from_template(CONDITION_TEMPLATE).expect("bundled condition template"));
static XAI_RULES: LazyLock<RulesOfConduct> =
    LazyLock::new(|| RulesOfConduct::from_template(XAI_TEMPLATE).expect("bundled xai template"));

/// Section headings a compliant response uses, in order.
pub fn response_headings(kind: RulesKind) -> &'static [&'static str] {
    match kind {
        RulesKind::Lesion => {
            &["Visual Description", "Feature Presence", "Feature Localization", "ABCDE Approximation", "Diagnosis Selection"]
        }
        RulesKind::Condition => &["Differential Diagnosis", "Final Diagnosis", "Clinical Features Supporting Diagnosis"],
        RulesKind::Xai => &["Clinical Summary", "References"],
    }
}

/// The response-format instruction appended to every prompt.
pub fn response_format(kind: RulesKind) -> String {
    let mut out = String::from("Response Format: answer with these labeled sections, in this order, each heading followed by a colon:\n");
    for h in response_headings(kind) {
        out.push_str(&format!("{h}:\n"));
    }
    if kind == RulesKind::Xai {
        out.push_str("LAB_REFERRAL: yes|no — <rationale>\n");
    }
    out
}

pub fn build_lesion_prompt() -> String {
    let rules = RulesOfConduct::lesion();
    format!("{}\n{}", rules.render_sections(), response_format(RulesKind::Lesion))
}

pub fn build_condition_prompt() -> String {
    let rules = RulesOfConduct::condition();
    format!("{}\n{}", rules.render_sections(), response_format(RulesKind::Condition))
}

/// Cross-model prompt: the initial assessment plus the measurements.
pub fn build_xai_prompt(initial: &ParsedAssessment, report: &TechnicalReport) -> Result<String, RulesError> {
    if report.text.trim().is_empty() {
        return Err(RulesError::MissingReport);
    }
    let mut out = RulesOfConduct::xai().render_sections();
    out.push('\n');
    out.push_str(&response_format(RulesKind::Xai));
    out.push_str("\nInitial Assessment:\n");
    out.push_str(initial.raw.trim());
    out.push_str("\n\nCandidate Diagnoses:\n");
    if initial.diagnoses.is_empty() {
        out.push_str("None were given. Propose up to three differential diagnoses from the findings.\n");
    } else {
        for (i, d) in initial.diagnoses.iter().enumerate() {
            out.push_str(&format!("{}. {d}\n", i + 1));
        }
    }
    out.push_str("\nTechnical Report:\n");
    out.push_str(report.text.trim());
    out.push('\n');
    Ok(out)
}

/// Splits a rendered prompt back into its `Heading: text` lines, stopping at
/// the response-format block.
pub fn prompt_sections(prompt: &str) -> Vec<(String, String)> {
    prompt
        .lines()
        .take_while(|l| !l.starts_with("Response Format:"))
        .filter_map(|l| l.split_once(": "))
        .map(|(h, b)| (h.to_string(), b.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_technical_report, LesionFeatures};

    const LABELS: [&str; 20] = [
        "nevus",
        "melanoma",
        "basal cell carcinoma",
        "actinic keratosis",
        "benign keratosis",
        "dermatofibroma",
        "vascular lesion",
        "squamous cell carcinoma",
        "Lentigo Maligna",
        "Blue Nevus",
        "Sebaceous Hyperplasia",
        "Keratoacanthoma",
        "Atypical (Dysplastic) Nevus",
        "Solar Lentigo",
        "Pigmented Basal Cell Carcinoma",
        "Cutaneous Horn",
        "Molluscum Contagiosum",
        "Cyst",
        "Lichen Planus",
        "Psoriasis",
    ];

    #[test]
    fn lesion_rules_carry_the_closed_list() {
        let rules = RulesOfConduct::lesion();
        assert_eq!(rules.allowed_diagnoses.as_deref().unwrap(), LABELS.map(String::from));
        assert!(rules.allows("MELANOMA"));
        assert!(!rules.allows("Cellulitis"));
        assert!(RulesOfConduct::condition().allowed_diagnoses.is_none());
    }

    #[test]
    fn lesion_prompt_contents() {
        let p = build_lesion_prompt();
        assert!(p.contains("ABCDE"));
        for l in LABELS {
            assert!(p.contains(l), "{l}");
        }
        assert!(p.contains(&LABELS.join(", ")));
        assert_eq!(p, build_lesion_prompt());
        let headings: Vec<_> = prompt_sections(&p).into_iter().map(|(h, _)| h).collect();
        assert_eq!(
            headings,
            ["Rules of Conduct", "Feature Presence", "Feature Localization", "ABCDE Approximation", "Answer Selection"]
        );
    }

    #[test]
    fn prompts_round_trip_through_sections() {
        assert_eq!(prompt_sections(&build_lesion_prompt()), RulesOfConduct::lesion().sections);
        assert_eq!(prompt_sections(&build_condition_prompt()), RulesOfConduct::condition().sections);
    }

    #[test]
    fn prompt_snapshots() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/snapshots");
        if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
            std::fs::write(format!("{dir}/lesion_prompt.v1.txt"), build_lesion_prompt()).unwrap();
            std::fs::write(format!("{dir}/condition_prompt.v1.txt"), build_condition_prompt()).unwrap();
        }
        let lesion = std::fs::read_to_string(format!("{dir}/lesion_prompt.v1.txt")).unwrap();
        let condition = std::fs::read_to_string(format!("{dir}/condition_prompt.v1.txt")).unwrap();
        assert_eq!(build_lesion_prompt(), lesion);
        assert_eq!(build_condition_prompt(), condition);
    }

    #[test]
    fn skeleton_response_from_format_parses_every_section() {
        let mut response = String::new();
        for h in response_headings(RulesKind::Lesion) {
            let body = match *h {
                "ABCDE Approximation" => "- Asymmetry: a\n- Border: b\n- Color: c\n- Diameter: d\n- Evolution: e",
                "Diagnosis Selection" => "1. Melanoma",
                "Feature Presence" => "- one\n- two",
                _ => "text",
            };
            response.push_str(&format!("{h}:\n{body}\n\n"));
        }
        let a = parse_assessment(&response).unwrap();
        assert_eq!(a.visual_description, "text");
        assert_eq!(a.feature_presence, ["one", "two"]);
        assert_eq!(a.feature_localization, "text");
        assert!(matches!(a.abcde, Some(Abcde::Assessed(_))));
        assert_eq!(a.diagnoses, ["Melanoma"]);
    }

    #[test]
    fn condition_prompt_contents() {
        let p = build_condition_prompt();
        assert!(p.contains("differential"));
        assert!(p.contains("list of 3"));
        assert_eq!(p, build_condition_prompt());
        assert!(!p.contains("Pigmented Basal Cell Carcinoma"));
        assert_ne!(p, build_lesion_prompt());
    }

    fn uc1_report() -> TechnicalReport {
        build_technical_report(&LesionFeatures {
            area: 20412.0,
            perimeter: 612.5,
            circularity: 0.68,
            asymmetry_major: 0.00823,
            asymmetry_minor: 0.1062,
            asymmetry_avg: 0.05722464257917816,
            color_std: [19.21, 20.647, 19.261],
        })
    }

    #[test]
    fn xai_prompt_embeds_assessment_and_measurements() {
        let initial = parse_assessment(include_str!("../../fixtures/use-cases/lesion_initial.txt")).unwrap();
        let p = build_xai_prompt(&initial, &uc1_report()).unwrap();
        for s in ["0.68", "19.21", "1. Melanoma", "2. Atypical (Dysplastic) Nevus", "LAB_REFERRAL"] {
            assert!(p.contains(s), "{s}");
        }
        assert_eq!(p, build_xai_prompt(&initial, &uc1_report()).unwrap());
    }

    #[test]
    fn xai_prompt_without_diagnoses_asks_for_differential() {
        let initial = parse_assessment("Visual Description: a lesion").unwrap();
        let p = build_xai_prompt(&initial, &uc1_report()).unwrap();
        assert!(p.contains("Propose up to three differential diagnoses"));
        let mut empty = uc1_report();
        empty.text.clear();
        assert_eq!(build_xai_prompt(&initial, &empty), Err(RulesError::MissingReport));
    }

    #[test]
    fn template_errors() {
        assert!(RulesOfConduct::from_template("Heading: x").is_err());
        assert!(RulesOfConduct::from_template("# kind: lesion\nFeature Presence: x").is_err());
        assert!(RulesOfConduct::from_template("# kind: condition\nno heading here").is_err());
    }
}
