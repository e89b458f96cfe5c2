use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferralSource {
    /// The explicit `LAB_REFERRAL:` line requested by the prompt.
    ContractLine,
    /// A referral sentence found in the prose.
    Prose,
    /// Neither was present.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Send2LabDecision {
    pub required: bool,
    pub rationale: String,
    pub source: ReferralSource,
}

static CONTRACT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\W*LAB_REFERRAL\W*:\s*(yes|no)\b\W*(.*?)\s*$").unwrap());
static SENTENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^.!?\n]+(?:[.!?]+|$)").unwrap());
static LAB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:biops(?:y|ies)|histopatholog\w*|histolog\w*|dermatopatholog\w*|laboratory|lab\s+(?:test|analysis|work))").unwrap()
});
static NEED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:required|recommended|necessary|needed|indicated|advised|warranted|should\s+be\s+(?:performed|done|obtained|considered))\b").unwrap()
});
static NEGATED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:no|not|never|without|unnecessary)\b|n't\b|if\s+necessary").unwrap());

/// Reads the lab-referral decision from an explanation report: the contract
/// line when present, otherwise the first prose sentence that calls for a
/// biopsy or laboratory test without negating it.
pub fn parse_send2lab(report: &str) -> Send2LabDecision {
    if let Some(c) = CONTRACT.captures_iter(report).last() {
        let required = c[1].eq_ignore_ascii_case("yes");
        let mut rationale = c[2].trim().to_string();
        if rationale.is_empty() && required {
            rationale = "laboratory analysis requested".to_string();
        }
        return Send2LabDecision { required, rationale, source: ReferralSource::ContractLine };
    }
    for m in SENTENCE.find_iter(report) {
        let s = m.as_str().trim();
        if LAB.is_match(s) && NEED.is_match(s) && !NEGATED.is_match(s) {
            return Send2LabDecision { required: true, rationale: s.to_string(), source: ReferralSource::Prose };
        }
    }
    Send2LabDecision { required: false, rationale: String::new(), source: ReferralSource::Absent }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn use_case_one_prose_referral() {
        let d = parse_send2lab(include_str!("../../fixtures/use-cases/lesion_xai.txt"));
        assert!(d.required);
        assert_eq!(d.source, ReferralSource::Prose);
        assert_eq!(d.rationale, "However, further diagnostic testing (like a biopsy) would be required to confirm this.");
    }

    #[test]
    fn contract_line_wins() {
        let d = parse_send2lab(include_str!("../../fixtures/use-cases/benign_xai.txt"));
        assert!(!d.required);
        assert_eq!(d.source, ReferralSource::ContractLine);
        assert!(d.rationale.starts_with("symmetric, uniformly colored lesion"));

        let d = parse_send2lab("A biopsy is required.\nLAB_REFERRAL: no - benign");
        assert!(!d.required);
        let d = parse_send2lab("**LAB_REFERRAL**: YES — irregular border");
        assert!(d.required);
        assert_eq!(d.rationale, "irregular border");
        let d = parse_send2lab("LAB_REFERRAL: yes");
        assert!(d.required && !d.rationale.is_empty());
    }

    #[test]
    fn negated_or_absent() {
        assert!(!parse_send2lab("A biopsy is not required at this stage.").required);
        assert!(!parse_send2lab("No laboratory work-up is needed.").required);
        assert!(!parse_send2lab("If necessary, biopsy remains the gold standard.").required);
        let d = parse_send2lab("Looks benign.");
        assert_eq!((d.required, d.source), (false, ReferralSource::Absent));
    }
}
