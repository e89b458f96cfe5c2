use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{fold, RulesError, RulesOfConduct};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbcdeRecord {
    pub asymmetry: String,
    pub border: String,
    pub color: String,
    pub diameter: String,
    pub evolution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Abcde {
    Assessed(AbcdeRecord),
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", content = "detail", rename_all = "snake_case")]
pub enum ComplianceIssue {
    /// More than three diagnoses were returned; the count before truncation.
    TooManyDiagnoses(usize),
    OutsideClosedList(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAssessment {
    pub visual_description: String,
    pub feature_presence: Vec<String>,
    pub feature_localization: String,
    pub abcde: Option<Abcde>,
    pub diagnoses: Vec<String>,
    pub final_diagnosis: Option<String>,
    pub clinical_features: Vec<String>,
    pub compliance: Vec<ComplianceIssue>,
    pub raw: String,
}

impl ParsedAssessment {
    pub fn is_compliant(&self) -> bool {
        self.compliance.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Lesion,
    Condition,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathDecision {
    pub path: Path,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    Visual,
    Presence,
    Localization,
    Abcde,
    Diagnosis,
    FinalDiagnosis,
    ClinicalFeatures,
}

// Longest alternatives first so "diagnosis selection" wins over "diagnosis".
static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        ^\s*(?:[-*•]\s+)?(?:\(?\d{1,2}[.)]\s*)?(?:\*\*|__|\*|_)?\s*
        (visual\s+description
        |feature\s+presence
        |feature\s+locali[sz]ation
        |abcde(?:\s+(?:approximation|criteria|assessment))?
        |diagnosis\s+selection|answer\s+selection|differential\s+diagnos[ie]s|most\s+likely\s+diagnoses
        |final\s+diagnosis|primary\s+diagnosis
        |clinical\s+features(?:\s+supporting(?:\s+(?:your|the))?\s+diagnosis)?
        |diagnos[ie]s)
        \s*(?:\*\*|__|\*|_)?\s*
        (?:[:\-–—]\s*(?:\*\*|__)?\s*(.*?)|)
        \s*$",
    )
    .unwrap()
});

static LIST_ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\(?\d{1,2}[.)]|[-*•])\s+(.+?)\s*$").unwrap());

static NOT_APPLICABLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\W*(?:n/?a|not\s+applicable|none)\b").unwrap());

fn classify_heading(h: &str) -> Heading {
    let h = fold(h);
    if h.starts_with("visual") {
        Heading::Visual
    } else if h.starts_with("feature presence") {
        Heading::Presence
    } else if h.starts_with("feature locali") {
        Heading::Localization
    } else if h.starts_with("abcde") {
        Heading::Abcde
    } else if h.starts_with("final") || h.starts_with("primary") {
        Heading::FinalDiagnosis
    } else if h.starts_with("clinical") {
        Heading::ClinicalFeatures
    } else {
        Heading::Diagnosis
    }
}

struct Section {
    heading: Heading,
    inline: String,
    body: Vec<String>,
}

fn strip_emphasis(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '*' || c == '_').trim()
}

fn list_items(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .filter_map(|l| LIST_ITEM.captures(l).map(|c| strip_emphasis(&c[1]).to_string()))
        .filter(|s| !s.is_empty())
        .collect()
}

fn joined(inline: &str, body: &[String]) -> String {
    std::iter::once(inline)
        .chain(body.iter().map(String::as_str))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// The diagnosis name in a list item such as
/// `Aphthous stomatitis (canker sore) — These are ...`.
fn diagnosis_name(item: &str) -> String {
    let item = strip_emphasis(item);
    let cut = [" — ", " – ", " - ", ": "].iter().filter_map(|sep| item.find(sep)).min().unwrap_or(item.len());
    strip_emphasis(&item[..cut]).trim_end_matches('.').trim().to_string()
}

fn parse_abcde(inline: &str, body: &[String]) -> Option<Abcde> {
    if NOT_APPLICABLE.is_match(inline) {
        return Some(Abcde::NotApplicable);
    }
    let mut rec = AbcdeRecord::default();
    let mut found = false;
    for line in std::iter::once(inline).chain(body.iter().map(String::as_str)) {
        let line = line.trim().trim_start_matches(['-', '*', '•']).trim();
        let Some((key, value)) = line.split_once(':') else { continue };
        let slot = match fold(strip_emphasis(key)).as_str() {
            "a" | "asymmetry" => &mut rec.asymmetry,
            "b" | "border" | "borders" => &mut rec.border,
            "c" | "color" | "colour" | "colors" | "colours" => &mut rec.color,
            "d" | "diameter" => &mut rec.diameter,
            "e" | "evolution" | "evolving" => &mut rec.evolution,
            _ => continue,
        };
        *slot = value.trim().to_string();
        found = true;
    }
    if found {
        Some(Abcde::Assessed(rec))
    } else if body.iter().any(|l| NOT_APPLICABLE.is_match(l)) {
        Some(Abcde::NotApplicable)
    } else {
        None
    }
}

/// Heading-based extraction tolerant to numbering, case and bold markers.
/// Sections that are missing stay empty.
pub fn parse_assessment(response: &str) -> Result<ParsedAssessment, RulesError> {
    if response.trim().is_empty() {
        return Err(RulesError::EmptyResponse);
    }
    let mut preamble: Vec<String> = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    for line in response.lines() {
        if let Some(c) = HEADING.captures(line) {
            sections.push(Section {
                heading: classify_heading(&c[1]),
                inline: c.get(2).map_or("", |m| m.as_str()).trim().to_string(),
                body: Vec::new(),
            });
        } else if let Some(s) = sections.last_mut() {
            s.body.push(line.to_string());
        } else {
            preamble.push(line.to_string());
        }
    }
    if sections.is_empty() {
        return Err(RulesError::Unstructured);
    }

    let mut a = ParsedAssessment { raw: response.to_string(), ..Default::default() };
    let mut diagnosis_section_seen = false;
    let mut diagnoses: Vec<String> = Vec::new();
    for s in &sections {
        match s.heading {
            Heading::Visual => a.visual_description = joined(&s.inline, &s.body),
            Heading::Presence => {
                a.feature_presence = list_items(&s.body);
                if a.feature_presence.is_empty() && !s.inline.is_empty() {
                    a.feature_presence.push(s.inline.clone());
                }
            }
            Heading::Localization => {
                let items = list_items(&s.body);
                a.feature_localization =
                    if items.is_empty() { joined(&s.inline, &s.body) } else { joined(&s.inline, &items) };
            }
            Heading::Abcde => a.abcde = parse_abcde(&s.inline, &s.body),
            Heading::Diagnosis => {
                diagnosis_section_seen = true;
                if !s.inline.is_empty() && !s.inline.ends_with(':') {
                    diagnoses.push(diagnosis_name(&s.inline));
                }
                diagnoses.extend(list_items(&s.body).iter().map(|i| diagnosis_name(i)));
            }
            Heading::FinalDiagnosis => {
                let text = if s.inline.is_empty() {
                    s.body.iter().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("").to_string()
                } else {
                    s.inline.clone()
                };
                let name = diagnosis_name(&text);
                if !name.is_empty() {
                    a.final_diagnosis = Some(name);
                }
            }
            Heading::ClinicalFeatures => a.clinical_features = list_items(&s.body),
        }
    }
    if !sections.iter().any(|s| s.heading == Heading::Visual) {
        a.visual_description = joined("", &preamble.iter().filter(|l| !LIST_ITEM.is_match(l)).cloned().collect::<Vec<_>>());
    }
    if !diagnosis_section_seen {
        // A differential given as a bare numbered list before the headings.
        diagnoses = list_items(&preamble).iter().map(|i| diagnosis_name(i)).collect();
    }
    let mut seen = std::collections::HashSet::new();
    diagnoses.retain(|d| !d.is_empty() && seen.insert(fold(d)));
    if diagnoses.len() > 3 {
        a.compliance.push(ComplianceIssue::TooManyDiagnoses(diagnoses.len()));
        diagnoses.truncate(3);
    }
    a.diagnoses = diagnoses;
    Ok(a)
}

/// `parse_assessment` plus closed-list compliance against `rules`.
pub fn parse_assessment_under(response: &str, rules: &RulesOfConduct) -> Result<ParsedAssessment, RulesError> {
    let mut a = parse_assessment(response)?;
    for d in &a.diagnoses {
        if !rules.allows(d) {
            a.compliance.push(ComplianceIssue::OutsideClosedList(d.clone()));
        }
    }
    Ok(a)
}

static SENTENCE_SPLIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?;\n]+").unwrap());
static CLAUSE_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i),|\bbut\b|\bhowever\b|\binstead\b|\bwhereas\b|\brather than\b").unwrap());
static CONDITION_MENTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:skin|dermatolog\w*|cutaneous)\s+(?:condition|disorder|disease|infection|problem)s?\b|\bcondition\s+or\s+infection\b|\bdermatos[ie]s\b|\brash\b")
        .unwrap()
});
static NEGATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:not|no|neither|nor|never|without|cannot)\b|n't\b").unwrap());

/// True when some clause names a skin condition without negating it.
/// "this does not seem to be a skin lesion but rather a skin condition"
/// asserts; "does not depict a skin lesion or a skin condition" does not.
pub fn asserts_skin_condition(text: &str) -> bool {
    SENTENCE_SPLIT.split(text).any(|sentence| {
        CLAUSE_SPLIT
            .split(sentence)
            .any(|clause| CONDITION_MENTION.is_match(clause) && !NEGATION.is_match(clause))
    })
}

pub fn classify_path(a: &ParsedAssessment) -> PathDecision {
    let rules = RulesOfConduct::lesion();
    match &a.abcde {
        Some(Abcde::Assessed(_)) => {
            if let Some(d) = a.diagnoses.iter().find(|d| rules.allows(d)) {
                return PathDecision {
                    path: Path::Lesion,
                    reason: format!("ABCDE assessed and \"{d}\" is a listed lesion diagnosis"),
                };
            }
            PathDecision { path: Path::End, reason: "ABCDE assessed but no listed lesion diagnosis".into() }
        }
        Some(Abcde::NotApplicable) if asserts_skin_condition(&a.raw) => PathDecision {
            path: Path::Condition,
            reason: "ABCDE not applicable and the response describes a skin condition".into(),
        },
        Some(Abcde::NotApplicable) => {
            PathDecision { path: Path::End, reason: "ABCDE not applicable and no skin condition described".into() }
        }
        None => PathDecision { path: Path::End, reason: "no ABCDE assessment in the response".into() },
    }
}
