use std::io::Read;

use serde::{Deserialize, Serialize};

/// One clinician's Likert scores for a case.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpertReview {
    pub case_id: String,
    /// Symptom and image description, 1..=5.
    pub symptom_image_score: u8,
    /// Diagnostic reasoning, 1..=5.
    pub diagnostic_reasoning_score: u8,
    pub reviewer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line in the input.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewIngest {
    pub reviews: Vec<ExpertReview>,
    pub errors: Vec<RowError>,
}

fn likert(field: &str, name: &str) -> Result<u8, String> {
    match field.parse::<u8>() {
        Ok(v @ 1..=5) => Ok(v),
        _ => Err(format!("{name} must be an integer 1..=5, got {field:?}")),
    }
}

/// Parses `case_id,symptom_image_score,diagnostic_reasoning_score,reviewer`
/// rows. A header row is optional. Bad rows are reported and skipped; the
/// rest are kept.
pub fn ingest_expert_reviews(input: impl Read) -> ReviewIngest {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = ReviewIngest::default();
    for (index, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(index as u64 + 1);
                out.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(index as u64 + 1);
        if index == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("case_id")) {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed = (|| {
            if record.len() != 4 {
                return Err(format!("expected 4 fields, found {}", record.len()));
            }
            if record[0].is_empty() {
                return Err("case_id is empty".to_string());
            }
            Ok(ExpertReview {
                case_id: record[0].to_string(),
                symptom_image_score: likert(&record[1], "symptom_image_score")?,
                diagnostic_reasoning_score: likert(&record[2], "diagnostic_reasoning_score")?,
                reviewer: record[3].to_string(),
            })
        })();
        match parsed {
            Ok(r) => out.reviews.push(r),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    out
}
