use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{FeatureError, LesionFeatures, PlotArtifact};

pub const REPORT_TEMPLATE: &str = include_str!("../../resources/technical_report.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnicalReport {
    pub text: String,
    pub features: LesionFeatures,
    #[serde(skip)]
    pub plots: Vec<PlotArtifact>,
}

/// Fills the report template. Numbers use shortest round-trip formatting so
/// `parse_technical_report` recovers them bit for bit.
pub fn build_technical_report(features: &LesionFeatures) -> TechnicalReport {
    let f = features;
    let text = [
        ("{area}", f.area),
        ("{perimeter}", f.perimeter),
        ("{circularity}", f.circularity),
        ("{std_r}", f.color_std[0]),
        ("{std_g}", f.color_std[1]),
        ("{std_b}", f.color_std[2]),
        ("{asymmetry_major}", f.asymmetry_major),
        ("{asymmetry_minor}", f.asymmetry_minor),
        ("{asymmetry_avg}", f.asymmetry_avg),
    ]
    .iter()
    .fold(REPORT_TEMPLATE.to_string(), |acc, (key, v)| acc.replace(key, &v.to_string()));
    TechnicalReport { text, features: features.clone(), plots: Vec::new() }
}

const NUMBER: &str = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|NaN|inf|-inf)";

static FIELDS: LazyLock<Vec<(&'static str, Regex)>> = LazyLock::new(|| {
    [
        ("area", r"Area:"),
        ("perimeter", r"Perimeter:"),
        ("circularity", r"Circularity Index:"),
        ("std_r", r"Red Channel:"),
        ("std_g", r"Green Channel:"),
        ("std_b", r"Blue Channel:"),
        ("asymmetry_major", r"Major Axis:"),
        ("asymmetry_minor", r"Minor Axis:"),
        ("asymmetry_avg", r"Average Asymmetry:"),
    ]
    .into_iter()
    .map(|(name, label)| (name, Regex::new(&format!(r"(?m)^[^\n]*?{label}[ \t]*{NUMBER}")).unwrap()))
    .collect()
});

/// Reads the numeric fields back out of a rendered report.
pub fn parse_technical_report(text: &str) -> Result<LesionFeatures, FeatureError> {
    let mut values = [0.0f64; 9];
    for (slot, (name, re)) in values.iter_mut().zip(FIELDS.iter()) {
        let caps = re.captures(text).ok_or(FeatureError::ReportField(name))?;
        *slot = caps[1].parse().map_err(|_| FeatureError::ReportField(name))?;
    }
    let [area, perimeter, circularity, r, g, b, major, minor, avg] = values;
    Ok(LesionFeatures {
        area,
        perimeter,
        circularity,
        asymmetry_major: major,
        asymmetry_minor: minor,
        asymmetry_avg: avg,
        color_std: [r, g, b],
    })
}
