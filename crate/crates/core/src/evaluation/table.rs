use serde::{Deserialize, Serialize};

use super::aggregate::{CapabilityReport, NliRow};

fn nli_line(name: &str, row: &NliRow) -> String {
    format!(
        "{name:<20} | ({}) {:.3}{:pad1$} | ({}) {:.3}{:pad2$} | {:.2}\n",
        row.context_count,
        row.context,
        "",
        row.entity_count,
        row.entities,
        "",
        row.weighted.value,
        pad1 = 7usize.saturating_sub(row.context_count.to_string().len()),
        pad2 = 7usize.saturating_sub(row.entity_count.to_string().len()),
    )
}

/// Plain-text capability table: one row per metric, context and entity
/// columns, and the weighted average.
pub fn render_table(report: &CapabilityReport) -> String {
    let ts = &report.textual_similarity;
    let ex = &report.expert;
    let mut out = String::new();
    out.push_str(&format!(
        "Capability report: {} cases, {} expert reviews, weights {} / {}\n\n",
        report.case_count, ex.review_count, report.weights.w_context, report.weights.w_entities
    ));
    out.push_str(&format!("{:<20} | {:<15} | {:<15} | {}\n", "Metric", "Context", "Entities", "Average"));
    out.push_str(&format!("{:-<20}-+-{:-<15}-+-{:-<15}-+-{:-<7}\n", "", "", "", ""));
    out.push_str(&format!(
        "{:<20} | {:<15.2} | {:<15.2} | {:.2}\n",
        "Textual Similarity", ts.context, ts.entities, ts.weighted.value
    ));
    out.push_str(&nli_line("NLI Neutral", &report.nli_neutral));
    out.push_str(&nli_line("NLI Contradiction", &report.nli_contradiction));
    out.push_str(&nli_line("NLI Entailment", &report.nli_entailment));
    out.push_str(&format!(
        "{:<20} | {:<15} | {:<15} | {:.2}\n",
        "Expert Review",
        format!("({:.2}) {:.3}", ex.context_likert, ex.context),
        format!("({:.2}) {:.3}", ex.entities_likert, ex.entities),
        ex.mean
    ));
    out.push_str(&format!("{:<20} | {:<15} | {:<15} | {:.2}\n", "Capability", "", "", report.capability.value));
    out.push_str(&format!(
        "\nBERTScore            | Precision {:.2} | Recall {:.2} | F1 {:.2}\n",
        report.bert.precision, report.bert.recall, report.bert.f1
    ));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn unit(values: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { edges, counts }
    }
}

/// Data behind the BERTScore bar chart and per-case distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub bert_means: [f64; 3],
    pub precision: Histogram,
    pub recall: Histogram,
    pub f1: Histogram,
}

pub fn plot_data(report: &CapabilityReport) -> PlotData {
    let r = &report.records;
    PlotData {
        bert_means: [report.bert.precision, report.bert.recall, report.bert.f1],
        precision: Histogram::unit(r.iter().map(|x| x.bert.precision), 10),
        recall: Histogram::unit(r.iter().map(|x| x.bert.recall), 10),
        f1: Histogram::unit(r.iter().map(|x| x.bert.f1), 10),
    }
}
