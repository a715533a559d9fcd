//! Plain-text tables for evaluation reports and agreement matrices. Every
//! number shown here is read straight from the machine-readable report, so
//! the two outputs can never drift apart.

use novex_core::metrics::{AgreementMatrix, ClassificationScores, EvalReport};
use novex_core::model::RetrievalScores;

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Lays out rows of cells with two-space gutters, padding each column to its
/// widest cell. The first row is the header.
fn layout(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            let pad = widths[i].saturating_sub(cell.chars().count());
            if i + 1 < row.len() {
                line.push_str(&" ".repeat(pad));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn retrieval_row(label: &str, scores: &RetrievalScores) -> Vec<String> {
    vec![
        label.to_string(),
        fmt(scores.p),
        fmt(scores.soft_p),
        fmt(scores.r),
        fmt(scores.soft_r),
        fmt(scores.f1),
        fmt(scores.soft_f1),
        fmt(scores.ndcg),
    ]
}

fn classification_cells(scores: &ClassificationScores) -> [String; 3] {
    [fmt(scores.predicted_novel_fraction), fmt(scores.accuracy), fmt(scores.macro_f1)]
}

fn paired_cells(full: &ClassificationScores, adv: Option<&ClassificationScores>) -> [String; 3] {
    let f = classification_cells(full);
    match adv {
        Some(a) => {
            let a = classification_cells(a);
            [
                format!("{} / {}", f[0], a[0]),
                format!("{} / {}", f[1], a[1]),
                format!("{} / {}", f[2], a[2]),
            ]
        }
        None => f,
    }
}

/// Renders one run's evaluation: retrieval scores over not-novel records,
/// novel feature identification over novel records, and claim classification
/// over everything, with adversarial-subset numbers after the slash when an
/// adversarial report is present.
pub fn render_report(
    title: &str,
    report: &EvalReport,
    adversarial: Option<&EvalReport>,
) -> String {
    let mut out = format!("== {title} ==\n");
    out.push_str(&format!(
        "records: retrieval {} | novel-feature {} | classification {}\n",
        report.counts.retrieval, report.counts.nfi, report.counts.classification
    ));

    out.push_str(&format!(
        "\npassage retrieval, not-novel records (ranking: {})\n",
        report.ndcg_ranking
    ));
    let header: Vec<String> =
        ["level", "P", "~P", "R", "~R", "F1", "~F1", "nDCG"].iter().map(|s| s.to_string()).collect();
    let mut rows = vec![header];
    rows.push(retrieval_row("claim", &report.retrieval_claim));
    rows.push(retrieval_row("feature", &report.retrieval_feature));
    out.push_str(&layout(&rows));

    out.push_str("\nnovel feature identification, novel records\n");
    let (p, r, f1) = report.nfi;
    let rows = vec![
        vec!["P".to_string(), "R".to_string(), "F1".to_string()],
        vec![fmt(p), fmt(r), fmt(f1)],
    ];
    out.push_str(&layout(&rows));

    match adversarial {
        Some(adv) => out.push_str(&format!(
            "\nclaim classification, all records (full / adversarial n={})\n",
            adv.counts.classification
        )),
        None => out.push_str("\nclaim classification, all records\n"),
    }
    let rows = vec![
        vec!["pred. novel".to_string(), "accuracy".to_string(), "macro F1".to_string()],
        paired_cells(&report.classification, adversarial.map(|a| &a.classification)).to_vec(),
    ];
    out.push_str(&layout(&rows));

    if !report.skipped.is_empty() {
        out.push_str(&format!("\nskipped {} records:\n", report.skipped.len()));
        for entry in &report.skipped {
            out.push_str(&format!("  {entry}\n"));
        }
    }
    out
}

/// Renders a pairwise Cohen's kappa matrix.
pub fn render_matrix(title: &str, matrix: &AgreementMatrix) -> String {
    let mut out = format!("== {title} ==\n");
    let mut rows = Vec::new();
    let mut header = vec![String::new()];
    header.extend(matrix.names.iter().cloned());
    rows.push(header);
    for (i, name) in matrix.names.iter().enumerate() {
        let mut row = vec![name.clone()];
        for j in 0..matrix.names.len() {
            row.push(fmt(matrix.kappa[i][j]));
        }
        rows.push(row);
    }
    out.push_str(&layout(&rows));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_pads_columns_and_trims_tail() {
        let rows = vec![
            vec!["a".to_string(), "bb".to_string()],
            vec!["ccc".to_string(), "d".to_string()],
        ];
        let text = layout(&rows);
        assert_eq!(text, "a    bb\nccc  d\n");
    }
}
