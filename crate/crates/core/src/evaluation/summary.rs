//! Plain-text summary tables for the console.

use super::experiment::EvaluationReport;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.push(line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push(line(row.iter().map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

/// One row per experiment: id, description, answer relevance, faithfulness, context recall.
pub fn overall_table(reports: &[EvaluationReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.experiment_id.clone(),
                r.config.description.clone(),
                cell(r.aggregates.answer_relevance),
                cell(r.aggregates.faithfulness),
                cell(r.aggregates.context_recall),
            ]
        })
        .collect();
    render(&["Exp", "Description", "AR", "F", "CR"], &rows)
}

/// One row per cutoff with the macro-averaged P@k, R@k and F1@k.
pub fn topk_table(report: &EvaluationReport) -> String {
    let a = &report.aggregates;
    let rows: Vec<Vec<String>> = a
        .precision_at
        .keys()
        .map(|k| {
            vec![
                k.to_string(),
                cell(a.precision_at.get(k).copied()),
                cell(a.recall_at.get(k).copied()),
                cell(a.f1_at.get(k).copied()),
            ]
        })
        .collect();
    render(&["k", "P@k", "R@k", "F1@k"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let t = render(&["k", "P@k"], &[vec!["1".into(), "0.45".into()], vec!["8".into(), "-".into()]]);
        assert_eq!(t, "k  P@k\n-  ----\n1  0.45\n8  -\n");
    }
}
