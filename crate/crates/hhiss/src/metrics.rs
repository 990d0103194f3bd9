//! Evaluation metrics, result tables, and saliency maps.
//!
//! The class universe is always passed explicitly (`n_classes`), so a
//! constant predictor cannot silently shrink the universe and inflate its
//! score. Balanced accuracy and macro F1 require at least one true example
//! of every class; a class that is never predicted gets F1 = 0 through the
//! standard zero-division convention.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::net::NetworkParams;

/// Per-dataset evaluation summary.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub dataset_tag: String,
    pub n_examples: usize,
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    /// `confusion[[t, p]]` counts examples of true class `t` predicted as `p`.
    pub confusion: Array2<u64>,
}

fn validate_pairs(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    if labels.len() != predictions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if let Some(&bad) = labels.iter().chain(predictions).find(|&&v| v >= n_classes) {
        return Err(Error::Data(format!(
            "class id {bad} out of range for {n_classes} classes"
        )));
    }
    for class in 0..n_classes {
        if !labels.contains(&class) {
            return Err(Error::Data(format!(
                "class {class} has no true examples; balanced metrics are undefined"
            )));
        }
    }
    Ok(())
}

/// `confusion[[t, p]]` counts of true class `t` predicted as `p`.
pub fn confusion_matrix(
    labels: &[usize],
    predictions: &[usize],
    n_classes: usize,
) -> Result<Array2<u64>> {
    validate_pairs(labels, predictions, n_classes)?;
    let mut m = Array2::zeros((n_classes, n_classes));
    for (&y, &p) in labels.iter().zip(predictions) {
        m[[y, p]] += 1;
    }
    Ok(m)
}

fn recalls_from_confusion(confusion: &Array2<u64>) -> Vec<f64> {
    (0..confusion.nrows())
        .map(|t| {
            let row_total: u64 = confusion.row(t).sum();
            confusion[[t, t]] as f64 / row_total as f64
        })
        .collect()
}

fn f1s_from_confusion(confusion: &Array2<u64>) -> Vec<f64> {
    (0..confusion.nrows())
        .map(|c| {
            let tp = confusion[[c, c]];
            let fn_ = confusion.row(c).sum() - tp;
            let fp = confusion.column(c).sum() - tp;
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .collect()
}

/// Unweighted mean of per-class recalls.
pub fn balanced_accuracy(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<f64> {
    let confusion = confusion_matrix(labels, predictions, n_classes)?;
    let recalls = recalls_from_confusion(&confusion);
    Ok(recalls.iter().sum::<f64>() / n_classes as f64)
}

/// Unweighted mean of per-class F1 scores; a class with zero true and zero
/// predicted positives contributes 0.
pub fn macro_f1(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<f64> {
    let confusion = confusion_matrix(labels, predictions, n_classes)?;
    let f1s = f1s_from_confusion(&confusion);
    Ok(f1s.iter().sum::<f64>() / n_classes as f64)
}

/// Argmax per row; ties resolve to the lowest class index.
pub fn argmax_predictions(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (i, &v) in row.iter().enumerate() {
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            best
        })
        .collect()
}

/// Score argmax predictions of `logits` against `labels`.
pub fn evaluate_logits(
    logits: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    dataset_tag: &str,
) -> Result<MetricsReport> {
    let predictions = argmax_predictions(logits);
    let confusion = confusion_matrix(labels, &predictions, n_classes)?;
    let per_class_recall = recalls_from_confusion(&confusion);
    let per_class_f1 = f1s_from_confusion(&confusion);
    Ok(MetricsReport {
        dataset_tag: dataset_tag.to_string(),
        n_examples: labels.len(),
        balanced_accuracy: per_class_recall.iter().sum::<f64>() / n_classes as f64,
        macro_f1: per_class_f1.iter().sum::<f64>() / n_classes as f64,
        per_class_recall,
        per_class_f1,
        confusion,
    })
}

/// Unweighted mean balanced accuracy over the reports whose tag is in
/// `ood_tags`.
pub fn ood_mean(reports: &[MetricsReport], ood_tags: &[&str]) -> Result<f64> {
    if ood_tags.is_empty() {
        return Err(Error::Empty("no out-of-distribution tags".into()));
    }
    let values: Vec<f64> = reports
        .iter()
        .filter(|r| ood_tags.contains(&r.dataset_tag.as_str()))
        .map(|r| r.balanced_accuracy)
        .collect();
    if values.is_empty() {
        return Err(Error::Empty(format!(
            "no report matches out-of-distribution tags {ood_tags:?}"
        )));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Absolute input gradient of each row's predicted-class logit. With
/// `normalize_rows`, each row is divided by its max (rows of all zeros stay
/// zero) for display export.
pub fn saliency_map(
    params: &NetworkParams,
    inputs: &Array2<f64>,
    normalize_rows: bool,
) -> Result<Array2<f64>> {
    let (logits, cache) = params.forward_eval(inputs)?;
    let predictions = argmax_predictions(&logits);
    let mut grad_logits = Array2::zeros(logits.dim());
    for (i, &p) in predictions.iter().enumerate() {
        grad_logits[[i, p]] = 1.0;
    }
    let grads = params.backward(&cache, &grad_logits)?;
    if !grads.input.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("saliency gradients".into()));
    }
    let mut map = grads.input.mapv(f64::abs);
    if normalize_rows {
        for mut row in map.rows_mut() {
            let max = row.fold(0.0f64, |a, &b| a.max(b));
            if max > 0.0 {
                row.mapv_inplace(|v| v / max);
            }
        }
    }
    Ok(map)
}

/// Plain-text results table: one row per approach, per-dataset balanced
/// accuracy and macro F1 columns, and a closing out-of-distribution mean
/// column.
pub fn render_results_table(
    approaches: &[(String, Vec<MetricsReport>)],
    ood_tags: &[&str],
) -> String {
    let mut tags: Vec<&str> = Vec::new();
    for (_, reports) in approaches {
        for r in reports {
            if !tags.contains(&r.dataset_tag.as_str()) {
                tags.push(&r.dataset_tag);
            }
        }
    }
    let mut header = vec!["Approach".to_string()];
    for tag in &tags {
        header.push(format!("{tag} Acc"));
        header.push(format!("{tag} F1"));
    }
    header.push("OOD Mean".to_string());

    let mut rows = vec![header];
    for (name, reports) in approaches {
        let mut row = vec![name.clone()];
        for tag in &tags {
            match reports.iter().find(|r| r.dataset_tag == *tag) {
                Some(r) => {
                    row.push(format!("{:.4}", r.balanced_accuracy));
                    row.push(format!("{:.4}", r.macro_f1));
                }
                None => {
                    row.push("-".into());
                    row.push("-".into());
                }
            }
        }
        match ood_mean(reports, ood_tags) {
            Ok(v) => row.push(format!("{v:.4}")),
            Err(_) => row.push("-".into()),
        }
        rows.push(row);
    }

    let n_cols = rows[0].len();
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: usize = widths.iter().sum::<usize>() + 2 * (n_cols - 1);
            out.push_str(&"-".repeat(rule));
            out.push('\n');
        }
    }
    out
}
