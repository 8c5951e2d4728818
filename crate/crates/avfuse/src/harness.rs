//! Parallel evaluation and the CSV/JSON artifacts of each run.

use std::fs;
use std::path::Path;

use avfuse_core::model::ModelParams;
use avfuse_core::train::{predict, report, AblationArm, EpochLog, EvalOptions, EvalReport, OcclusionRow, Sample};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{AppResult, IoContext};

/// [`avfuse_core::train::evaluate`] spread over the worker pool. Work is
/// split at fixed sample boundaries so the result does not depend on the
/// number of threads.
pub fn par_evaluate(params: &ModelParams, samples: &[Sample], options: &EvalOptions) -> avfuse_core::Result<EvalReport> {
    let chunk = options.batch_size.max(1);
    let parts = samples
        .par_chunks(chunk)
        .map(|c| predict(params, c, options))
        .collect::<avfuse_core::Result<Vec<_>>>()?;
    let preds: Vec<(usize, f64)> = parts.into_iter().flatten().collect();
    report(samples, &preds, params.config.n_classes)
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn class_header(class_names: &[&str]) -> String {
    class_names.iter().map(|c| format!("acc_{c}")).collect::<Vec<_>>().join(",")
}

/// Columns: epoch, train_loss, val_loss, lr, macro_acc, then one accuracy
/// per class. Undefined accuracies are left empty.
pub fn metrics_csv(history: &[EpochLog], class_names: &[&str]) -> String {
    let mut out = format!("epoch,train_loss,val_loss,lr,macro_acc,{}\n", class_header(class_names));
    for l in history {
        let per: Vec<String> = l.per_class_acc.iter().map(|&a| opt(a)).collect();
        out.push_str(&format!(
            "{},{},{},{:.6e},{},{}\n",
            l.epoch,
            num(l.train_loss),
            num(l.val_loss),
            l.lr,
            opt(l.macro_acc),
            per.join(",")
        ));
    }
    out
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_csv(r: &EvalReport, class_names: &[&str]) -> String {
    let mut out = format!("true\\pred,{}\n", class_names.join(","));
    for (name, row) in class_names.iter().zip(&r.confusion) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    out
}

pub fn report_json(r: &EvalReport, class_names: &[&str]) -> Value {
    let per_class: Vec<Value> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| {
            json!({
                "class": c,
                "accuracy": r.per_class_acc[i],
                "samples": r.sample_count[i],
            })
        })
        .collect();
    json!({
        "sample_count": r.sample_count.iter().sum::<u64>(),
        "macro_acc": r.macro_acc,
        "micro_acc": r.micro_acc,
        "mean_loss": r.mean_loss,
        "per_class": per_class,
        "confusion": r.confusion,
    })
}

/// One row per ratio: the ratio, then the seed-averaged accuracy of each
/// class.
pub fn occlusion_csv(rows: &[OcclusionRow], class_names: &[&str]) -> String {
    let mut out = format!("ratio,{}\n", class_header(class_names));
    for r in rows {
        let per: Vec<String> = r.mean_per_class.iter().map(|&a| opt(a)).collect();
        out.push_str(&format!("{},{}\n", num(r.ratio), per.join(",")));
    }
    out
}

pub fn occlusion_json(rows: &[OcclusionRow], class_names: &[&str]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "ratio": r.ratio,
                    "mean_macro_acc": r.mean_macro,
                    "mean_per_class": r.mean_per_class,
                    "per_seed_macro_acc": r.per_seed.iter().map(|s| s.macro_acc).collect::<Vec<_>>(),
                    "classes": class_names,
                })
            })
            .collect(),
    )
}

/// One row per arm: mode, best epoch, macro accuracy, then per class.
pub fn ablation_csv(arms: &[AblationArm], class_names: &[&str]) -> String {
    let mut out = format!("arm,best_epoch,macro_acc,{}\n", class_header(class_names));
    for a in arms {
        let r = &a.outcome.best_report;
        let per: Vec<String> = r.per_class_acc.iter().map(|&v| opt(v)).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            a.mode.name(),
            a.outcome.best_epoch,
            opt(r.macro_acc),
            per.join(",")
        ));
    }
    out
}

pub fn ablation_json(arms: &[AblationArm], class_names: &[&str]) -> Value {
    Value::Array(
        arms.iter()
            .map(|a| {
                json!({
                    "arm": a.mode.name(),
                    "best_epoch": a.outcome.best_epoch,
                    "initial_loss": a.outcome.initial_loss,
                    "train_split_hash": a.outcome.train_hash,
                    "val_split_hash": a.outcome.val_hash,
                    "report": report_json(&a.outcome.best_report, class_names),
                })
            })
            .collect(),
    )
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, text).at(path)
}

pub fn write_json(path: &Path, v: &Value) -> AppResult<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_and_metrics_layout() {
        let r = EvalReport::from_predictions(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        let csv = confusion_csv(&r, &["a", "b"]);
        assert_eq!(csv, "true\\pred,a,b\na,1,1\nb,0,1\n");
        let log = EpochLog {
            epoch: 1,
            train_loss: 2.0,
            val_loss: 1.5,
            lr: 0.01,
            macro_acc: Some(0.75),
            per_class_acc: vec![Some(0.5), None],
        };
        assert_eq!(
            metrics_csv(&[log], &["a", "b"]),
            "epoch,train_loss,val_loss,lr,macro_acc,acc_a,acc_b\n1,2.000000,1.500000,1.000000e-2,0.750000,0.500000,\n"
        );
        let j = report_json(&r, &["a", "b"]);
        assert_eq!(j["per_class"][0]["accuracy"], 0.5);
        assert_eq!(j["sample_count"], 3);
    }

    #[test]
    fn occlusion_table_shape() {
        let r = EvalReport::from_predictions(&[0, 1], &[0, 1], 2).unwrap();
        let rows: Vec<OcclusionRow> = [0.0, 0.2, 0.4, 0.6, 0.8]
            .iter()
            .map(|&ratio| OcclusionRow {
                ratio,
                per_seed: vec![r.clone()],
                mean_per_class: r.per_class_acc.clone(),
                mean_macro: r.macro_acc,
            })
            .collect();
        let csv = occlusion_csv(&rows, &["a", "b"]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().all(|l| l.split(',').count() == 3));
    }
}
