//! Plot-ready report files: a CSV with one row per switching period and a
//! JSON document carrying the full report including confusion matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, EvalReport};
use crate::io::write_atomic;
use crate::sim::PolicyKind;

/// CSV columns: `k`, `mean_accuracy`, `std_accuracy`, then one per-policy
/// accuracy column per policy (empty where a policy was never evaluated).
pub fn report_to_csv(report: &EvalReport) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string(), "mean_accuracy".into(), "std_accuracy".into()];
    for policy in PolicyKind::ALL {
        header.push(format!("acc_{}", policy.short_name().to_lowercase()));
    }
    writer.write_record(&header)?;
    for entry in &report.entries {
        let mut row = vec![
            entry.k.to_string(),
            format!("{}", entry.mean_accuracy),
            format!("{}", entry.std_accuracy),
        ];
        for acc in entry.per_policy_accuracy {
            row.push(acc.map(|a| format!("{a}")).unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv flush failed: {e}")))
}

pub fn write_report_csv(path: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(path, &report_to_csv(report)?)
}

pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

/// Confusion matrix CSV: a `true\predicted` corner cell, one column per
/// predicted policy, one row per true policy.
pub fn confusion_to_csv(confusion: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["true\\predicted".to_string()];
    for policy in PolicyKind::ALL {
        header.push(policy.short_name().to_string());
    }
    writer.write_record(&header)?;
    for (i, row) in confusion.iter().enumerate() {
        let mut record = vec![PolicyKind::ALL[i].short_name().to_string()];
        for &count in row {
            record.push(count.to_string());
        }
        writer.write_record(&record)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv flush failed: {e}")))
}

pub fn write_confusion_csv(path: &Path, confusion: &ConfusionMatrix) -> Result<()> {
    write_atomic(path, &confusion_to_csv(confusion)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::KReport;

    fn sample_report() -> EvalReport {
        let confusion: ConfusionMatrix = [
            [100, 0, 0, 0, 0],
            [0, 100, 0, 0, 0],
            [0, 4, 96, 0, 0],
            [0, 1, 2, 97, 0],
            [5, 0, 0, 0, 95],
        ];
        EvalReport {
            n_runs: 1,
            entries: vec![KReport {
                k: 100,
                mean_accuracy: 0.976,
                std_accuracy: 0.0,
                per_policy_accuracy: crate::eval::per_policy_accuracy(&confusion),
                confusion,
            }],
        }
    }

    #[test]
    fn report_csv_has_one_row_per_k_plus_header() {
        let csv = report_to_csv(&sample_report()).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("k,mean_accuracy,std_accuracy,acc_sj,acc_rj"));
        assert!(lines[1].starts_with("100,0.976,0,1,1,0.96,0.97,0.95"));
    }

    #[test]
    fn confusion_csv_is_labeled_by_policy() {
        let report = sample_report();
        let csv = confusion_to_csv(&report.entries[0].confusion).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "true\\predicted,SJ,RJ,FRJ,RJWD,CJ");
        assert_eq!(lines[3], "FRJ,0,4,96,0,0");
    }

    #[test]
    fn json_round_trip_preserves_the_report() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_report_json(&path, &report).unwrap();
        let loaded: EvalReport =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(loaded, report);
    }
}
