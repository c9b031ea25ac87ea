//! Training report files and their tidy long-format merge.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use dds_core::{SplitMetrics, TrainReport};
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, write_json};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "dds-train-report/1";
pub const REPORT_FILE: &str = "report.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const TIDY_HEADER: &str = "run_id,epoch,metric,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub run_id: String,
    /// Dataset directory name the run trained on.
    pub dataset: String,
    pub driver_id: String,
    pub report: TrainReport,
}

impl RunReport {
    pub fn new(run_id: String, dataset: String, driver_id: String, report: TrainReport) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            run_id,
            dataset,
            driver_id,
            report,
        }
    }
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-epoch CSV with one row per split.
pub fn epochs_csv(report: &TrainReport) -> String {
    let mut out =
        String::from("epoch,split,loss,decision_acc,stop_exact,stop_mae,lambda_err,beta_err\n");
    for e in &report.epochs {
        let mut row = |split: &str, m: &SplitMetrics| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.epoch,
                split,
                m.loss,
                m.decision_accuracy,
                m.stop_exact,
                m.stop_mae,
                opt(e.lambda_error),
                opt(e.beta_error)
            ));
        };
        row("train", &e.train);
        if let Some(test) = &e.test {
            row("test", test);
        }
    }
    out
}

pub fn write_run(dir: &Path, run: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(REPORT_FILE), run)?;
    let path = dir.join(EPOCHS_FILE);
    fs::write(&path, epochs_csv(&run.report)).map_err(|e| Error::io(&path, e))
}

pub fn load_run(path: &Path) -> Result<RunReport> {
    let value: serde_json::Value = read_json(path)?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if schema != REPORT_SCHEMA {
        return Err(Error::Report {
            path: path.to_path_buf(),
            message: format!("schema {schema:?}, expected {REPORT_SCHEMA:?}"),
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Report {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Report files named by `inputs`: files as given, directories searched
/// recursively for `report.json`, each directory's results sorted by path.
pub fn collect_reports(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            entries.push(entry.map_err(|e| Error::io(dir, e))?.path());
        }
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(&path, found)?;
            } else if path.file_name().is_some_and(|n| n == REPORT_FILE) {
                found.push(path);
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    for input in inputs {
        if input.is_dir() {
            walk(input, &mut found)?;
        } else if input.is_file() {
            found.push(input.clone());
        } else {
            return Err(Error::io(
                input,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
    }
    Ok(found)
}

/// Merge runs into `run_id,epoch,metric,value` rows.
pub fn tidy_csv(runs: &[RunReport]) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::Report {
            path: PathBuf::new(),
            message: "no reports to merge".into(),
        });
    }
    let mut seen = BTreeSet::new();
    let mut out = String::from(TIDY_HEADER);
    out.push('\n');
    for run in runs {
        if !seen.insert(run.run_id.as_str()) {
            return Err(Error::Report {
                path: PathBuf::from(&run.run_id),
                message: "duplicate run_id".into(),
            });
        }
        for e in &run.report.epochs {
            let mut push = |metric: &str, value: f64| {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    run.run_id, e.epoch, metric, value
                ));
            };
            let splits = [("train", Some(&e.train)), ("test", e.test.as_ref())];
            for (split, metrics) in splits {
                if let Some(m) = metrics {
                    push(&format!("{split}_loss"), m.loss);
                    push(&format!("{split}_decision_acc"), m.decision_accuracy);
                    push(&format!("{split}_stop_exact"), m.stop_exact);
                    push(&format!("{split}_stop_mae"), m.stop_mae);
                }
            }
            if let Some(v) = e.lambda_error {
                push("lambda_err", v);
            }
            if let Some(v) = e.beta_error {
                push("beta_err", v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dds_core::{BehaviorParams, EpochRecord, TrainConfig};

    fn run(id: &str, with_test: bool) -> RunReport {
        let m = SplitMetrics {
            loss: 0.5,
            decision_accuracy: 0.75,
            stop_exact: 0.25,
            stop_mae: 1.5,
        };
        let params = BehaviorParams::discounted_satisficing(10.0, 0.9).unwrap();
        let report = TrainReport {
            config: TrainConfig::default(),
            train_days: 2,
            test_days: usize::from(with_test),
            epochs: (1..=2)
                .map(|epoch| EpochRecord {
                    epoch,
                    train: m,
                    test: with_test.then_some(m),
                    lambda_error: Some(0.125),
                    beta_error: None,
                    params,
                })
                .collect(),
            final_params: params,
        };
        RunReport::new(id.into(), "sim".into(), "sim".into(), report)
    }

    #[test]
    fn epochs_csv_rows_per_split() {
        let text = epochs_csv(&run("a", true).report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "1,train,0.5,0.75,0.25,1.5,0.125,");
        assert_eq!(lines[2], "1,test,0.5,0.75,0.25,1.5,0.125,");
    }

    #[test]
    fn tidy_has_exact_columns() {
        let text = tidy_csv(&[run("a", false), run("b", true)]).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(
            rdr.headers().unwrap(),
            vec!["run_id", "epoch", "metric", "value"]
        );
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        // 2 epochs x (4 train + 1 lambda) for a, plus 4 test metrics per epoch for b.
        assert_eq!(rows.len(), 10 + 18);
        let ids: BTreeSet<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
        assert_eq!(ids.len(), 2);
    }

    #[test]
    fn tidy_rejects_empty_and_duplicates() {
        assert!(tidy_csv(&[]).is_err());
        assert!(tidy_csv(&[run("a", false), run("a", false)]).is_err());
    }

    #[test]
    fn schema_is_checked_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let r = run("a", true);
        write_run(dir.path(), &r).unwrap();
        let path = dir.path().join(REPORT_FILE);
        assert_eq!(load_run(&path).unwrap(), r);
        fs::write(&path, r#"{"schema": "other/2"}"#).unwrap();
        assert!(matches!(load_run(&path), Err(Error::Report { .. })));
        assert_eq!(
            collect_reports(&[dir.path().to_path_buf()]).unwrap(),
            vec![path]
        );
    }
}
