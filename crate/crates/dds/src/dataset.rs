//! On-disk dataset directories.
//!
//! A dataset is one driver: `meta.json` describes it and `days.csv` holds one
//! row per slot with 1-based `day_index` and `slot`. Simulated datasets also
//! carry `generator.json` with the generator configuration and its realized
//! latent trajectory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dds_core::{DaySequence, DriverHistory, LatentTrajectory, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "dds-dataset/1";
pub const META_FILE: &str = "meta.json";
pub const DAYS_FILE: &str = "days.csv";
pub const GENERATOR_FILE: &str = "generator.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Simulated,
    Ingested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub driver_id: String,
    pub source: DatasetSource,
    pub days: usize,
    pub width: usize,
    /// Utility written into slots after the last real ride, if any.
    pub pad_value: Option<f64>,
    /// Number of leading training days.
    pub split_index: Option<usize>,
    /// Calendar date of each day, for ingested data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dates: Vec<String>,
    /// Settings that produced the dataset.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSidecar {
    pub sim_config: SimConfig,
    pub latent: LatentTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub history: DriverHistory,
    pub generator: Option<GeneratorSidecar>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SlotRow {
    day_index: usize,
    slot: usize,
    utility: f64,
    label: u8,
}

fn dataset_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Report {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Serialize a history as `days.csv` text. Utilities use the shortest
/// representation that parses back to the same value.
pub fn days_csv(history: &DriverHistory) -> String {
    let mut out = String::from("day_index,slot,utility,label\n");
    for (d, day) in history.days().iter().enumerate() {
        for (t, (u, y)) in day.utilities().iter().zip(day.labels()).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", d + 1, t + 1, u, u8::from(*y)));
        }
    }
    out
}

/// Parse `days.csv`, requiring rows ordered by day then slot with no gaps.
pub fn parse_days_csv(text: &str, path: &Path) -> Result<DriverHistory> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut days: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
    for (i, row) in reader.deserialize::<SlotRow>().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row.day_index == days.len() + 1 {
            days.push((Vec::new(), Vec::new()));
        } else if row.day_index != days.len() || row.day_index == 0 {
            return Err(bad(format!("unexpected day_index {}", row.day_index)));
        }
        let (utilities, labels) = days.last_mut().expect("a day was pushed");
        if row.slot != utilities.len() + 1 {
            return Err(bad(format!("unexpected slot {}", row.slot)));
        }
        if row.label > 1 {
            return Err(bad(format!("label {} is not 0 or 1", row.label)));
        }
        utilities.push(row.utility);
        labels.push(row.label == 1);
    }
    if days.is_empty() {
        return Err(dataset_err(path, "no rows"));
    }
    let days = days
        .into_iter()
        .map(|(u, y)| DaySequence::new(u, y))
        .collect::<dds_core::Result<Vec<_>>>()
        .map_err(|e| dataset_err(path, e.to_string()))?;
    DriverHistory::new(days).map_err(|e| dataset_err(path, e.to_string()))
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(META_FILE), &dataset.meta)?;
    let days_path = dir.join(DAYS_FILE);
    let mut file = fs::File::create(&days_path).map_err(|e| Error::io(&days_path, e))?;
    file.write_all(days_csv(&dataset.history).as_bytes())
        .map_err(|e| Error::io(&days_path, e))?;
    if let Some(generator) = &dataset.generator {
        write_json(&dir.join(GENERATOR_FILE), generator)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = read_json(&meta_path)?;
    if meta.format != DATASET_FORMAT {
        return Err(dataset_err(
            &meta_path,
            format!("format {:?}, expected {DATASET_FORMAT:?}", meta.format),
        ));
    }
    let days_path = dir.join(DAYS_FILE);
    let text = fs::read_to_string(&days_path).map_err(|e| Error::io(&days_path, e))?;
    let history = parse_days_csv(&text, &days_path)?;
    if history.len() != meta.days || history.width() != meta.width {
        return Err(dataset_err(
            &days_path,
            format!(
                "{}x{} slots, meta.json declares {}x{}",
                history.len(),
                history.width(),
                meta.days,
                meta.width
            ),
        ));
    }
    let gen_path = dir.join(GENERATOR_FILE);
    let generator = if gen_path.exists() {
        Some(read_json(&gen_path)?)
    } else {
        None
    };
    Ok(Dataset {
        meta,
        history,
        generator,
    })
}

/// Dataset directories under `root`: `root` itself when it holds a dataset,
/// otherwise its immediate subdirectories that do, in name order.
pub fn discover(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(META_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(META_FILE).is_file() {
            found.push(path);
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(dataset_err(root, "no dataset (meta.json) found"));
    }
    Ok(found)
}
