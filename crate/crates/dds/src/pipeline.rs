//! Taxi-trip CSV ingestion.
//!
//! Trips are grouped per driver and per calendar day of their start time,
//! ordered by start time, padded to the driver's longest day with the mean
//! fare and labelled 1 for real trips, 0 for padding.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use dds_core::{DaySequence, DriverHistory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COL_TAXI_ID: &str = "Taxi ID";
pub const COL_START: &str = "Trip Start Timestamp";
pub const COL_END: &str = "Trip End Timestamp";
pub const COL_TOTAL: &str = "Trip Total";

const MAX_DROP_EXAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub taxi_id: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub total_fare: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub dropped_by_reason: BTreeMap<String, usize>,
    /// The first few dropped rows with their line numbers.
    pub dropped_examples: Vec<DroppedRow>,
}

impl ParseReport {
    fn drop_row(&mut self, line: u64, reason: &str) {
        self.rows_dropped += 1;
        *self
            .dropped_by_reason
            .entry(reason.to_string())
            .or_default() += 1;
        if self.dropped_examples.len() < MAX_DROP_EXAMPLES {
            self.dropped_examples.push(DroppedRow {
                line,
                reason: reason.to_string(),
            });
        }
    }
}

/// `MM/DD/YYYY HH:MM:SS AM/PM`, falling back to ISO-8601.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    const FORMATS: [&str; 4] = [
        "%m/%d/%Y %I:%M:%S %p",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            chrono::DateTime::parse_from_rfc3339(s)
                .ok()
                .map(|dt| dt.naive_local())
        })
}

/// Fare with currency symbol and thousands separators stripped.
pub fn parse_fare(raw: &str) -> Option<f64> {
    let cleaned: String = raw
        .trim()
        .chars()
        .filter(|c| !matches!(c, '$' | ',' | ' '))
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn find_column(headers: &csv::StringRecord, column: &'static str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(column))
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column,
        })
}

/// Parse trips from CSV, dropping rows with a missing or negative fare, an
/// unparseable timestamp, an end before the start, or no taxi id.
pub fn parse_trips<R: Read>(source: R, path: &Path) -> Result<(Vec<TripRecord>, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    let id_col = find_column(&headers, COL_TAXI_ID, path)?;
    let start_col = find_column(&headers, COL_START, path)?;
    let end_col = find_column(&headers, COL_END, path)?;
    let total_col = find_column(&headers, COL_TOTAL, path)?;

    let mut trips = Vec::new();
    let mut report = ParseReport::default();
    for (i, row) in reader.records().enumerate() {
        report.rows_read += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(i as u64 + 2, |p| p.line());
                report.drop_row(line, "malformed row");
                continue;
            }
        };
        let line = row.position().map_or(i as u64 + 2, |p| p.line());
        let field = |c: usize| row.get(c).unwrap_or("").trim();

        let taxi_id = field(id_col);
        if taxi_id.is_empty() {
            report.drop_row(line, "missing taxi id");
            continue;
        }
        let Some(total_fare) = parse_fare(field(total_col)) else {
            report.drop_row(line, "missing or unparseable fare");
            continue;
        };
        if total_fare < 0.0 {
            report.drop_row(line, "negative fare");
            continue;
        }
        let (Some(start), Some(end)) = (
            parse_timestamp(field(start_col)),
            parse_timestamp(field(end_col)),
        ) else {
            report.drop_row(line, "unparseable timestamp");
            continue;
        };
        if end < start {
            report.drop_row(line, "end before start");
            continue;
        }
        trips.push(TripRecord {
            taxi_id: taxi_id.to_string(),
            start,
            end,
            total_fare,
        });
    }
    if report.rows_read == 0 {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    report.rows_kept = trips.len();
    if trips.is_empty() {
        return Err(Error::NoValidRows {
            dropped: report.rows_dropped,
        });
    }
    Ok((trips, report))
}

/// One driver's fares, grouped by working day in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverDays {
    pub driver_id: String,
    pub dates: Vec<NaiveDate>,
    pub fares: Vec<Vec<f64>>,
}

/// Group trips per driver and per start date, then sample `driver_count`
/// drivers uniformly with `seed`. Days without trips are skipped.
pub fn aggregate(trips: &[TripRecord], driver_count: usize, seed: u64) -> Result<Vec<DriverDays>> {
    if trips.is_empty() {
        return Err(Error::NoValidRows { dropped: 0 });
    }
    if driver_count == 0 {
        return Err(Error::Config("driver count must be >= 1".into()));
    }
    let mut grouped: BTreeMap<&str, BTreeMap<NaiveDate, Vec<&TripRecord>>> = BTreeMap::new();
    for trip in trips {
        grouped
            .entry(trip.taxi_id.as_str())
            .or_default()
            .entry(trip.start.date())
            .or_default()
            .push(trip);
    }
    let available = grouped.len();
    if driver_count > available {
        return Err(Error::NotEnoughDrivers {
            requested: driver_count,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, available, driver_count).into_vec();
    chosen.sort_unstable();

    let drivers: Vec<(&str, BTreeMap<NaiveDate, Vec<&TripRecord>>)> = grouped.into_iter().collect();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let (id, days) = &drivers[i];
            let mut dates = Vec::with_capacity(days.len());
            let mut fares = Vec::with_capacity(days.len());
            for (date, day_trips) in days {
                let mut ordered = day_trips.clone();
                // stable: equal start times keep file order
                ordered.sort_by_key(|t| t.start);
                dates.push(*date);
                fares.push(ordered.iter().map(|t| t.total_fare).collect());
            }
            DriverDays {
                driver_id: (*id).to_string(),
                dates,
                fares,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadScope {
    /// Pad with the mean fare of the driver's own trips.
    #[default]
    PerDriver,
    /// Pad with the mean fare over every sampled driver.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverDataset {
    pub driver_id: String,
    pub dates: Vec<NaiveDate>,
    pub history: DriverHistory,
    pub pad_value: f64,
    /// Days `0..split_index` are the training split.
    pub split_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub drivers: Vec<DriverDataset>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Pad every day of a driver to that driver's longest day with the mean fare
/// and encode real trips as label 1, padding as 0.
pub fn pad_and_encode(sequences: &[DriverDays], scope: PadScope) -> Result<DatasetBundle> {
    if sequences.is_empty() {
        return Err(Error::NoValidRows { dropped: 0 });
    }
    let global = mean(
        sequences
            .iter()
            .flat_map(|d| d.fares.iter().flatten().copied()),
    );
    let mut drivers = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let width = seq.fares.iter().map(Vec::len).max().unwrap_or(0);
        if width == 0 {
            return Err(Error::Dataset {
                path: seq.driver_id.clone().into(),
                message: "driver has no trips".into(),
            });
        }
        let pad_value = match scope {
            PadScope::PerDriver => mean(seq.fares.iter().flatten().copied()),
            PadScope::Global => global,
        };
        let days = seq
            .fares
            .iter()
            .map(|fares| {
                let mut utilities = fares.clone();
                utilities.resize(width, pad_value);
                DaySequence::from_stop(utilities, fares.len())
            })
            .collect::<dds_core::Result<Vec<_>>>()?;
        drivers.push(DriverDataset {
            driver_id: seq.driver_id.clone(),
            dates: seq.dates.clone(),
            history: DriverHistory::new(days)?,
            pad_value,
            split_index: None,
        });
    }
    Ok(DatasetBundle { drivers })
}

/// Number of leading training days: `ceil(train_fraction * days)`, kept inside
/// `1..days` so both splits are non-empty.
pub fn split_index(days: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if days < 2 {
        return Err(Error::Config(format!(
            "a split needs at least 2 days, got {days}"
        )));
    }
    // Guard against products like 0.7 * 10 = 7.000000000000001.
    let raw = (train_fraction * days as f64 - 1e-9).ceil() as usize;
    Ok(raw.clamp(1, days - 1))
}

/// Chronological train/test split of one history.
pub fn split(
    history: &DriverHistory,
    train_fraction: f64,
) -> Result<(DriverHistory, DriverHistory)> {
    let k = split_index(history.len(), train_fraction)?;
    Ok((history.slice(0..k)?, history.slice(k..history.len())?))
}
