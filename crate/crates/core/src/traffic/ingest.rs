use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to read a delimiter-separated load trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub time_column: String,
    pub value_column: String,
    pub delimiter: char,
    /// Usable rows skipped before the series starts.
    pub offset: usize,
    /// Cap on the number of usable rows kept.
    pub max_rows: Option<usize>,
    /// Fewer usable rows than this is a hard error.
    pub min_rows: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            time_column: "Date".into(),
            value_column: "Close".into(),
            delimiter: ',',
            offset: 0,
            max_rows: None,
            min_rows: 2,
        }
    }
}

/// Min-max normalized load series, one value per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    pub values: Vec<f64>,
    pub timestamps: Vec<String>,
    /// Rows dropped for a missing or non-numeric value.
    pub rejected_rows: usize,
    /// 1-based data-row numbers of the first rejected rows.
    pub rejected_examples: Vec<usize>,
    /// Raw value range before normalization.
    pub raw_min: f64,
    pub raw_max: f64,
    /// The raw values were constant; every load was set to 0.5.
    pub degenerate_scale: bool,
}

pub fn ingest_series(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<LoadSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))?;
    ingest_reader(file, opts)
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<LoadSeries> {
    let delimiter = u8::try_from(opts.delimiter)
        .map_err(|_| Error::Dataset(format!("delimiter {:?} is not a single byte", opts.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).comment(Some(b'#')).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Dataset(format!("header row: {e}")))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Dataset(format!("column {name:?} not found in header {:?}", headers)))
    };
    let time_idx = column(&opts.time_column)?;
    let value_idx = column(&opts.value_column)?;

    let mut raw = Vec::new();
    let mut timestamps = Vec::new();
    let mut rejected_rows = 0;
    let mut rejected_examples = Vec::new();
    let mut usable = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Dataset(format!("row {row}: {e}")))?;
        let value = record.get(value_idx).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
        let Some(value) = value else {
            rejected_rows += 1;
            if rejected_examples.len() < 10 {
                rejected_examples.push(row);
            }
            continue;
        };
        usable += 1;
        if usable <= opts.offset {
            continue;
        }
        if opts.max_rows.is_some_and(|m| raw.len() >= m) {
            break;
        }
        raw.push(value);
        timestamps.push(record.get(time_idx).unwrap_or_default().trim().to_string());
    }
    if rejected_rows > 0 {
        log::warn!("rejected {rejected_rows} rows with missing or non-numeric {:?}", opts.value_column);
    }
    if raw.len() < opts.min_rows {
        return Err(Error::Dataset(format!(
            "{} usable rows after offset {}, need at least {}",
            raw.len(),
            opts.offset,
            opts.min_rows
        )));
    }
    let (values, raw_min, raw_max, degenerate_scale) = normalize(&raw);
    Ok(LoadSeries { values, timestamps, rejected_rows, rejected_examples, raw_min, raw_max, degenerate_scale })
}

/// Min-max scaling to [0, 1]; a constant series maps to 0.5.
pub(crate) fn normalize(raw: &[f64]) -> (Vec<f64>, f64, f64, bool) {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return (vec![0.5; raw.len()], lo, hi, true);
    }
    let values = raw.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect();
    (values, lo, hi, false)
}

/// Splits a series into the warm-up window and the evaluation stream.
pub fn split_warmup(values: &[f64], window: usize) -> Result<(&[f64], &[f64])> {
    if values.len() < window {
        return Err(Error::Dataset(format!("series of {} rows is shorter than the window {window}", values.len())));
    }
    Ok(values.split_at(window))
}
