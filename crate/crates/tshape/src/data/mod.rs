//! Series ingestion, normalization, windowing, and synthetic generation.
//!
//! All statistics that touch the model are computed on the training
//! region only; the test region never leaks into preprocessing.

mod synth;

pub use synth::{synth_generate, AnomalyKind, SynthConfig};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: timestamps must be strictly increasing")]
    UnsortedTimestamps { path: String, line: usize },
    #[error("training region is constant; cannot z-score")]
    DegenerateSeries,
    #[error("series is empty")]
    EmptySeries,
    #[error("split index {split} exceeds series length {len}")]
    SplitOutOfRange { split: usize, len: usize },
    #[error("synthetic generation failed: {0}")]
    Generation(String),
}

/// Timestamped univariate series with binary anomaly labels and the
/// position where the test region begins.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub labels: Vec<u8>,
    pub split_index: usize,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, labels: Vec<u8>, split_index: usize) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::EmptySeries);
        }
        assert_eq!(values.len(), labels.len(), "values and labels must align");
        if split_index > values.len() {
            return Err(DataError::SplitOutOfRange {
                split: split_index,
                len: values.len(),
            });
        }
        Ok(TimeSeries {
            values,
            labels,
            split_index,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn train_values(&self) -> &[f64] {
        &self.values[..self.split_index]
    }

    pub fn test_values(&self) -> &[f64] {
        &self.values[self.split_index..]
    }

    pub fn test_labels(&self) -> &[u8] {
        &self.labels[self.split_index..]
    }
}

/// Load a `timestamp,value,label` CSV.
///
/// Leading `#` lines may carry metadata; `# split_index=N` sets the
/// train/test boundary. Without the marker the series splits in half.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path_str.clone(),
        source,
    })?;
    let parse_err = |line: usize, message: String| DataError::Parse {
        path: path_str.clone(),
        line,
        message,
    };

    let mut split_index: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut last_ts: Option<i64> = None;
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if header_seen {
                return Err(parse_err(line_no, "comment after header".into()));
            }
            if let Some(value) = comment.trim().strip_prefix("split_index=") {
                let parsed = value
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("bad split_index: {e}")))?;
                split_index = Some(parsed);
            }
            continue;
        }
        if !header_seen {
            if line != "timestamp,value,label" {
                return Err(parse_err(
                    line_no,
                    format!("expected header `timestamp,value,label`, found `{line}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let (ts, value, label) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(t), Some(v), Some(l), None) => (t, v, l),
            _ => return Err(parse_err(line_no, "expected 3 comma-separated fields".into())),
        };
        let ts: i64 = ts
            .trim()
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad timestamp: {e}")))?;
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(DataError::UnsortedTimestamps {
                    path: path_str.clone(),
                    line: line_no,
                });
            }
        }
        last_ts = Some(ts);
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad value: {e}")))?;
        if !value.is_finite() {
            return Err(parse_err(line_no, "value must be finite".into()));
        }
        let label: u8 = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line_no, format!("label must be 0 or 1, got `{other}`"))),
        };
        values.push(value);
        labels.push(label);
    }
    if !header_seen {
        return Err(parse_err(1, "missing header `timestamp,value,label`".into()));
    }
    if values.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let split = split_index.unwrap_or(values.len() / 2);
    TimeSeries::new(values, labels, split)
}

/// Write a series in the format [`load_csv`] reads back.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# split_index={}", series.split_index);
    out.push_str("timestamp,value,label\n");
    for (t, (v, l)) in series.values.iter().zip(&series.labels).enumerate() {
        let _ = writeln!(out, "{t},{v},{l}");
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Normalization constants fitted on the training region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn apply(&self, value: f64) -> f64 {
        (value - self.mean) / self.std
    }
}

/// Z-score the whole series with mean and standard deviation computed on
/// the training region only.
pub fn zscore_normalize(series: &TimeSeries) -> Result<(TimeSeries, NormStats), DataError> {
    let train = series.train_values();
    if train.is_empty() {
        return Err(DataError::DegenerateSeries);
    }
    let n = train.len() as f64;
    let mean = train.iter().sum::<f64>() / n;
    let var = train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(DataError::DegenerateSeries);
    }
    let stats = NormStats { mean, std };
    let values = series.values.iter().map(|&v| stats.apply(v)).collect();
    Ok((
        TimeSeries {
            values,
            labels: series.labels.clone(),
            split_index: series.split_index,
        },
        stats,
    ))
}

/// A window tagged with the index of its last element in the source slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub end: usize,
    pub values: Vec<f64>,
}

/// Strided windows over `values`, each fully inside the slice.
///
/// A slice shorter than the window length yields a single window
/// left-padded with the first value.
pub fn make_windows(values: &[f64], window_len: usize, stride: usize) -> Vec<Window> {
    assert!(stride >= 1, "stride must be at least 1");
    assert!(window_len >= 1, "window length must be at least 1");
    if values.len() < window_len {
        return vec![Window {
            end: values.len().saturating_sub(1),
            values: pad_left(values, window_len),
        }];
    }
    (0..=values.len() - window_len)
        .step_by(stride)
        .map(|start| Window {
            end: start + window_len - 1,
            values: values[start..start + window_len].to_vec(),
        })
        .collect()
}

/// The window of `window_len` values ending at `t` inclusive, left-padded
/// with the first value when `t + 1 < window_len`.
pub fn window_ending_at(values: &[f64], t: usize, window_len: usize) -> Vec<f64> {
    assert!(t < values.len(), "window end {t} outside series");
    let end = t + 1;
    if end >= window_len {
        values[end - window_len..end].to_vec()
    } else {
        pad_left(&values[..end], window_len)
    }
}

fn pad_left(values: &[f64], window_len: usize) -> Vec<f64> {
    let first = *values.first().expect("cannot pad an empty slice");
    let mut out = vec![first; window_len - values.len()];
    out.extend_from_slice(values);
    out
}
