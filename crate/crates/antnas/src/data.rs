//! Time-series ingestion, normalization, splitting, and the synthetic
//! benchmark series.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multivariate series: all columns in one matrix, with the target
/// column(s) marked; the remaining columns are the network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    /// Row-major, `len() x columns.len()`.
    pub values: Vec<Vec<f64>>,
    pub target_columns: Vec<usize>,
}

/// Per-column min/max recorded at normalization time, needed to map
/// predictions back to the raw scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn normalize(&self, v: f64) -> f64 {
        if self.max == self.min {
            0.5
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Non-target column indices, in column order.
    pub fn input_columns(&self) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|i| !self.target_columns.contains(i))
            .collect()
    }

    /// Extract the input matrix (`len x n_inputs`).
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        let cols = self.input_columns();
        self.values
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect()
    }

    /// Extract the target matrix (`len x n_targets`).
    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|row| self.target_columns.iter().map(|&c| row[c]).collect())
            .collect()
    }

    fn check_ingested(&self) -> Result<()> {
        if self.n_cols() < 1 {
            return Err(Error::Data("series needs at least one column".into()));
        }
        if self.len() < 8 {
            return Err(Error::Data(format!(
                "series needs at least 8 rows, got {}",
                self.len()
            )));
        }
        for (t, row) in self.values.iter().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in row {} column {}",
                    t + 1,
                    self.columns[c]
                )));
            }
        }
        Ok(())
    }
}

/// Parse a headed numeric CSV. Any non-numeric or missing cell fails the
/// load with its row number and column name.
pub fn load_csv(path: &Path, target_columns: &[String]) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in {}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut targets = Vec::new();
    for name in target_columns {
        match columns.iter().position(|c| c == name) {
            Some(i) => targets.push(i),
            None => {
                return Err(Error::Data(format!(
                    "target column '{name}' not found; available: {}",
                    columns.join(", ")
                )))
            }
        }
    }

    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        if record.len() != columns.len() {
            return Err(Error::Data(format!(
                "row {}: {} cells, expected {}",
                i + 1,
                record.len(),
                columns.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {} column {}: '{}' is not numeric",
                    i + 1,
                    columns[c],
                    cell
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {} column {}: non-finite value",
                    i + 1,
                    columns[c]
                )));
            }
            row.push(v);
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }

    let series = TimeSeries {
        columns,
        values,
        target_columns: targets,
    };
    series.check_ingested()?;
    Ok(series)
}

/// Write a series back out as a headed CSV.
pub fn write_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
    writer
        .write_record(&series.columns)
        .map_err(|e| Error::Data(e.to_string()))?;
    for row in &series.values {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Fit min/max on this series and map every column into [0,1]; constant
/// columns map to 0.5. Returns the stats for later denormalization.
pub fn minmax_normalize(series: &TimeSeries) -> (TimeSeries, Vec<ColumnStats>) {
    let n = series.n_cols();
    let mut stats = Vec::with_capacity(n);
    for c in 0..n {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in &series.values {
            min = min.min(row[c]);
            max = max.max(row[c]);
        }
        stats.push(ColumnStats { min, max });
    }
    (apply_normalization(series, &stats), stats)
}

/// Map a series through previously fitted stats (values outside the fitted
/// range land outside [0,1]; that is fine for evaluation data).
pub fn apply_normalization(series: &TimeSeries, stats: &[ColumnStats]) -> TimeSeries {
    debug_assert_eq!(stats.len(), series.n_cols());
    TimeSeries {
        columns: series.columns.clone(),
        values: series
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .zip(stats.iter())
                    .map(|(&v, s)| s.normalize(v))
                    .collect()
            })
            .collect(),
        target_columns: series.target_columns.clone(),
    }
}

/// Contiguous chronological split; train precedes test, no shuffling.
pub fn split(series: &TimeSeries, train_len: usize, test_len: usize) -> Result<(TimeSeries, TimeSeries)> {
    if train_len < 4 || test_len < 4 {
        return Err(Error::InputDomain(format!(
            "split lengths must both be >= 4, got ({train_len}, {test_len})"
        )));
    }
    if train_len + test_len > series.len() {
        return Err(Error::InputDomain(format!(
            "split ({train_len}, {test_len}) exceeds the {} available rows",
            series.len()
        )));
    }
    let make = |range: std::ops::Range<usize>| TimeSeries {
        columns: series.columns.clone(),
        values: series.values[range].to_vec(),
        target_columns: series.target_columns.clone(),
    };
    Ok((make(0..train_len), make(train_len..train_len + test_len)))
}

/// Noise level of the synthetic benchmark target.
pub const SYNTH_NOISE_SIGMA: f64 = 0.05;

/// Synthetic stand-in for plant telemetry: `n_inputs` AR(1) driver columns
/// plus a `target` column with a fixed nonlinear lagged dependence,
///
/// ```text
/// target[t] = 0.5 * tanh(x1[t-1]) + 0.3 * x2[t-2] * x1[t-1] + noise
/// ```
///
/// with zero values standing in for negative-time lags.
pub fn synth_generate(seed: u64, t: usize, n_inputs: usize) -> Result<TimeSeries> {
    synth_generate_with_noise(seed, t, n_inputs, SYNTH_NOISE_SIGMA)
}

/// AR(1) coefficient of the synthetic input drivers; low persistence keeps
/// the naive previous-value forecaster honest rather than dominant.
const SYNTH_AR_COEFF: f64 = 0.35;
const SYNTH_DRIVER_SIGMA: f64 = 0.4;

pub fn synth_generate_with_noise(
    seed: u64,
    t: usize,
    n_inputs: usize,
    noise_sigma: f64,
) -> Result<TimeSeries> {
    if t < 100 {
        return Err(Error::InputDomain(format!(
            "synthetic series needs at least 100 steps, got {t}"
        )));
    }
    if n_inputs < 2 {
        return Err(Error::InputDomain(format!(
            "synthetic series needs at least 2 inputs, got {n_inputs}"
        )));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let driver = Normal::new(0.0, SYNTH_DRIVER_SIGMA).expect("positive sigma");

    let mut inputs = vec![vec![0.0f64; t]; n_inputs];
    for column in inputs.iter_mut() {
        let mut prev = 0.0;
        for v in column.iter_mut() {
            prev = SYNTH_AR_COEFF * prev + driver.sample(&mut rng);
            *v = prev;
        }
    }
    let mut values = Vec::with_capacity(t);
    for step in 0..t {
        let x1_lag1 = if step >= 1 { inputs[0][step - 1] } else { 0.0 };
        let x2_lag2 = if step >= 2 { inputs[1][step - 2] } else { 0.0 };
        let noise = if noise_sigma > 0.0 {
            Normal::new(0.0, noise_sigma).expect("positive sigma").sample(&mut rng)
        } else {
            // Keep the rng stream layout identical either way.
            let _ = rng.gen::<f64>();
            0.0
        };
        let target = 0.5 * x1_lag1.tanh() + 0.3 * x2_lag2 * x1_lag1 + noise;
        let mut row: Vec<f64> = (0..n_inputs).map(|i| inputs[i][step]).collect();
        row.push(target);
        values.push(row);
    }

    let mut columns: Vec<String> = (1..=n_inputs).map(|i| format!("x{i}")).collect();
    columns.push("target".to_string());
    let series = TimeSeries {
        columns,
        values,
        target_columns: vec![n_inputs],
    };
    series.check_ingested()?;
    Ok(series)
}
