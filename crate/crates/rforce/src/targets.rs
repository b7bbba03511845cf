//! Target series the networks learn to generate.
//!
//! One-dimensional generators (multi-periodic, discontinuous, noisy) plus
//! ingestion of multi-channel motion CSV files and a synthetic multi-channel
//! stand-in. All series are row-per-step, column-per-channel. Trainers index
//! rows modulo the stored length, so a single generated period (or episode
//! block) extends periodically in time.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Default harmonic count of the multi-periodic target.
pub const DEFAULT_SINES: usize = 4;
/// Default base period in time units.
pub const DEFAULT_BASE_PERIOD: f64 = 60.0;
/// Step size mapping one motion frame to one integration step.
pub const MOTION_DT: f64 = 0.1;

/// Per-channel affine normalization: `raw = offset + scale * normalized`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScale {
    pub offset: f64,
    pub scale: f64,
    /// Constant source channel; normalization maps it to zero.
    pub degenerate: bool,
}

/// A K-channel time series sampled at fixed `dt`.
#[derive(Clone, Debug)]
pub struct TargetSeries {
    /// Values the trainer fits against (noisy when noise was requested).
    pub values: DMatrix<f64>,
    /// Clean reference for test-time error when `values` carries noise.
    pub clean: Option<DMatrix<f64>>,
    pub dt: f64,
    pub name: String,
    pub normalization: Option<Vec<ChannelScale>>,
}

impl TargetSeries {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    /// Training value at `step` (rows wrap around).
    pub fn training_value(&self, step: usize, channel: usize) -> f64 {
        self.values[(step % self.len(), channel)]
    }

    /// Clean reference value at `step` (falls back to the training values).
    pub fn reference_value(&self, step: usize, channel: usize) -> f64 {
        match &self.clean {
            Some(c) => c[(step % c.nrows(), channel)],
            None => self.training_value(step, channel),
        }
    }

    fn validate(self) -> Result<Self> {
        if self.len() < 2 {
            return Err(Error::argument("target series needs at least 2 steps"));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::argument("target series contains non-finite values"));
        }
        Ok(self)
    }
}

fn tile_rows(period: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let p = period.nrows();
    DMatrix::from_fn(steps, period.ncols(), |i, j| period[(i % p, j)])
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::argument("duration and dt must be positive"));
    }
    Ok((duration / dt).round().max(2.0) as usize)
}

/// One period of the raw harmonic superposition, un-normalized.
fn harmonic_period(amplitudes: &[f64], base_period: f64, dt: f64) -> Vec<f64> {
    let steps = (base_period / dt).round() as usize;
    (0..steps)
        .map(|i| {
            let t = i as f64 * dt;
            amplitudes
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * (k + 1) as f64 * t / base_period).sin())
                .sum()
        })
        .collect()
}

/// Superposition of `n_sines` harmonics of `base_period`, scaled so the peak
/// magnitude is 1. `amplitudes` defaults to `1/k`.
pub fn multi_periodic(
    n_sines: usize,
    base_period: f64,
    amplitudes: Option<&[f64]>,
    duration: f64,
    dt: f64,
) -> Result<TargetSeries> {
    if n_sines < 1 {
        return Err(Error::argument("need at least one sine"));
    }
    if !(base_period > 0.0) {
        return Err(Error::argument("base period must be positive"));
    }
    let default_amp: Vec<f64> = (1..=n_sines).map(|k| 1.0 / k as f64).collect();
    let amps = match amplitudes {
        Some(a) => {
            if a.len() != n_sines {
                return Err(Error::argument("amplitude count must equal n_sines"));
            }
            a.to_vec()
        }
        None => default_amp,
    };
    let steps = steps_for(duration, dt)?;
    let raw = harmonic_period(&amps, base_period, dt);
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::argument("target is identically zero"));
    }
    let period = DMatrix::from_iterator(raw.len(), 1, raw.iter().map(|v| v / peak));
    TargetSeries {
        values: tile_rows(&period, steps),
        clean: None,
        dt,
        name: format!("multiperiodic-{n_sines}"),
        normalization: None,
    }
    .validate()
}

/// Convenience: the default four-sine target.
pub fn multi_periodic_default(duration: f64, dt: f64) -> Result<TargetSeries> {
    multi_periodic(DEFAULT_SINES, DEFAULT_BASE_PERIOD, None, duration, dt)
}

/// Piecewise-constant target: the sign pattern of the harmonic generator at
/// +-0.8, with a single midpoint sample at each sign change.
pub fn discontinuous(
    base_period: f64,
    duty_pattern: Option<&[f64]>,
    duration: f64,
    dt: f64,
) -> Result<TargetSeries> {
    if !(base_period > 0.0) {
        return Err(Error::argument("base period must be positive"));
    }
    let default_amp: Vec<f64> = (1..=DEFAULT_SINES).map(|k| 1.0 / k as f64).collect();
    let amps = duty_pattern.map(|d| d.to_vec()).unwrap_or(default_amp);
    let steps = steps_for(duration, dt)?;
    let raw = harmonic_period(&amps, base_period, dt);
    let p = raw.len();
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    let mut vals = Vec::with_capacity(p);
    for i in 0..p {
        // Previous sample wraps so the tiled series has no seam artifacts.
        let prev = raw[(i + p - 1) % p];
        if sign(raw[i]) != sign(prev) {
            vals.push(0.0);
        } else {
            vals.push(0.8 * sign(raw[i]));
        }
    }
    let period = DMatrix::from_iterator(p, 1, vals);
    TargetSeries {
        values: tile_rows(&period, steps),
        clean: None,
        dt,
        name: "discontinuous".into(),
        normalization: None,
    }
    .validate()
}

/// Additive Gaussian noise on the training values; the clean series is kept
/// for test-time error reference.
pub fn noisy(base: &TargetSeries, sigma: f64, seed: u64) -> Result<TargetSeries> {
    if sigma < 0.0 {
        return Err(Error::argument("noise std must be non-negative"));
    }
    let clean = base.clean.clone().unwrap_or_else(|| base.values.clone());
    if sigma == 0.0 {
        return Ok(TargetSeries {
            values: base.values.clone(),
            clean: Some(clean),
            dt: base.dt,
            name: format!("{}-noisy0", base.name),
            normalization: base.normalization.clone(),
        });
    }
    let mut rng = stream(seed, Purpose::TargetNoise);
    let dist = Normal::new(0.0, sigma).expect("validated sigma");
    let mut values = base.values.clone();
    for v in values.iter_mut() {
        *v += dist.sample(&mut rng);
    }
    TargetSeries {
        values,
        clean: Some(clean),
        dt: base.dt,
        name: format!("{}-noisy", base.name),
        normalization: base.normalization.clone(),
    }
    .validate()
}

/// Synthetic multi-channel target: `channels` copies of the default harmonic
/// waveform, phase-shifted per channel. Stands in for motion captures when
/// no CSV is available.
pub fn phase_shifted_bank(
    channels: usize,
    base_period: f64,
    episodes: usize,
    dt: f64,
) -> Result<TargetSeries> {
    if channels < 1 || episodes < 1 {
        return Err(Error::argument("channels and episodes must be >= 1"));
    }
    let amps: Vec<f64> = (1..=DEFAULT_SINES).map(|k| 1.0 / k as f64).collect();
    let p = (base_period / dt).round() as usize;
    let raw = harmonic_period(&amps, base_period, dt);
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let period = DMatrix::from_fn(p, channels, |i, j| {
        // Shift by a channel-dependent fraction of the period.
        let shift = j * p / channels;
        raw[(i + shift) % p] / peak
    });
    let values = tile_rows(&period, p * episodes);
    TargetSeries {
        values,
        clean: None,
        dt,
        name: format!("synthetic-motion-{channels}"),
        normalization: None,
    }
    .validate()
}

/// Load a 66-column motion CSV (one row per frame, 30 Hz source), normalize
/// each channel to [-1, 1], and concatenate `episodes` copies. One frame maps
/// to one integration step of `dt = 0.1`.
pub fn load_motion_csv(path: impl AsRef<Path>, episodes: usize) -> Result<TargetSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    let raw = read_motion_rows(file)?;
    motion_from_rows(raw, episodes, path_stem(path.as_ref()))
}

/// CSV parsing against the 66-column contract, header auto-detected.
fn read_motion_rows(reader: impl std::io::Read) -> Result<Vec<Vec<f64>>> {
    const MOTION_CHANNELS: usize = 66;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::format(format!("row {idx}: {e}")))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(nums) => {
                if nums.len() != MOTION_CHANNELS {
                    return Err(Error::format(format!(
                        "row {idx}: expected {MOTION_CHANNELS} columns, found {}",
                        nums.len()
                    )));
                }
                if nums.iter().any(|v| !v.is_finite()) {
                    return Err(Error::format(format!("row {idx}: non-finite value")));
                }
                rows.push(nums);
            }
            Err(e) => {
                if idx == 0 {
                    continue; // header row
                }
                return Err(Error::format(format!("row {idx}: non-numeric cell: {e}")));
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::format("motion file needs at least 2 data rows"));
    }
    Ok(rows)
}

fn motion_from_rows(rows: Vec<Vec<f64>>, episodes: usize, name: String) -> Result<TargetSeries> {
    if episodes < 1 {
        return Err(Error::argument("episodes must be >= 1"));
    }
    let t = rows.len();
    let k = rows[0].len();
    let mut episode = DMatrix::zeros(t, k);
    let mut scales = Vec::with_capacity(k);
    for j in 0..k {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in &rows {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        let offset = 0.5 * (hi + lo);
        let scale = 0.5 * (hi - lo);
        let degenerate = scale == 0.0;
        scales.push(ChannelScale {
            offset,
            scale,
            degenerate,
        });
        for (i, row) in rows.iter().enumerate() {
            episode[(i, j)] = if degenerate {
                0.0
            } else {
                (row[j] - offset) / scale
            };
        }
    }
    TargetSeries {
        values: tile_rows(&episode, t * episodes),
        clean: None,
        dt: MOTION_DT,
        name,
        normalization: Some(scales),
    }
    .validate()
}

/// Invert the per-channel normalization.
pub fn denormalize(series: &TargetSeries) -> Result<TargetSeries> {
    let scales = series
        .normalization
        .as_ref()
        .ok_or_else(|| Error::State("series carries no normalization metadata".into()))?;
    if scales.len() != series.channels() {
        return Err(Error::State("normalization metadata has wrong arity".into()));
    }
    let values = DMatrix::from_fn(series.len(), series.channels(), |i, j| {
        let s = scales[j];
        if s.degenerate {
            s.offset
        } else {
            s.offset + s.scale * series.values[(i, j)]
        }
    });
    Ok(TargetSeries {
        values,
        clean: None,
        dt: series.dt,
        name: format!("{}-denorm", series.name),
        normalization: None,
    })
}

/// Apply a series' normalization to arbitrary raw values (used to map
/// generated output back into raw units for reporting).
pub fn denormalize_values(values: &DMatrix<f64>, scales: &[ChannelScale]) -> DMatrix<f64> {
    DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
        let s = scales[j];
        if s.degenerate {
            s.offset
        } else {
            s.offset + s.scale * values[(i, j)]
        }
    })
}

/// Write a series in the motion CSV shape (no header, one row per step).
pub fn write_motion_csv(series: &TargetSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut wtr =
        csv::Writer::from_path(path.as_ref()).map_err(|e| Error::format(e.to_string()))?;
    for i in 0..series.len() {
        let row: Vec<String> = (0..series.channels())
            .map(|j| format!("{}", series.values[(i, j)]))
            .collect();
        wtr.write_record(&row)
            .map_err(|e| Error::format(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

fn path_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "motion".into())
}
