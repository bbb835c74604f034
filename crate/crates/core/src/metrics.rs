//! Reconstruction-quality metrics.
//!
//! HEALPix-space MAE/RMSE average per tile first and then over all
//! 12 x |frames| tiles; RMSE is the average of per-tile roots, not the
//! root of the pooled mean square. The lat/lon metrics weight each cell by
//! normalized areas a_i (Σ a_i = 1 over the grid): wMAE and wRMSE average
//! per frame and then over frames (wRMSE rooting per frame), while the
//! traditional wRMSE takes the root after frame averaging.

use crate::error::{Error, Result};
use crate::sht::PowerSpectrum;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

fn check_frames(truth: &[&[f64]], recon: &[&[f64]]) -> Result<()> {
    if truth.len() != recon.len() || truth.is_empty() {
        return Err(Error::shape(format!(
            "{} truth frames vs {} reconstruction frames",
            truth.len(),
            recon.len()
        )));
    }
    for (t, r) in truth.iter().zip(recon.iter()) {
        if t.len() != r.len() || t.is_empty() {
            return Err(Error::shape("frame length mismatch"));
        }
    }
    Ok(())
}

/// Mean absolute error over HEALPix tile stacks: per-tile mean, averaged
/// over tiles and frames.
pub fn mae_healpix(truth: &[&[f64]], recon: &[&[f64]], n_tiles: usize) -> Result<f64> {
    per_tile_average(truth, recon, n_tiles, |diffs| {
        diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64
    })
}

/// RMSE over HEALPix tile stacks: per-tile root of the mean square,
/// averaged over tiles and frames (average of roots).
pub fn rmse_healpix(truth: &[&[f64]], recon: &[&[f64]], n_tiles: usize) -> Result<f64> {
    per_tile_average(truth, recon, n_tiles, |diffs| {
        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
    })
}

fn per_tile_average(
    truth: &[&[f64]],
    recon: &[&[f64]],
    n_tiles: usize,
    tile_stat: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    check_frames(truth, recon)?;
    if n_tiles == 0 {
        return Err(Error::domain("need at least one tile"));
    }
    let mut acc = 0.0;
    let mut tiles_seen = 0usize;
    for (t, r) in truth.iter().zip(recon.iter()) {
        if t.len() % n_tiles != 0 {
            return Err(Error::shape(format!(
                "frame of {} values does not split into {n_tiles} tiles",
                t.len()
            )));
        }
        let tile_len = t.len() / n_tiles;
        for k in 0..n_tiles {
            let diffs: Vec<f64> = t[k * tile_len..(k + 1) * tile_len]
                .iter()
                .zip(&r[k * tile_len..(k + 1) * tile_len])
                .map(|(a, b)| a - b)
                .collect();
            acc += tile_stat(&diffs);
            tiles_seen += 1;
        }
    }
    Ok(acc / tiles_seen as f64)
}

fn check_weights(frame_len: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != frame_len {
        return Err(Error::shape(format!(
            "{} weights for frames of {} cells",
            weights.len(),
            frame_len
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "weights must be normalized to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Area-weighted MAE: frame average of Σ_i a_i |x_i − x̂_i|.
pub fn wmae(truth: &[&[f64]], recon: &[&[f64]], weights: &[f64]) -> Result<f64> {
    check_frames(truth, recon)?;
    check_weights(truth[0].len(), weights)?;
    let mut acc = 0.0;
    for (t, r) in truth.iter().zip(recon.iter()) {
        acc += t
            .iter()
            .zip(r.iter())
            .zip(weights.iter())
            .map(|((a, b), w)| w * (a - b).abs())
            .sum::<f64>();
    }
    Ok(acc / truth.len() as f64)
}

/// Area-weighted RMSE with the root taken per frame:
/// frame average of sqrt(Σ_i a_i (x_i − x̂_i)²).
pub fn wrmse(truth: &[&[f64]], recon: &[&[f64]], weights: &[f64]) -> Result<f64> {
    check_frames(truth, recon)?;
    check_weights(truth[0].len(), weights)?;
    let mut acc = 0.0;
    for (t, r) in truth.iter().zip(recon.iter()) {
        acc += weighted_mse(t, r, weights).sqrt();
    }
    Ok(acc / truth.len() as f64)
}

/// Traditional area-weighted RMSE: sqrt of the frame-averaged weighted
/// mean square.
pub fn wrmse_trad(truth: &[&[f64]], recon: &[&[f64]], weights: &[f64]) -> Result<f64> {
    check_frames(truth, recon)?;
    check_weights(truth[0].len(), weights)?;
    let mut acc = 0.0;
    for (t, r) in truth.iter().zip(recon.iter()) {
        acc += weighted_mse(t, r, weights);
    }
    Ok((acc / truth.len() as f64).sqrt())
}

fn weighted_mse(t: &[f64], r: &[f64], weights: &[f64]) -> f64 {
    t.iter()
        .zip(r.iter())
        .zip(weights.iter())
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum()
}

/// Fraction of pixels (over all frames) whose absolute error exceeds the
/// threshold.
pub fn bad_pixel_fraction(truth: &[&[f64]], recon: &[&[f64]], threshold: f64) -> Result<f64> {
    check_frames(truth, recon)?;
    let mut over = 0usize;
    let mut total = 0usize;
    for (t, r) in truth.iter().zip(recon.iter()) {
        for (a, b) in t.iter().zip(r.iter()) {
            if (a - b).abs() > threshold {
                over += 1;
            }
            total += 1;
        }
    }
    Ok(over as f64 / total as f64)
}

/// Histogram of signed errors (recon − truth) with zero-centered bins of
/// fixed width. Returns bin centers and the fraction of pixels per bin;
/// fractions sum to 1.
pub fn signed_error_histogram(
    truth: &[&[f64]],
    recon: &[&[f64]],
    bin_width: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_frames(truth, recon)?;
    if bin_width <= 0.0 || bin_width.is_nan() {
        return Err(Error::domain("bin width must be positive"));
    }
    // Bin k covers ((k-1/2)·w, (k+1/2)·w]; k = round(err / w).
    let mut counts = std::collections::BTreeMap::new();
    let mut total = 0usize;
    for (t, r) in truth.iter().zip(recon.iter()) {
        for (a, b) in t.iter().zip(r.iter()) {
            let k = ((b - a) / bin_width).round() as i64;
            *counts.entry(k).or_insert(0u64) += 1;
            total += 1;
        }
    }
    let lo = *counts.keys().next().unwrap();
    let hi = *counts.keys().last().unwrap();
    let mut centers = Vec::new();
    let mut fractions = Vec::new();
    for k in lo..=hi {
        centers.push(k as f64 * bin_width);
        fractions.push(counts.get(&k).copied().unwrap_or(0) as f64 / total as f64);
    }
    Ok((centers, fractions))
}

/// Per-degree comparison of two spectra: ratio recon/truth and the log10
/// difference. Degrees where the truth power is 0 yield NaN entries.
#[derive(Debug, Clone)]
pub struct SpectrumComparison {
    pub ratio: Vec<f64>,
    pub log10_difference: Vec<f64>,
}

pub fn spectrum_comparison(
    truth: &PowerSpectrum,
    recon: &PowerSpectrum,
) -> Result<SpectrumComparison> {
    if truth.values.len() != recon.values.len() {
        return Err(Error::shape(format!(
            "spectra of different lengths: {} vs {}",
            truth.values.len(),
            recon.values.len()
        )));
    }
    let ratio: Vec<f64> = recon
        .values
        .iter()
        .zip(truth.values.iter())
        .map(|(r, t)| r / t)
        .collect();
    let log10_difference: Vec<f64> = recon
        .values
        .iter()
        .zip(truth.values.iter())
        .map(|(r, t)| r.log10() - t.log10())
        .collect();
    Ok(SpectrumComparison {
        ratio,
        log10_difference,
    })
}

impl SpectrumComparison {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "l,ratio,log10_difference")?;
        for (l, (r, d)) in self
            .ratio
            .iter()
            .zip(self.log10_difference.iter())
            .enumerate()
        {
            writeln!(w, "{l},{r},{d}")?;
        }
        Ok(())
    }
}

/// One metric record for the JSON/CSV report.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub variable: String,
    pub level: String,
    pub value: f64,
}

/// Emit records as a JSON array.
pub fn save_metrics_json(records: &[MetricRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), records)
        .map_err(|e| Error::Format(format!("metrics json: {e}")))?;
    Ok(())
}

/// Emit records as CSV `metric,variable,level,value`.
pub fn save_metrics_csv(records: &[MetricRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "metric,variable,level,value")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.metric, r.variable, r.level, r.value)?;
    }
    Ok(())
}
