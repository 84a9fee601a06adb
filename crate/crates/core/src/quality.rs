//! Waveform quality metrics and sensor weighting.
//!
//! A phone uploads a 5-minute three-component record around each trigger
//! (1 minute before, 4 after). The pre-trigger minute is background
//! noise; its standard deviation, the record's data gaps and the spread
//! of its sampling intervals summarize how trustworthy the sensor is.
//! The weight maps those metrics into [0, 1] as a product of three
//! factors so a single pathological metric zeroes the sensor out.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One accelerometer sample, epoch seconds and m/s^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A triggered phone's uploaded record.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRecord {
    pub phone_id: u64,
    pub trigger_time: f64,
    pub samples: Vec<Sample>,
}

impl WaveformRecord {
    /// Validated constructor: timestamps strictly increasing, all values
    /// finite.
    pub fn new(phone_id: u64, trigger_time: f64, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
                return Err(Error::Input(format!("sample {i}: non-finite value")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::Input(format!(
                    "sample {i}: timestamp {} not after {}",
                    s.t,
                    samples[i - 1].t
                )));
            }
        }
        Ok(WaveformRecord {
            phone_id,
            trigger_time,
            samples,
        })
    }

    fn intervals_ms(&self) -> Vec<f64> {
        self.samples
            .windows(2)
            .map(|w| (w[1].t - w[0].t) * 1000.0)
            .collect()
    }
}

/// Summary metrics plus the derived detector weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub noise_std: f64,
    pub gaps_gt_1s: usize,
    pub gaps_gt_2s: usize,
    pub interval_p25_ms: f64,
    pub interval_p50_ms: f64,
    pub interval_p75_ms: f64,
    pub weight: f64,
}

/// Background noise level: population standard deviation over the three
/// per-component mean-removed pre-trigger series, concatenated.
pub fn noise_std(record: &WaveformRecord) -> Result<f64> {
    let pre: Vec<&Sample> = record
        .samples
        .iter()
        .filter(|s| s.t < record.trigger_time)
        .collect();
    if pre.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "noise estimation needs at least 2 pre-trigger samples, got {}",
            pre.len()
        )));
    }
    let n = pre.len() as f64;
    let means = [
        pre.iter().map(|s| s.x).sum::<f64>() / n,
        pre.iter().map(|s| s.y).sum::<f64>() / n,
        pre.iter().map(|s| s.z).sum::<f64>() / n,
    ];
    let mut sum_sq = 0.0;
    for s in &pre {
        sum_sq += (s.x - means[0]).powi(2) + (s.y - means[1]).powi(2) + (s.z - means[2]).powi(2);
    }
    Ok((sum_sq / (3.0 * n)).sqrt())
}

/// Count inter-sample gaps strictly greater than each threshold (seconds).
pub fn count_gaps(record: &WaveformRecord, thresholds_s: &[f64]) -> Result<Vec<usize>> {
    if record.samples.len() < 2 {
        return Err(Error::InsufficientData(
            "gap counting needs at least 2 samples".into(),
        ));
    }
    Ok(thresholds_s
        .iter()
        .map(|&threshold| {
            record
                .samples
                .windows(2)
                .filter(|w| w[1].t - w[0].t > threshold)
                .count()
        })
        .collect())
}

/// Percentile with linear interpolation between closest ranks (inclusive
/// endpoints): rank h = (n-1) * p/100 on the sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 25th/50th/75th percentiles of the sampling intervals, milliseconds.
pub fn sampling_percentiles(record: &WaveformRecord) -> Result<(f64, f64, f64)> {
    if record.samples.len() < 2 {
        return Err(Error::InsufficientData(
            "percentiles need at least 2 samples".into(),
        ));
    }
    let mut intervals = record.intervals_ms();
    intervals.sort_by(f64::total_cmp);
    Ok((
        percentile(&intervals, 25.0),
        percentile(&intervals, 50.0),
        percentile(&intervals, 75.0),
    ))
}

/// Coefficients of the quality-weight function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPolicy {
    /// Noise level that still earns full confidence, m/s^2.
    pub sigma_ref: f64,
    /// Gap count that halves... the gap factor is 1/(1 + gaps/gap_scale).
    pub gap_scale: f64,
}

impl Default for WeightPolicy {
    fn default() -> Self {
        WeightPolicy {
            sigma_ref: 0.01,
            gap_scale: 5.0,
        }
    }
}

/// Map metrics to a confidence weight in [0, 1]: the product of a noise
/// factor `clip(sigma_ref/noise_std, 0, 1)`, a gap factor
/// `1/(1 + gaps/gap_scale)`, and a sampling-stability factor
/// `clip(1 - (p75-p25)/p50, 0, 1)`.
pub fn quality_weight(report: &QualityReport, policy: &WeightPolicy) -> Result<f64> {
    if report.interval_p50_ms == 0.0 {
        return Err(Error::Input(
            "malformed record: median sampling interval is zero".into(),
        ));
    }
    let noise_factor = if report.noise_std == 0.0 {
        1.0
    } else {
        (policy.sigma_ref / report.noise_std).clamp(0.0, 1.0)
    };
    let gap_factor = 1.0 / (1.0 + report.gaps_gt_1s as f64 / policy.gap_scale);
    let stability = (1.0 - (report.interval_p75_ms - report.interval_p25_ms) / report.interval_p50_ms)
        .clamp(0.0, 1.0);
    Ok(noise_factor * gap_factor * stability)
}

/// Compute the full report for a record.
pub fn analyze(record: &WaveformRecord, policy: &WeightPolicy) -> Result<QualityReport> {
    let noise = noise_std(record)?;
    let gaps = count_gaps(record, &[1.0, 2.0])?;
    let (p25, p50, p75) = sampling_percentiles(record)?;
    let mut report = QualityReport {
        noise_std: noise,
        gaps_gt_1s: gaps[0],
        gaps_gt_2s: gaps[1],
        interval_p25_ms: p25,
        interval_p50_ms: p50,
        interval_p75_ms: p75,
        weight: 0.0,
    };
    report.weight = quality_weight(&report, policy)?;
    Ok(report)
}

/// Parse a waveform CSV with header `t,x,y,z`; `t` epoch seconds, the
/// components m/s^2. The trigger time marks the end of the background
/// window.
pub fn read_waveform_csv<R: BufRead>(
    reader: R,
    phone_id: u64,
    trigger_time: f64,
) -> Result<WaveformRecord> {
    let mut samples = Vec::new();
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("line 1: empty waveform file".into()))?
        .map_err(Error::Io)?;
    let normalized: Vec<String> = header.split(',').map(|f| f.trim().to_lowercase()).collect();
    if normalized != ["t", "x", "y", "z"] {
        return Err(Error::Parse(format!(
            "line 1: expected header t,x,y,z, got {header:?}"
        )));
    }
    for (i, line) in lines.enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let mut values = [0.0f64; 4];
        for (j, field) in fields.iter().enumerate() {
            values[j] = field.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad number {field:?}", i + 2))
            })?;
        }
        samples.push(Sample {
            t: values[0],
            x: values[1],
            y: values[2],
            z: values[3],
        });
    }
    WaveformRecord::new(phone_id, trigger_time, samples)
}
