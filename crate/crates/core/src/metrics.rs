//! Run scoring and ensemble aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detect::DetectionEvent;
use crate::geo::{great_circle_distance, GeoPoint};
use crate::{Error, Result};

/// The answer a run is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub epicenter: GeoPoint,
    pub depth_km: f64,
    pub magnitude: f64,
    pub origin_time: f64,
}

/// How close an event must be to the truth to count as the detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchGate {
    pub max_distance_km: f64,
    pub max_time_s: f64,
}

impl Default for MatchGate {
    fn default() -> Self {
        MatchGate {
            max_distance_km: 100.0,
            max_time_s: 60.0,
        }
    }
}

/// Scores for one run. Error fields are absolute values and present only
/// when the run detected the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub detected: bool,
    /// t_alert minus true origin time, seconds.
    pub detection_latency_s: Option<f64>,
    pub epicenter_error_km: Option<f64>,
    pub origin_time_error_s: Option<f64>,
    pub magnitude_error: Option<f64>,
    /// Events beyond the matched one.
    pub false_alerts: usize,
}

/// Score one run: the earliest event within the gate is the detection,
/// every other event is a false alert.
pub fn evaluate_run(truth: &GroundTruth, events: &[DetectionEvent], gate: &MatchGate) -> RunMetrics {
    let matched = events
        .iter()
        .filter(|e| {
            great_circle_distance(e.epicenter, truth.epicenter) <= gate.max_distance_km
                && (e.t_alert - truth.origin_time).abs() <= gate.max_time_s
        })
        .min_by(|a, b| a.t_alert.total_cmp(&b.t_alert));

    match matched {
        Some(event) => RunMetrics {
            detected: true,
            detection_latency_s: Some(event.t_alert - truth.origin_time),
            epicenter_error_km: Some(great_circle_distance(event.epicenter, truth.epicenter)),
            origin_time_error_s: Some((event.origin_time - truth.origin_time).abs()),
            magnitude_error: event.magnitude.map(|m| (m - truth.magnitude).abs()),
            false_alerts: events.len() - 1,
        },
        None => RunMetrics {
            detected: false,
            detection_latency_s: None,
            epicenter_error_km: None,
            origin_time_error_s: None,
            magnitude_error: None,
            false_alerts: events.len(),
        },
    }
}

/// Score a run with no earthquake: every event is a false alert.
pub fn evaluate_noise_run(events: &[DetectionEvent]) -> RunMetrics {
    RunMetrics {
        detected: false,
        detection_latency_s: None,
        epicenter_error_km: None,
        origin_time_error_s: None,
        magnitude_error: None,
        false_alerts: events.len(),
    }
}

/// Ensemble summary. Medians are the lower of the two middles for even
/// counts; p90 is the nearest lower order statistic. Latency and error
/// statistics cover detected runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_runs: usize,
    pub detection_rate: f64,
    pub median_latency_s: Option<f64>,
    pub p90_latency_s: Option<f64>,
    pub median_epicenter_error_km: Option<f64>,
    pub median_origin_time_error_s: Option<f64>,
    pub median_magnitude_error: Option<f64>,
    pub total_false_alerts: usize,
}

fn sorted(values: Vec<f64>) -> Option<Vec<f64>> {
    if values.is_empty() {
        return None;
    }
    let mut values = values;
    values.sort_by(f64::total_cmp);
    Some(values)
}

fn lower_median(values: &[f64]) -> f64 {
    values[(values.len() - 1) / 2]
}

fn p90(values: &[f64]) -> f64 {
    values[((values.len() - 1) as f64 * 0.9).floor() as usize]
}

/// Aggregate run scores; empty input is a contract error.
pub fn aggregate(runs: &[RunMetrics]) -> Result<EnsembleSummary> {
    if runs.is_empty() {
        return Err(Error::Contract("cannot aggregate zero runs".into()));
    }
    let detected = runs.iter().filter(|r| r.detected).count();
    let collect = |f: fn(&RunMetrics) -> Option<f64>| sorted(runs.iter().filter_map(f).collect());

    let latencies = collect(|r| r.detection_latency_s);
    Ok(EnsembleSummary {
        n_runs: runs.len(),
        detection_rate: detected as f64 / runs.len() as f64,
        median_latency_s: latencies.as_deref().map(lower_median),
        p90_latency_s: latencies.as_deref().map(p90),
        median_epicenter_error_km: collect(|r| r.epicenter_error_km).as_deref().map(lower_median),
        median_origin_time_error_s: collect(|r| r.origin_time_error_s).as_deref().map(lower_median),
        median_magnitude_error: collect(|r| r.magnitude_error).as_deref().map(lower_median),
        total_false_alerts: runs.iter().map(|r| r.false_alerts).sum(),
    })
}

fn csv_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

/// Write one CSV row per `(seed, metrics)` pair plus a `summary` row.
///
/// Columns: `run,seed,detected,latency_s,epicenter_err_km,origin_err_s,
/// mag_err,false_alerts,p90_latency_s`. In the summary row `detected`
/// holds the detection rate, the error columns hold medians,
/// `false_alerts` the total, and `p90_latency_s` is populated.
pub fn write_metrics_csv<W: Write>(
    mut writer: W,
    runs: &[(u64, RunMetrics)],
    summary: &EnsembleSummary,
) -> Result<()> {
    writeln!(
        writer,
        "run,seed,detected,latency_s,epicenter_err_km,origin_err_s,mag_err,false_alerts,p90_latency_s"
    )?;
    for (i, (seed, run)) in runs.iter().enumerate() {
        writeln!(
            writer,
            "{i},{seed},{},{},{},{},{},{},",
            run.detected,
            csv_opt(run.detection_latency_s),
            csv_opt(run.epicenter_error_km),
            csv_opt(run.origin_time_error_s),
            csv_opt(run.magnitude_error),
            run.false_alerts
        )?;
    }
    writeln!(
        writer,
        "summary,,{},{},{},{},{},{},{}",
        summary.detection_rate,
        csv_opt(summary.median_latency_s),
        csv_opt(summary.median_epicenter_error_km),
        csv_opt(summary.median_origin_time_error_s),
        csv_opt(summary.median_magnitude_error),
        summary.total_false_alerts,
        csv_opt(summary.p90_latency_s)
    )?;
    Ok(())
}
