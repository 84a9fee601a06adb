//! Trigger-stream generation.
//!
//! Produces the detector's input for a scenario: earthquake triggers from
//! P/S wavefront passage plus a background of random false positives.
//! Each steady phone is evaluated at the two wavefront arrivals only; the
//! probability of triggering is a logistic curve in log PGA against the
//! phone's threshold, with the P wave carrying a configured fraction of
//! the full PGA. The reported amplitude is the site PGA from the
//! attenuation model (the peak the phone ultimately records), so the
//! detector's magnitude inversion sees the same forward model that
//! produced the stream. Clock offset and pick latency are applied
//! separately: latency shifts the true trigger time, offset shifts only
//! the reported time.
//!
//! Per-phone draws come from substreams keyed by phone id, so the stream
//! is reproducible independent of iteration order.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{great_circle_distance, hypocentral_distance, wave_travel_time, GeoPoint};
use crate::netsim::PhoneAgent;
use crate::rng::{substream, STREAM_EVENT, STREAM_FALSE_POSITIVE};
use crate::scenario::EarthquakeScenario;
use crate::{Error, Result};

/// What produced a trigger. Simulation-only bookkeeping: serialized for
/// replay and scoring tools, never read by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "p")]
    PWave,
    #[serde(rename = "s")]
    SWave,
    #[serde(rename = "fp")]
    FalsePositive,
}

/// One phone's report: time, location and amplitude, plus the detector
/// weight assigned to the phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "WireTrigger", into = "WireTrigger")]
pub struct TriggerMessage {
    pub phone_id: u64,
    pub location: GeoPoint,
    /// Reported epoch time: true trigger time plus the phone's clock offset.
    pub t_report: f64,
    /// Peak amplitude, m/s^2.
    pub amplitude: f64,
    /// Quality weight in [0, 1].
    pub weight: f64,
    pub provenance: Option<Provenance>,
}

/// JSON Lines representation: `phone_id`, `lat`, `lon`, `t`, `amp`, `w`,
/// optional `src`.
#[derive(Serialize, Deserialize)]
struct WireTrigger {
    phone_id: u64,
    lat: f64,
    lon: f64,
    t: f64,
    amp: f64,
    w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src: Option<Provenance>,
}

impl From<WireTrigger> for TriggerMessage {
    fn from(w: WireTrigger) -> Self {
        TriggerMessage {
            phone_id: w.phone_id,
            location: GeoPoint { lat: w.lat, lon: w.lon },
            t_report: w.t,
            amplitude: w.amp,
            weight: w.w,
            provenance: w.src,
        }
    }
}

impl From<TriggerMessage> for WireTrigger {
    fn from(m: TriggerMessage) -> Self {
        WireTrigger {
            phone_id: m.phone_id,
            lat: m.location.lat,
            lon: m.location.lon,
            t: m.t_report,
            amp: m.amplitude,
            w: m.weight,
            src: m.provenance,
        }
    }
}

/// A time-ordered sequence of trigger messages. Sortedness by `t_report`
/// is established at construction and preserved by every operation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriggerStream(Vec<TriggerMessage>);

impl TriggerStream {
    pub fn empty() -> Self {
        TriggerStream(Vec::new())
    }

    /// Wrap an already-sorted vector; unordered input is a contract error.
    pub fn from_sorted(messages: Vec<TriggerMessage>) -> Result<Self> {
        for pair in messages.windows(2) {
            if pair[1].t_report < pair[0].t_report {
                return Err(Error::Contract(format!(
                    "trigger stream not sorted: {} after {}",
                    pair[1].t_report, pair[0].t_report
                )));
            }
        }
        Ok(TriggerStream(messages))
    }

    /// Stable-sort arbitrary messages into a stream.
    pub fn from_unsorted(mut messages: Vec<TriggerMessage>) -> Self {
        messages.sort_by(|a, b| a.t_report.total_cmp(&b.t_report));
        TriggerStream(messages)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TriggerMessage> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[TriggerMessage] {
        &self.0
    }

    /// Drop messages outside `[t_start, t_end]`.
    pub fn clip(self, t_start: f64, t_end: f64) -> Self {
        TriggerStream(
            self.0
                .into_iter()
                .filter(|m| m.t_report >= t_start && m.t_report <= t_end)
                .collect(),
        )
    }

    /// Serialize as JSON Lines, one message per line in stream order.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for message in &self.0 {
            serde_json::to_writer(&mut writer, message)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parse JSON Lines; enforces the sorted-stream contract and reports
    /// parse failures with their line number.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut messages = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let message: TriggerMessage = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            messages.push(message);
        }
        Self::from_sorted(messages)
    }
}

/// Stable time-ordered merge; on equal timestamps `a`'s element comes first.
pub fn merge_streams(a: TriggerStream, b: TriggerStream) -> TriggerStream {
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let mut ai = a.0.into_iter().peekable();
    let mut bi = b.0.into_iter().peekable();
    loop {
        match (ai.peek(), bi.peek()) {
            (Some(x), Some(y)) => {
                if x.t_report <= y.t_report {
                    merged.push(ai.next().unwrap());
                } else {
                    merged.push(bi.next().unwrap());
                }
            }
            (Some(_), None) => merged.push(ai.next().unwrap()),
            (None, Some(_)) => merged.push(bi.next().unwrap()),
            (None, None) => break,
        }
    }
    TriggerStream(merged)
}

/// Probability that a phone triggers when shaking of `log_pga`
/// (log10 cm/s^2) passes: a logistic curve of steepness `k` centered on
/// the phone's threshold. `k = inf` gives a step function.
pub fn trigger_probability(log_pga: f64, phone: &PhoneAgent, k: f64) -> f64 {
    debug_assert!(k > 0.0, "steepness must be positive");
    let diff = log_pga - phone.trigger_threshold;
    if k.is_infinite() {
        return if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    1.0 / (1.0 + (-k * diff).exp())
}

/// Simulate earthquake triggers for every steady phone.
///
/// Each phone is evaluated at the P arrival with P-scaled PGA and, if it
/// did not trigger, at the S arrival with full PGA — at most one trigger
/// per phone. True trigger time is arrival plus the phone's pick latency;
/// the reported time additionally carries its clock offset. Moving phones
/// never trigger. Deterministic given `seed`.
pub fn simulate_event_triggers(
    scenario: &EarthquakeScenario,
    phones: &[PhoneAgent],
    seed: u64,
) -> Result<TriggerStream> {
    let Some(eq) = &scenario.earthquake else {
        return Ok(TriggerStream::empty());
    };
    let epicenter = eq.epicenter()?;
    let speeds = scenario.speeds()?;
    let gmm = scenario.gmm()?;
    let k = scenario.phones.k_steepness;
    let p_fraction_log = scenario.physics.p_fraction.log10();

    let mut messages = Vec::new();
    for phone in phones.iter().filter(|p| p.steady) {
        let mut rng = substream(seed, STREAM_EVENT, phone.id);
        // Draw both uniforms up front so a magnitude change cannot shift
        // which draw feeds which wavefront (common-random-numbers runs
        // rely on this).
        let u_p: f64 = rng.random();
        let u_s: f64 = rng.random();

        let d_epi = great_circle_distance(epicenter, phone.location);
        let d_hyp = hypocentral_distance(d_epi, eq.depth_km)?;
        let log_pga_full = gmm.predict_log_pga(eq.mag, d_hyp);
        let log_pga_p = log_pga_full + p_fraction_log;

        let passage = if u_p < trigger_probability(log_pga_p, phone, k) {
            Some((speeds.vp, Provenance::PWave))
        } else if u_s < trigger_probability(log_pga_full, phone, k) {
            Some((speeds.vs, Provenance::SWave))
        } else {
            None
        };
        let Some((speed, provenance)) = passage else {
            continue;
        };

        let arrival = eq.origin_epoch + wave_travel_time(d_hyp, speed)?;
        let t_true = arrival + phone.detection_delay;
        messages.push(TriggerMessage {
            phone_id: phone.id,
            location: phone.location,
            t_report: t_true + phone.clock_offset,
            amplitude: 10f64.powf(log_pga_full) / 100.0,
            weight: phone.quality_weight,
            provenance: Some(provenance),
        });
    }
    Ok(TriggerStream::from_unsorted(messages))
}

/// Simulate background false positives over `[t_start, t_end]`.
///
/// Each steady phone runs an independent homogeneous Poisson process of
/// `rate_per_phone_hour`, thinned so no phone reports twice within
/// `min_separation_s`. Amplitudes draw log-uniform from
/// `amp_log_range` (log10 cm/s^2). Deterministic given `seed`.
pub fn simulate_false_positives(
    phones: &[PhoneAgent],
    window: (f64, f64),
    rate_per_phone_hour: f64,
    amp_log_range: (f64, f64),
    min_separation_s: f64,
    seed: u64,
) -> Result<TriggerStream> {
    let (t_start, t_end) = window;
    if !(t_end >= t_start) {
        return Err(Error::Input(format!(
            "false-positive window end {t_end} precedes start {t_start}"
        )));
    }
    if !(rate_per_phone_hour >= 0.0) {
        return Err(Error::Input(format!(
            "false-positive rate must be non-negative, got {rate_per_phone_hour}"
        )));
    }
    let (amp_lo, amp_hi) = amp_log_range;
    if !(amp_hi >= amp_lo) {
        return Err(Error::Input(format!(
            "amplitude range ({amp_lo}, {amp_hi}) must be ordered"
        )));
    }
    let rate_per_s = rate_per_phone_hour / 3600.0;
    if rate_per_s == 0.0 {
        return Ok(TriggerStream::empty());
    }

    let mut messages = Vec::new();
    for phone in phones.iter().filter(|p| p.steady) {
        let mut rng = substream(seed, STREAM_FALSE_POSITIVE, phone.id);
        let mut t = t_start;
        let mut last_kept = f64::NEG_INFINITY;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate_per_s;
            if t > t_end {
                break;
            }
            if t - last_kept < min_separation_s {
                continue;
            }
            last_kept = t;
            let amp_log = amp_lo + rng.random::<f64>() * (amp_hi - amp_lo);
            messages.push(TriggerMessage {
                phone_id: phone.id,
                location: phone.location,
                t_report: t,
                amplitude: 10f64.powf(amp_log) / 100.0,
                weight: phone.quality_weight,
                provenance: Some(Provenance::FalsePositive),
            });
        }
    }
    Ok(TriggerStream::from_unsorted(messages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{EventConfig, RegionConfig};
    use proptest::prelude::*;

    fn phone(id: u64, lat: f64, lon: f64) -> PhoneAgent {
        PhoneAgent {
            id,
            location: GeoPoint { lat, lon },
            steady: true,
            clock_offset: 0.0,
            trigger_threshold: 0.0,
            quality_weight: 1.0,
            detection_delay: 0.0,
        }
    }

    fn test_scenario(mag: f64) -> EarthquakeScenario {
        EarthquakeScenario {
            earthquake: Some(EventConfig {
                lat: 0.0,
                lon: 0.0,
                depth_km: 0.0,
                mag,
                origin_epoch: 0.0,
                local_hour: 12.0,
            }),
            region: RegionConfig {
                bbox: Some(crate::netsim::BoundingBox::new(-1.0, 1.0, -1.0, 1.0).unwrap()),
                uniform_density: Some(1.0),
                phone_count: Some(0),
                ..Default::default()
            },
            physics: Default::default(),
            phones: Default::default(),
            noise: Default::default(),
            detector: Default::default(),
            cities: vec![],
            sim: Default::default(),
            seed: 0,
            base_dir: None,
        }
    }

    #[test]
    fn probability_midpoint_and_tails() {
        let p = phone(0, 0.0, 0.0);
        assert_eq!(trigger_probability(0.0, &p, 4.0), 0.5);
        let hi = trigger_probability(1.0, &p, 4.0);
        assert!((hi - 1.0 / (1.0 + (-4.0f64).exp())).abs() < 1e-12);
        assert!((hi - 0.9820).abs() < 1e-4);
        assert_eq!(trigger_probability(-1e9, &p, 4.0), 0.0);
    }

    #[test]
    fn probability_step_limit() {
        let p = phone(0, 0.0, 0.0);
        assert_eq!(trigger_probability(0.5, &p, f64::INFINITY), 1.0);
        assert_eq!(trigger_probability(-0.5, &p, f64::INFINITY), 0.0);
        assert_eq!(trigger_probability(0.0, &p, f64::INFINITY), 0.5);
    }

    #[test]
    fn no_steady_phones_no_triggers() {
        let scenario = test_scenario(6.0);
        let mut p = phone(0, 0.1, 0.1);
        p.steady = false;
        let stream = simulate_event_triggers(&scenario, &[p], 1).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn noise_free_triggers_at_p_arrival() {
        let mut scenario = test_scenario(6.0);
        scenario.phones.k_steepness = f64::INFINITY;
        let phones: Vec<PhoneAgent> = (0..20)
            .map(|i| {
                let mut p = phone(i, 0.05 * i as f64, 0.02 * i as f64);
                p.trigger_threshold = -10.0; // below P amplitude everywhere
                p
            })
            .collect();
        let stream = simulate_event_triggers(&scenario, &phones, 42).unwrap();
        assert_eq!(stream.len(), 20);
        let epicenter = GeoPoint { lat: 0.0, lon: 0.0 };
        for m in stream.iter() {
            let d = great_circle_distance(epicenter, m.location);
            let expected = d / 6.0;
            assert!((m.t_report - expected).abs() < 1e-9, "{} vs {expected}", m.t_report);
            assert_eq!(m.provenance, Some(Provenance::PWave));
            // Reported amplitude is the site PGA from the forward model.
            let log_pga = scenario.gmm().unwrap().predict_log_pga(6.0, d);
            assert!((m.amplitude - 10f64.powf(log_pga) / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_far_above_amplitude_never_triggers() {
        let mut scenario = test_scenario(4.0);
        scenario.phones.k_steepness = 4.0;
        let gmm = scenario.gmm().unwrap();
        let phones: Vec<PhoneAgent> = (0..50)
            .map(|i| {
                let mut p = phone(i, 0.1 + 0.01 * i as f64, 0.0);
                let d = great_circle_distance(
                    GeoPoint { lat: 0.0, lon: 0.0 },
                    p.location,
                );
                // 4 decades above the S-wave log PGA: tail probability ~1e-7.
                p.trigger_threshold = gmm.predict_log_pga(4.0, d) + 4.0;
                p
            })
            .collect();
        let stream = simulate_event_triggers(&scenario, &phones, 7).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn clock_offset_and_delay_shift_reports() {
        let mut scenario = test_scenario(6.0);
        scenario.phones.k_steepness = f64::INFINITY;
        let mut p = phone(3, 0.3, 0.0);
        p.trigger_threshold = -10.0;
        p.detection_delay = 1.25;
        p.clock_offset = -0.75;
        let stream = simulate_event_triggers(&scenario, &[p.clone()], 9).unwrap();
        let d = great_circle_distance(GeoPoint { lat: 0.0, lon: 0.0 }, p.location);
        let expected = d / 6.0 + 1.25 - 0.75;
        assert!((stream.as_slice()[0].t_report - expected).abs() < 1e-9);
    }

    #[test]
    fn event_triggers_at_most_one_per_phone() {
        let scenario = test_scenario(7.0);
        let phones: Vec<PhoneAgent> = (0..300).map(|i| phone(i, 0.01 * i as f64, 0.0)).collect();
        let stream = simulate_event_triggers(&scenario, &phones, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for m in stream.iter() {
            assert!(seen.insert(m.phone_id), "phone {} triggered twice", m.phone_id);
        }
    }

    #[test]
    fn raising_magnitude_never_loses_triggers() {
        let mut scenario = test_scenario(4.5);
        // Spread thresholds so mid magnitudes are genuinely marginal.
        let phones: Vec<PhoneAgent> = (0..400)
            .map(|i| {
                let mut p = phone(i, -1.0 + 0.005 * i as f64, 0.3);
                p.trigger_threshold = 0.5 + 0.005 * (i % 100) as f64;
                p
            })
            .collect();
        let mut previous = 0;
        for step in 0..8 {
            scenario.earthquake.as_mut().unwrap().mag = 4.5 + 0.4 * step as f64;
            let count = simulate_event_triggers(&scenario, &phones, 11).unwrap().len();
            assert!(count >= previous, "magnitude step {step}: {count} < {previous}");
            previous = count;
        }
        assert!(previous > 0);
    }

    #[test]
    fn false_positives_zero_rate() {
        let phones: Vec<PhoneAgent> = (0..10).map(|i| phone(i, 0.0, 0.0)).collect();
        let s = simulate_false_positives(&phones, (0.0, 3600.0), 0.0, (-1.0, 0.5), 30.0, 5).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn false_positive_count_concentrates() {
        let phones: Vec<PhoneAgent> = (0..1000).map(|i| phone(i, 0.0, 0.0)).collect();
        let s = simulate_false_positives(
            &phones,
            (0.0, 86_400.0),
            1.0 / 24.0,
            (-1.0, 0.5),
            30.0,
            17,
        )
        .unwrap();
        // Poisson mean 1000; 99.9% interval is about +/- 105.
        let n = s.len() as i64;
        assert!((n - 1000).abs() <= 105, "count {n}");
        for m in s.iter() {
            assert!(m.t_report >= 0.0 && m.t_report <= 86_400.0);
            assert_eq!(m.provenance, Some(Provenance::FalsePositive));
        }
    }

    #[test]
    fn false_positives_respect_min_separation() {
        let phones = vec![phone(0, 0.0, 0.0)];
        // Very high rate forces the cap to do the thinning.
        let s = simulate_false_positives(&phones, (0.0, 600.0), 3600.0, (-1.0, 0.5), 30.0, 2).unwrap();
        let times: Vec<f64> = s.iter().map(|m| m.t_report).collect();
        assert!(!times.is_empty());
        for pair in times.windows(2) {
            assert!(pair[1] - pair[0] >= 30.0, "gap {}", pair[1] - pair[0]);
        }
    }

    #[test]
    fn merge_identity_and_stability() {
        let a = TriggerStream::from_sorted(vec![
            TriggerMessage {
                phone_id: 1,
                location: GeoPoint { lat: 0.0, lon: 0.0 },
                t_report: 1.0,
                amplitude: 0.1,
                weight: 1.0,
                provenance: None,
            },
            TriggerMessage {
                phone_id: 2,
                location: GeoPoint { lat: 0.0, lon: 0.0 },
                t_report: 3.0,
                amplitude: 0.1,
                weight: 1.0,
                provenance: None,
            },
        ])
        .unwrap();
        let merged = merge_streams(a.clone(), TriggerStream::empty());
        assert_eq!(merged, a);

        let b = TriggerStream::from_sorted(vec![TriggerMessage {
            phone_id: 3,
            location: GeoPoint { lat: 0.0, lon: 0.0 },
            t_report: 3.0,
            amplitude: 0.2,
            weight: 1.0,
            provenance: None,
        }])
        .unwrap();
        let merged = merge_streams(a.clone(), b);
        let ids: Vec<u64> = merged.iter().map(|m| m.phone_id).collect();
        // Ties keep a's element first.
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(merged.len(), 3);
    }

    #[test]
    fn from_sorted_rejects_unordered() {
        let messages = vec![
            TriggerMessage {
                phone_id: 1,
                location: GeoPoint { lat: 0.0, lon: 0.0 },
                t_report: 5.0,
                amplitude: 0.1,
                weight: 1.0,
                provenance: None,
            },
            TriggerMessage {
                phone_id: 2,
                location: GeoPoint { lat: 0.0, lon: 0.0 },
                t_report: 4.0,
                amplitude: 0.1,
                weight: 1.0,
                provenance: None,
            },
        ];
        assert!(matches!(
            TriggerStream::from_sorted(messages),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let scenario = test_scenario(6.5);
        let phones: Vec<PhoneAgent> = (0..30).map(|i| phone(i, 0.02 * i as f64, 0.1)).collect();
        let stream = simulate_event_triggers(&scenario, &phones, 23).unwrap();
        let mut buffer = Vec::new();
        stream.write_jsonl(&mut buffer).unwrap();
        let back = TriggerStream::read_jsonl(buffer.as_slice()).unwrap();
        assert_eq!(stream, back);
    }

    #[test]
    fn jsonl_parse_error_names_line() {
        let text = "{\"phone_id\":1,\"lat\":0,\"lon\":0,\"t\":1.0,\"amp\":0.1,\"w\":1.0}\nnot json\n";
        let err = TriggerStream::read_jsonl(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    proptest! {
        #[test]
        fn simulated_streams_are_sorted(seed in 0u64..500, mag in 3.0f64..8.0) {
            let scenario = test_scenario(mag);
            let phones: Vec<PhoneAgent> = (0..60)
                .map(|i| {
                    let mut p = phone(i, -0.5 + 0.02 * i as f64, 0.2);
                    p.clock_offset = (i as f64 - 30.0) * 0.05;
                    p.detection_delay = 0.5;
                    p
                })
                .collect();
            let stream = simulate_event_triggers(&scenario, &phones, seed).unwrap();
            for pair in stream.as_slice().windows(2) {
                prop_assert!(pair[0].t_report <= pair[1].t_report);
            }
        }

        #[test]
        fn merge_preserves_length_and_order(na in 0usize..20, nb in 0usize..20, seed in 0u64..100) {
            let mut rng = substream(seed, 99, 0);
            let mk = |n: usize, rng: &mut rand_chacha::ChaCha12Rng| {
                let mut v: Vec<TriggerMessage> = (0..n)
                    .map(|i| TriggerMessage {
                        phone_id: i as u64,
                        location: GeoPoint { lat: 0.0, lon: 0.0 },
                        t_report: rng.random::<f64>() * 100.0,
                        amplitude: 0.1,
                        weight: 1.0,
                        provenance: None,
                    })
                    .collect();
                v.sort_by(|a, b| a.t_report.total_cmp(&b.t_report));
                TriggerStream::from_sorted(v).unwrap()
            };
            let a = mk(na, &mut rng);
            let b = mk(nb, &mut rng);
            let merged = merge_streams(a, b);
            prop_assert_eq!(merged.len(), na + nb);
            for pair in merged.as_slice().windows(2) {
                prop_assert!(pair[0].t_report <= pair[1].t_report);
            }
        }
    }
}
