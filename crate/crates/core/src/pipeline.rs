//! End-to-end scenario execution: network synthesis, trigger simulation,
//! detection, city warnings and scoring, glued together the same way the
//! CLI drives them so tests and batch runs share one code path.

use crate::alert::city_warnings;
use crate::detect::{online_detect, DetectionEvent, DetectionRecord, Estimator};
use crate::geo::GeoPoint;
use crate::metrics::{aggregate, evaluate_run, evaluate_noise_run, EnsembleSummary, GroundTruth, MatchGate, RunMetrics};
use crate::netsim::{synthesize_network, PhoneAgent};
use crate::rng::{substream, STREAM_NETWORK};
use crate::scenario::{EarthquakeScenario, TruthSidecar};
use crate::trigger::{merge_streams, simulate_event_triggers, simulate_false_positives, TriggerStream};
use crate::Result;

/// Simulator output for one seed.
pub struct SimulatedRun {
    pub phones: Vec<PhoneAgent>,
    pub stream: TriggerStream,
    pub truth: TruthSidecar,
}

/// Synthesize the network and the full trigger stream (earthquake plus
/// false positives, clipped to the simulated window).
pub fn simulate(scenario: &EarthquakeScenario, seed: u64) -> Result<SimulatedRun> {
    let grid = scenario.build_grid()?;
    let n_phones = scenario.resolve_phone_count(&grid)?;
    let curve = scenario.diurnal_curve()?;
    let mut network_rng = substream(seed, STREAM_NETWORK, 0);
    let phones = synthesize_network(
        &grid,
        n_phones,
        &curve,
        scenario.local_hour(),
        scenario.phones.offset_scale_s,
        &scenario.phones.quality_mixture,
        &mut network_rng,
    )?;

    let window = scenario.sim_window()?;
    let event_stream = simulate_event_triggers(scenario, &phones, seed)?.clip(window.0, window.1);
    let fp_stream = simulate_false_positives(
        &phones,
        window,
        scenario.noise.fp_rate_per_phone_hour,
        scenario.noise.fp_amp_log_range,
        scenario.noise.fp_min_separation_s,
        seed,
    )?;
    let stream = merge_streams(event_stream, fp_stream);

    let n_steady = phones.iter().filter(|p| p.steady).count();
    Ok(SimulatedRun {
        truth: TruthSidecar {
            earthquake: scenario.earthquake,
            seed,
            n_phones: phones.len(),
            n_steady,
        },
        phones,
        stream,
    })
}

/// Run the online detector over a stream with the scenario's parameters.
pub fn detect_stream(scenario: &EarthquakeScenario, stream: &TriggerStream) -> Result<Vec<DetectionEvent>> {
    let estimator = Estimator {
        gmm: scenario.gmm()?,
        speeds: scenario.speeds()?,
    };
    online_detect(stream, &scenario.detector, &estimator)
}

/// Attach city warnings and produce the wire records for a detection list.
pub fn detection_records(
    scenario: &EarthquakeScenario,
    events: &[DetectionEvent],
) -> Result<Vec<DetectionRecord>> {
    let gmm = scenario.gmm()?;
    let scale = scenario.mmi_scale()?;
    let speeds = scenario.speeds()?;
    let cities: Vec<(String, GeoPoint)> = scenario
        .cities
        .iter()
        .map(|c| Ok((c.name.clone(), c.location()?)))
        .collect::<Result<_>>()?;
    events
        .iter()
        .map(|event| {
            let warnings = city_warnings(
                &cities,
                event,
                &gmm,
                &scale,
                &speeds,
                scenario.detector.search_depth_km,
            )?;
            Ok(event.to_record(warnings))
        })
        .collect()
}

/// Score events against the scenario's ground truth.
pub fn score(scenario: &EarthquakeScenario, events: &[DetectionEvent]) -> Result<RunMetrics> {
    match &scenario.earthquake {
        Some(eq) => Ok(evaluate_run(
            &GroundTruth {
                epicenter: eq.epicenter()?,
                depth_km: eq.depth_km,
                magnitude: eq.mag,
                origin_time: eq.origin_epoch,
            },
            events,
            &MatchGate::default(),
        )),
        None => Ok(evaluate_noise_run(events)),
    }
}

/// Everything one seed produces.
pub struct RunOutput {
    pub run: SimulatedRun,
    pub events: Vec<DetectionEvent>,
    pub records: Vec<DetectionRecord>,
    pub metrics: RunMetrics,
}

/// Simulate, detect and score one seed.
pub fn run_end_to_end(scenario: &EarthquakeScenario, seed: u64) -> Result<RunOutput> {
    let run = simulate(scenario, seed)?;
    let events = detect_stream(scenario, &run.stream)?;
    let records = detection_records(scenario, &events)?;
    let metrics = score(scenario, &events)?;
    Ok(RunOutput {
        run,
        events,
        records,
        metrics,
    })
}

/// Run `n_runs` seeds (`base_seed + index`) and aggregate.
pub fn run_ensemble(
    scenario: &EarthquakeScenario,
    base_seed: u64,
    n_runs: usize,
) -> Result<(Vec<(u64, RunMetrics)>, EnsembleSummary)> {
    let mut per_run = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let seed = base_seed.wrapping_add(i as u64);
        let output = run_end_to_end(scenario, seed)?;
        per_run.push((seed, output.metrics));
    }
    let summary = aggregate(&per_run.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>())?;
    Ok((per_run, summary))
}
