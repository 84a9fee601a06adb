//! Command implementations behind the `crowdquake` binary.
//!
//! Each command is a plain function over paths so integration tests can
//! drive them without spawning processes. All output files are written
//! atomically (temp file + rename) and every command is deterministic
//! given the scenario, the seed and its inputs.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crowdquake_core::detect::DetectionRecord;
use crowdquake_core::metrics::{aggregate, write_metrics_csv};
use crowdquake_core::pipeline::{
    self, detection_records, detect_stream, run_end_to_end, run_ensemble,
};
use crowdquake_core::quality::{analyze, read_waveform_csv, WeightPolicy};
use crowdquake_core::scenario::EarthquakeScenario;
use crowdquake_core::snapshot::snapshot;
use crowdquake_core::trigger::TriggerStream;
use crowdquake_core::{Error, Result};

/// Exit-code contract: 0 success, 1 usage, 2 validation, 3 runtime.
pub fn exit_code(error: &Error) -> i32 {
    if error.is_validation() {
        2
    } else {
        3
    }
}

/// Write `contents` via a temp file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<EarthquakeScenario> {
    let mut scenario = EarthquakeScenario::from_file(path)?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

fn records_jsonl(records: &[DetectionRecord]) -> Result<Vec<u8>> {
    let mut buffer = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buffer, record)?;
        buffer.push(b'\n');
    }
    Ok(buffer)
}

/// `simulate`: write the sorted trigger stream and its truth sidecar.
pub fn cmd_simulate(scenario_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<()> {
    let scenario = load_scenario(scenario_path, seed_override)?;
    let run = pipeline::simulate(&scenario, scenario.seed)?;
    let mut buffer = Vec::new();
    run.stream.write_jsonl(&mut buffer)?;
    write_atomic(out, &buffer)?;
    write_atomic(&truth_path(out), &serde_json::to_vec_pretty(&run.truth)?)?;
    Ok(())
}

/// `detect`: replay a trigger file through the online detector and write
/// detections with city warnings.
pub fn cmd_detect(scenario_path: &Path, triggers: &Path, out: &Path) -> Result<()> {
    let scenario = load_scenario(scenario_path, None)?;
    let file = fs::File::open(triggers)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", triggers.display()))))?;
    let stream = TriggerStream::read_jsonl(BufReader::new(file))?;
    let events = detect_stream(&scenario, &stream)?;
    let records = detection_records(&scenario, &events)?;
    write_atomic(out, &records_jsonl(&records)?)?;
    Ok(())
}

/// `run`: simulate, detect, score and snapshot one seed into a directory.
pub fn cmd_run(scenario_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    let scenario = load_scenario(scenario_path, seed_override)?;
    let output = run_end_to_end(&scenario, scenario.seed)?;

    let mut triggers = Vec::new();
    output.run.stream.write_jsonl(&mut triggers)?;
    write_atomic(&out_dir.join("triggers.jsonl"), &triggers)?;
    write_atomic(&out_dir.join("truth.json"), &serde_json::to_vec_pretty(&output.run.truth)?)?;
    write_atomic(&out_dir.join("detections.jsonl"), &records_jsonl(&output.records)?)?;

    let runs = [(scenario.seed, output.metrics.clone())];
    let summary = aggregate(&[output.metrics.clone()])?;
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &runs, &summary)?;
    write_atomic(&out_dir.join("metrics.csv"), &csv)?;

    if let Some(eq) = &scenario.earthquake {
        let speeds = scenario.speeds()?;
        for &offset in &scenario.sim.snapshot_times_s {
            let t_abs = eq.origin_epoch + offset;
            let doc = snapshot(eq, &speeds, &output.run.phones, &output.run.stream, &output.events, t_abs);
            let name = format!("snapshot_{offset:.1}s.geojson");
            write_atomic(&out_dir.join(name), &serde_json::to_vec(&doc)?)?;
        }
    }
    Ok(())
}

/// `ensemble`: run `n_runs` seeds (`seed + index`), write per-run metrics
/// plus the aggregate row, and return the summary as JSON text.
pub fn cmd_ensemble(
    scenario_path: &Path,
    out_dir: &Path,
    n_runs: usize,
    seed_override: Option<u64>,
) -> Result<String> {
    if n_runs == 0 {
        return Err(Error::Input("ensemble needs at least one run".into()));
    }
    let scenario = load_scenario(scenario_path, seed_override)?;
    let (runs, summary) = run_ensemble(&scenario, scenario.seed, n_runs)?;
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &runs, &summary)?;
    write_atomic(&out_dir.join("metrics.csv"), &csv)?;
    let text = serde_json::to_string_pretty(&summary)?;
    write_atomic(&out_dir.join("summary.json"), text.as_bytes())?;
    Ok(text)
}

/// `quality`: analyze one waveform CSV; returns the report as JSON text.
///
/// Records nominally cover one minute before the trigger, so when no
/// trigger time is given it defaults to 60 s after the first sample.
pub fn cmd_quality(waveform: &Path, trigger_time: Option<f64>) -> Result<String> {
    let file = fs::File::open(waveform)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", waveform.display()))))?;
    let mut reader = BufReader::new(file);
    // Peek the first data line for the default trigger time.
    let record = read_waveform_csv(&mut reader, 0, f64::INFINITY)?;
    let trigger_time = trigger_time.unwrap_or_else(|| {
        record.samples.first().map(|s| s.t + 60.0).unwrap_or(60.0)
    });
    let record = crowdquake_core::quality::WaveformRecord::new(0, trigger_time, record.samples)?;
    let report = analyze(&record, &WeightPolicy::default())?;
    Ok(serde_json::to_string_pretty(&report)?)
}

/// Buffered stdout writer for command output.
pub fn print_line(text: &str) {
    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let _ = writeln!(w, "{text}");
}
