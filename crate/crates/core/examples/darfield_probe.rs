use crowdquake_core::metrics::aggregate;
use crowdquake_core::pipeline::run_end_to_end;
use crowdquake_core::scenario::EarthquakeScenario;
use std::time::Instant;

fn main() {
    let scenario = EarthquakeScenario::from_file(std::path::Path::new("scenarios/darfield.json")).unwrap();
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut first_events = Vec::new();
    for i in 0..50u64 {
        let out = run_end_to_end(&scenario, scenario.seed + i).unwrap();
        if i < 3 {
            for r in &out.records {
                first_events.push(serde_json::json!({
                    "t_alert_rel": r.t_alert - 1283531741.0,
                    "mag": r.mag, "mag_first": r.mag_first,
                    "lat": r.lat, "lon": r.lon, "n": r.n,
                    "cities": r.cities.iter().map(|c| format!("{} mmi {:.1} warn {:.1}s", c.name, c.predicted_mmi, c.warning_time_s)).collect::<Vec<_>>(),
                }));
            }
        }
        runs.push(out.metrics);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let s = aggregate(&runs).unwrap();
    println!("{}", serde_json::to_string_pretty(&s).unwrap());
    println!("elapsed {elapsed:.2}s for 50 runs");
    for e in first_events { println!("{e}"); }
}
