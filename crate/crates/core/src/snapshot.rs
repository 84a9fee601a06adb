//! GeoJSON snapshots of a run at chosen instants: every phone
//! (steady/moving, triggered or not), the P and S wavefront circles, the
//! true epicenter and, once alerted, the estimated epicenter. Standard
//! geo tooling renders these directly.

use serde_json::{json, Value};

use crate::detect::DetectionEvent;
use crate::geo::{GeoPoint, WaveSpeeds, EARTH_RADIUS_KM};
use crate::netsim::PhoneAgent;
use crate::scenario::EventConfig;
use crate::trigger::TriggerStream;

const CIRCLE_SEGMENTS: usize = 64;

/// Closed GeoJSON ring approximating a circle of `radius_km` around
/// `center` (small-circle approximation in lat/lon).
fn circle_ring(center: GeoPoint, radius_km: f64) -> Vec<[f64; 2]> {
    let deg_per_km_lat = 180.0 / (std::f64::consts::PI * EARTH_RADIUS_KM);
    let cos_lat = center.lat.to_radians().cos().max(1e-2);
    let mut ring = Vec::with_capacity(CIRCLE_SEGMENTS + 1);
    for i in 0..=CIRCLE_SEGMENTS {
        let angle = std::f64::consts::TAU * i as f64 / CIRCLE_SEGMENTS as f64;
        ring.push([
            center.lon + radius_km * deg_per_km_lat / cos_lat * angle.cos(),
            center.lat + radius_km * deg_per_km_lat * angle.sin(),
        ]);
    }
    ring
}

fn point_feature(p: GeoPoint, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
        "properties": properties,
    })
}

/// Build the snapshot FeatureCollection at absolute time `t_abs`.
///
/// Wavefront radii are `v * (t_abs - origin)`, floored at zero. Feature
/// count is `phones + 2 circles + 1 true-epicenter star + (1 if an event
/// has alerted by t_abs)`.
pub fn snapshot(
    earthquake: &EventConfig,
    speeds: &WaveSpeeds,
    phones: &[PhoneAgent],
    stream: &TriggerStream,
    events: &[DetectionEvent],
    t_abs: f64,
) -> Value {
    let mut features = Vec::with_capacity(phones.len() + 4);

    let mut triggered: std::collections::HashSet<u64> = std::collections::HashSet::new();
    for m in stream.iter().take_while(|m| m.t_report <= t_abs) {
        triggered.insert(m.phone_id);
    }
    for phone in phones {
        features.push(point_feature(
            phone.location,
            json!({
                "kind": "phone",
                "id": phone.id,
                "steady": phone.steady,
                "triggered": triggered.contains(&phone.id),
                "weight": phone.quality_weight,
            }),
        ));
    }

    let epicenter = GeoPoint {
        lat: earthquake.lat,
        lon: earthquake.lon,
    };
    let elapsed = t_abs - earthquake.origin_epoch;
    for (kind, speed) in [("p_wavefront", speeds.vp), ("s_wavefront", speeds.vs)] {
        let radius = (speed * elapsed).max(0.0);
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [circle_ring(epicenter, radius)]},
            "properties": {"kind": kind, "radius_km": radius, "t_s": elapsed},
        }));
    }

    features.push(point_feature(epicenter, json!({"kind": "true_epicenter", "mag": earthquake.mag})));
    if let Some(event) = events.iter().filter(|e| e.t_alert <= t_abs).min_by(|a, b| a.t_alert.total_cmp(&b.t_alert)) {
        features.push(point_feature(
            event.epicenter,
            json!({
                "kind": "estimated_epicenter",
                "mag": event.magnitude,
                "t_alert": event.t_alert,
            }),
        ));
    }

    json!({"type": "FeatureCollection", "features": features})
}
