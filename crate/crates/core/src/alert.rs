//! City-level warning products.
//!
//! Warning time is measured against the S-wave arrival (the damaging
//! phase): predicted S arrival at the city minus the alert time. It is
//! reported signed — negative means the shaking beat the alert — so late
//! alerts stay visible in downstream statistics.

use serde::{Deserialize, Serialize};

use crate::detect::DetectionEvent;
use crate::geo::{great_circle_distance, GeoPoint, WaveSpeeds};
use crate::gmm::{GroundMotionModel, MmiScale};
use crate::{Error, Result};

/// Predicted shaking and lead time for one city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityWarning {
    pub name: String,
    #[serde(rename = "mmi")]
    pub predicted_mmi: f64,
    #[serde(rename = "warn_s")]
    pub warning_time_s: f64,
}

/// Seconds between the alert and the estimated S-wave arrival at `city`.
pub fn warning_time(
    city: GeoPoint,
    event: &DetectionEvent,
    speeds: &WaveSpeeds,
    depth_km: f64,
) -> f64 {
    let d = great_circle_distance(city, event.epicenter).hypot(depth_km);
    event.origin_time + d / speeds.vs - event.t_alert
}

/// Predicted MMI at `city` from the event's estimated magnitude.
pub fn predict_city_mmi(
    city: GeoPoint,
    event: &DetectionEvent,
    gmm: &GroundMotionModel,
    scale: &MmiScale,
    depth_km: f64,
) -> Result<f64> {
    let magnitude = event.magnitude.ok_or_else(|| {
        Error::Estimation("event carries no magnitude estimate to predict intensity from".into())
    })?;
    let d = great_circle_distance(city, event.epicenter).hypot(depth_km);
    let pga = 10f64.powf(gmm.predict_log_pga(magnitude, d));
    scale.pga_to_mmi(pga)
}

/// Warning products for a list of cities. Events without a magnitude
/// estimate yield no city products.
pub fn city_warnings(
    cities: &[(String, GeoPoint)],
    event: &DetectionEvent,
    gmm: &GroundMotionModel,
    scale: &MmiScale,
    speeds: &WaveSpeeds,
    depth_km: f64,
) -> Result<Vec<CityWarning>> {
    if event.magnitude.is_none() {
        return Ok(Vec::new());
    }
    cities
        .iter()
        .map(|(name, location)| {
            Ok(CityWarning {
                name: name.clone(),
                predicted_mmi: predict_city_mmi(*location, event, gmm, scale, depth_km)?,
                warning_time_s: warning_time(*location, event, speeds, depth_km),
            })
        })
        .collect()
}
