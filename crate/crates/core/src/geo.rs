//! Geodesy and seismic wave kinematics in a homogeneous medium.
//!
//! Distances are haversine arcs on a sphere of radius [`EARTH_RADIUS_KM`];
//! at the regional scales this crate targets (a few hundred km) the
//! spherical approximation is well inside every stated tolerance. Wave
//! travel is straight-ray: hypocentral distance divided by a constant
//! phase speed.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point on the Earth's surface, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validated constructor: both coordinates finite, lat in [-90, 90],
    /// lon in [-180, 180].
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::Input(format!(
                "coordinates must be finite, got ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Input(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Input(format!("longitude {lon} outside [-180, 180]")));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// P- and S-wave phase speeds, km/s. Invariant: `vp > vs > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpeeds {
    pub vp: f64,
    pub vs: f64,
}

impl WaveSpeeds {
    pub fn new(vp: f64, vs: f64) -> Result<Self> {
        if !(vp.is_finite() && vs.is_finite() && vp > vs && vs > 0.0) {
            return Err(Error::Config(format!(
                "wave speeds must satisfy vp > vs > 0, got vp={vp}, vs={vs}"
            )));
        }
        Ok(WaveSpeeds { vp, vs })
    }
}

impl Default for WaveSpeeds {
    fn default() -> Self {
        WaveSpeeds { vp: 6.0, vs: 3.5 }
    }
}

/// Haversine great-circle distance between two points, km.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_KM * c
}

/// Slant distance from hypocenter to a surface point, km:
/// `sqrt(epicentral^2 + depth^2)`.
pub fn hypocentral_distance(epicentral_km: f64, depth_km: f64) -> Result<f64> {
    if !(epicentral_km >= 0.0 && depth_km >= 0.0) {
        return Err(Error::Input(format!(
            "distances must be non-negative, got epicentral={epicentral_km}, depth={depth_km}"
        )));
    }
    Ok(epicentral_km.hypot(depth_km))
}

/// Straight-ray travel time, seconds.
pub fn wave_travel_time(dist_km: f64, speed_km_s: f64) -> Result<f64> {
    if !(speed_km_s > 0.0) {
        return Err(Error::Config(format!(
            "wave speed must be positive, got {speed_km_s}"
        )));
    }
    if !(dist_km >= 0.0) {
        return Err(Error::Input(format!(
            "distance must be non-negative, got {dist_km}"
        )));
    }
    Ok(dist_km / speed_km_s)
}
