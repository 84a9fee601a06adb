//! Scenario configuration.
//!
//! A scenario is one JSON document describing everything a run needs:
//! the ground-truth earthquake, the region and its population, physics
//! coefficients, phone-population behavior, background noise, detector
//! parameters, and the cities to warn. Every invariant owned by another
//! module is re-validated here at parse time so a bad file fails with a
//! field-path message instead of deep inside a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DetectorParams;
use crate::geo::{GeoPoint, WaveSpeeds};
use crate::gmm::{GroundMotionModel, MmiScale};
use crate::netsim::{
    default_clock_offset_scale, load_population_grid_file, validate_mixture, BoundingBox,
    DiurnalCurve, PopulationGrid, QualityClass,
};
use crate::{Error, Result};

/// Ground-truth earthquake parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    pub lat: f64,
    pub lon: f64,
    pub depth_km: f64,
    pub mag: f64,
    #[serde(default)]
    pub origin_epoch: f64,
    /// Local hour of occurrence, drives the steady-phone fraction.
    #[serde(default = "default_local_hour")]
    pub local_hour: f64,
}

fn default_local_hour() -> f64 {
    12.0
}

impl EventConfig {
    pub fn epicenter(&self) -> Result<GeoPoint> {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// Region and phone population: either a density grid file or a uniform
/// density over a bounding box, and either an absolute phone count or a
/// per-person penetration rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RegionConfig {
    #[serde(default)]
    pub grid_path: Option<PathBuf>,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub uniform_density: Option<f64>,
    #[serde(default = "default_cell_size")]
    pub cell_size_deg: f64,
    #[serde(default)]
    pub phone_count: Option<usize>,
    #[serde(default)]
    pub penetration: Option<f64>,
}

fn default_cell_size() -> f64 {
    0.01
}

/// Wave propagation, attenuation and intensity coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    #[serde(default = "default_vp")]
    pub vp: f64,
    #[serde(default = "default_vs")]
    pub vs: f64,
    #[serde(default)]
    pub gmm: GroundMotionModel,
    /// Fraction of the full PGA carried by the P wave when evaluating
    /// trigger probability at the P arrival.
    #[serde(default = "default_p_fraction")]
    pub p_fraction: f64,
    #[serde(default)]
    pub mmi: MmiScale,
}

fn default_vp() -> f64 {
    6.0
}
fn default_vs() -> f64 {
    3.5
}
fn default_p_fraction() -> f64 {
    0.3
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            vp: default_vp(),
            vs: default_vs(),
            gmm: GroundMotionModel::default(),
            p_fraction: default_p_fraction(),
            mmi: MmiScale::default(),
        }
    }
}

/// Phone-population behavior: clock error, diurnal steadiness, sensor
/// quality mixture and trigger steepness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneConfig {
    /// Laplace scale of the clock offset, seconds.
    #[serde(default = "default_clock_offset_scale")]
    pub offset_scale_s: f64,
    /// Diurnal steady-fraction anchors (hour, fraction).
    #[serde(default = "default_diurnal")]
    pub diurnal: Vec<(f64, f64)>,
    #[serde(default = "default_mixture")]
    pub quality_mixture: Vec<QualityClass>,
    /// Logistic steepness of the trigger probability curve.
    #[serde(default = "default_k_steepness")]
    pub k_steepness: f64,
}

fn default_diurnal() -> Vec<(f64, f64)> {
    vec![(2.0, 0.70), (8.0, 0.45), (14.0, 0.40), (20.0, 0.55)]
}

fn default_mixture() -> Vec<QualityClass> {
    vec![
        QualityClass {
            probability: 0.6,
            quality_weight: 0.95,
            trigger_threshold: 0.0,
            delay_range: (0.5, 1.5),
        },
        QualityClass {
            probability: 0.3,
            quality_weight: 0.7,
            trigger_threshold: 0.3,
            delay_range: (0.5, 2.0),
        },
        QualityClass {
            probability: 0.1,
            quality_weight: 0.4,
            trigger_threshold: 0.7,
            delay_range: (1.0, 3.0),
        },
    ]
}

fn default_k_steepness() -> f64 {
    4.0
}

impl Default for PhoneConfig {
    fn default() -> Self {
        PhoneConfig {
            offset_scale_s: default_clock_offset_scale(),
            diurnal: default_diurnal(),
            quality_mixture: default_mixture(),
            k_steepness: default_k_steepness(),
        }
    }
}

/// Background false-positive model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Poisson rate, events per phone-hour.
    #[serde(default = "default_fp_rate")]
    pub fp_rate_per_phone_hour: f64,
    /// Uniform range of log10 amplitude, cm/s^2.
    #[serde(default = "default_fp_amp_range")]
    pub fp_amp_log_range: (f64, f64),
    /// Minimum separation between false positives of one phone, seconds.
    #[serde(default = "default_fp_min_separation")]
    pub fp_min_separation_s: f64,
}

fn default_fp_rate() -> f64 {
    1.0 / 24.0
}
fn default_fp_amp_range() -> (f64, f64) {
    (-1.0, 0.5)
}
fn default_fp_min_separation() -> f64 {
    30.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            fp_rate_per_phone_hour: default_fp_rate(),
            fp_amp_log_range: default_fp_amp_range(),
            fp_min_separation_s: default_fp_min_separation(),
        }
    }
}

/// A warning target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityConfig {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl CityConfig {
    pub fn location(&self) -> Result<GeoPoint> {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// Simulated time window and snapshot schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seconds simulated before the origin time.
    #[serde(default = "default_pre_event")]
    pub pre_event_s: f64,
    /// Seconds simulated after the origin time.
    #[serde(default = "default_post_event")]
    pub post_event_s: f64,
    /// Absolute window start; required when no earthquake is configured.
    #[serde(default)]
    pub t_start: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Local hour used for the diurnal curve when no earthquake is present.
    #[serde(default)]
    pub local_hour: Option<f64>,
    /// Snapshot times, seconds after origin.
    #[serde(default = "default_snapshot_times")]
    pub snapshot_times_s: Vec<f64>,
}

fn default_pre_event() -> f64 {
    30.0
}
fn default_post_event() -> f64 {
    120.0
}
fn default_snapshot_times() -> Vec<f64> {
    vec![3.2, 5.2]
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pre_event_s: default_pre_event(),
            post_event_s: default_post_event(),
            t_start: None,
            t_end: None,
            local_hour: None,
            snapshot_times_s: default_snapshot_times(),
        }
    }
}

/// One complete scenario: a ground-truth event plus every knob of the
/// network, physics, noise and detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarthquakeScenario {
    /// Absent means a background-noise-only run.
    #[serde(default)]
    pub earthquake: Option<EventConfig>,
    pub region: RegionConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub phones: PhoneConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default)]
    pub cities: Vec<CityConfig>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory grid paths are resolved against; set when loaded from a file.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl EarthquakeScenario {
    /// Parse and validate a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: EarthquakeScenario = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parse and validate a scenario file; relative grid paths resolve
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut scenario = Self::from_json_str(&text)?;
        scenario.base_dir = path.parent().map(|p| p.to_path_buf());
        Ok(scenario)
    }

    /// Re-check every module invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("{name}: {e}"));

        if let Some(eq) = &self.earthquake {
            eq.epicenter().map_err(|e| field("earthquake", e))?;
            if !(0.0..=10.0).contains(&eq.mag) {
                return Err(Error::Config(format!(
                    "earthquake.mag: {} outside [0, 10]",
                    eq.mag
                )));
            }
            if !(eq.depth_km >= 0.0) {
                return Err(Error::Config(format!(
                    "earthquake.depth_km: {} must be non-negative",
                    eq.depth_km
                )));
            }
            if !(0.0..24.0).contains(&eq.local_hour) {
                return Err(Error::Config(format!(
                    "earthquake.local_hour: {} outside [0, 24)",
                    eq.local_hour
                )));
            }
            if !eq.origin_epoch.is_finite() {
                return Err(Error::Config("earthquake.origin_epoch: must be finite".into()));
            }
        } else {
            if self.sim.t_start.is_none() || self.sim.t_end.is_none() {
                return Err(Error::Config(
                    "sim.t_start and sim.t_end are required when no earthquake is configured".into(),
                ));
            }
        }
        let (t_start, t_end) = self.sim_window()?;
        if !(t_end >= t_start) {
            return Err(Error::Config(format!(
                "sim: window end {t_end} precedes start {t_start}"
            )));
        }

        match (&self.region.grid_path, &self.region.bbox, self.region.uniform_density) {
            (Some(_), None, None) => {}
            (None, Some(bbox), Some(density)) => {
                BoundingBox::new(bbox.lat_min, bbox.lat_max, bbox.lon_min, bbox.lon_max)
                    .map_err(|e| field("region.bbox", e))?;
                if !(density.is_finite() && density >= 0.0) {
                    return Err(Error::Config(format!(
                        "region.uniform_density: {density} must be finite and non-negative"
                    )));
                }
            }
            _ => {
                return Err(Error::Config(
                    "region: exactly one of grid_path or (bbox + uniform_density) must be given".into(),
                ))
            }
        }
        if !(self.region.cell_size_deg > 0.0) {
            return Err(Error::Config(format!(
                "region.cell_size_deg: {} must be positive",
                self.region.cell_size_deg
            )));
        }
        match (self.region.phone_count, self.region.penetration) {
            (Some(_), None) => {}
            (None, Some(p)) if p.is_finite() && p >= 0.0 => {}
            (None, Some(p)) => {
                return Err(Error::Config(format!(
                    "region.penetration: {p} must be finite and non-negative"
                )))
            }
            _ => {
                return Err(Error::Config(
                    "region: exactly one of phone_count or penetration must be given".into(),
                ))
            }
        }

        WaveSpeeds::new(self.physics.vp, self.physics.vs).map_err(|e| field("physics", e))?;
        GroundMotionModel::new(
            self.physics.gmm.a,
            self.physics.gmm.b,
            self.physics.gmm.c,
            self.physics.gmm.r0,
        )
        .map_err(|e| field("physics.gmm", e))?;
        MmiScale::new(self.physics.mmi.m1, self.physics.mmi.m0).map_err(|e| field("physics.mmi", e))?;
        if !(self.physics.p_fraction > 0.0 && self.physics.p_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "physics.p_fraction: {} outside (0, 1]",
                self.physics.p_fraction
            )));
        }

        if !(self.phones.offset_scale_s >= 0.0) {
            return Err(Error::Config(format!(
                "phones.offset_scale_s: {} must be non-negative",
                self.phones.offset_scale_s
            )));
        }
        if !(self.phones.k_steepness > 0.0) {
            return Err(Error::Config(format!(
                "phones.k_steepness: {} must be positive",
                self.phones.k_steepness
            )));
        }
        DiurnalCurve::new(self.phones.diurnal.clone()).map_err(|e| field("phones.diurnal", e))?;
        validate_mixture(&self.phones.quality_mixture).map_err(|e| field("phones.quality_mixture", e))?;

        if !(self.noise.fp_rate_per_phone_hour >= 0.0) {
            return Err(Error::Config(format!(
                "noise.fp_rate_per_phone_hour: {} must be non-negative",
                self.noise.fp_rate_per_phone_hour
            )));
        }
        let (lo, hi) = self.noise.fp_amp_log_range;
        if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
            return Err(Error::Config(format!(
                "noise.fp_amp_log_range: ({lo}, {hi}) must be an ordered finite pair"
            )));
        }
        if !(self.noise.fp_min_separation_s >= 0.0) {
            return Err(Error::Config(format!(
                "noise.fp_min_separation_s: {} must be non-negative",
                self.noise.fp_min_separation_s
            )));
        }

        self.detector.validate().map_err(|e| field("detector", e))?;

        for (i, city) in self.cities.iter().enumerate() {
            city.location()
                .map_err(|e| field(&format!("cities[{i}]"), e))?;
        }
        for (i, &t) in self.sim.snapshot_times_s.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Config(format!(
                    "sim.snapshot_times_s[{i}]: must be finite"
                )));
            }
        }
        Ok(())
    }

    pub fn speeds(&self) -> Result<WaveSpeeds> {
        WaveSpeeds::new(self.physics.vp, self.physics.vs)
    }

    pub fn gmm(&self) -> Result<GroundMotionModel> {
        GroundMotionModel::new(
            self.physics.gmm.a,
            self.physics.gmm.b,
            self.physics.gmm.c,
            self.physics.gmm.r0,
        )
    }

    pub fn mmi_scale(&self) -> Result<MmiScale> {
        MmiScale::new(self.physics.mmi.m1, self.physics.mmi.m0)
    }

    pub fn diurnal_curve(&self) -> Result<DiurnalCurve> {
        DiurnalCurve::new(self.phones.diurnal.clone())
    }

    /// Local hour for the diurnal curve: the earthquake's if present,
    /// otherwise `sim.local_hour`, otherwise noon.
    pub fn local_hour(&self) -> f64 {
        self.earthquake
            .as_ref()
            .map(|eq| eq.local_hour)
            .or(self.sim.local_hour)
            .unwrap_or_else(default_local_hour)
    }

    /// Absolute simulated window `[t_start, t_end]`.
    pub fn sim_window(&self) -> Result<(f64, f64)> {
        if let (Some(t0), Some(t1)) = (self.sim.t_start, self.sim.t_end) {
            return Ok((t0, t1));
        }
        match &self.earthquake {
            Some(eq) => Ok((
                eq.origin_epoch - self.sim.pre_event_s,
                eq.origin_epoch + self.sim.post_event_s,
            )),
            None => Err(Error::Config(
                "sim.t_start and sim.t_end are required when no earthquake is configured".into(),
            )),
        }
    }

    /// Materialize the population grid.
    pub fn build_grid(&self) -> Result<PopulationGrid> {
        match (&self.region.grid_path, &self.region.bbox, self.region.uniform_density) {
            (Some(path), _, _) => {
                let resolved = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                load_population_grid_file(&resolved)
            }
            (None, Some(bbox), Some(density)) => {
                PopulationGrid::uniform(*bbox, self.region.cell_size_deg, density)
            }
            _ => Err(Error::Config(
                "region: exactly one of grid_path or (bbox + uniform_density) must be given".into(),
            )),
        }
    }

    /// Number of phones to synthesize.
    pub fn resolve_phone_count(&self, grid: &PopulationGrid) -> Result<usize> {
        match (self.region.phone_count, self.region.penetration) {
            (Some(n), None) => Ok(n),
            (None, Some(p)) => Ok((p * grid.total_population()).round() as usize),
            _ => Err(Error::Config(
                "region: exactly one of phone_count or penetration must be given".into(),
            )),
        }
    }
}

/// Ground truth written alongside simulated trigger streams so the
/// detector input never carries the answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub earthquake: Option<EventConfig>,
    pub seed: u64,
    pub n_phones: usize,
    pub n_steady: usize,
}
