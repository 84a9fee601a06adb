//! Earthquake confirmation and characterization from trigger streams.
//!
//! Clustering is DBSCAN with a conjunctive space-time neighborhood
//! (within `eps_space_km` great-circle AND `eps_time_s` reported-time
//! distance) and a weighted core criterion: a trigger is core when the
//! quality weights of its closed neighborhood sum to at least
//! `min_weight`. Border triggers attach to the first cluster discovered
//! in stream order, which makes the whole decomposition deterministic.
//!
//! Location is a coarse-to-fine grid search around the weighted centroid.
//! Every candidate epicenter gets a best-fit origin time (weighted median
//! of `t_i - d_i/vp`) and is scored by the weighted L1 norm of the P
//! moveout residuals; the weighted-median / L1 pairing keeps S-wave
//! triggers and stray false positives from dragging the fit. Magnitude
//! is the weighted median of per-member attenuation inversions.
//!
//! The online detector consumes a time-ordered stream with a sliding
//! window. A cluster alerts the first time its weight reaches
//! `min_weight` and its members pass the moveout plausibility filter;
//! later triggers near an alerted event refine its estimates but never
//! re-alert it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::alert::CityWarning;
use crate::geo::{great_circle_distance, GeoPoint, WaveSpeeds, EARTH_RADIUS_KM};
use crate::gmm::GroundMotionModel;
use crate::trigger::{TriggerMessage, TriggerStream};
use crate::{Error, Result};

/// Detector tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Spatial neighborhood radius, km.
    #[serde(default = "d_eps_space")]
    pub eps_space_km: f64,
    /// Temporal neighborhood radius, seconds.
    #[serde(default = "d_eps_time")]
    pub eps_time_s: f64,
    /// Weighted minPts: minimum summed quality weight of a core
    /// neighborhood, and the alert threshold for cluster weight.
    #[serde(default = "d_min_weight")]
    pub min_weight: f64,
    /// Online sliding-window length, seconds.
    #[serde(default = "d_window")]
    pub window_s: f64,
    /// Coarsest epicenter-search grid spacing, km.
    #[serde(default = "d_coarse")]
    pub coarse_spacing_km: f64,
    /// Number of times the search grid is halved; final spacing is
    /// `coarse_spacing_km / 2^refine_levels`.
    #[serde(default = "d_refine")]
    pub refine_levels: u32,
    /// Candidate epicenters stay within this radius of the weighted
    /// centroid, km.
    #[serde(default = "d_search_radius")]
    pub search_radius_km: f64,
    /// Moveout residual tolerance for the plausibility filter, seconds.
    #[serde(default = "d_moveout_tol")]
    pub moveout_tolerance_s: f64,
    /// Minimum fraction of members consistent with a single wavefront.
    #[serde(default = "d_min_moveout")]
    pub min_moveout_fraction: f64,
    /// Depth assumed during inversion, km.
    #[serde(default)]
    pub search_depth_km: f64,
}

fn d_eps_space() -> f64 {
    30.0
}
fn d_eps_time() -> f64 {
    20.0
}
fn d_min_weight() -> f64 {
    4.0
}
fn d_window() -> f64 {
    120.0
}
fn d_coarse() -> f64 {
    16.0
}
fn d_refine() -> u32 {
    3
}
fn d_search_radius() -> f64 {
    100.0
}
fn d_moveout_tol() -> f64 {
    3.0
}
fn d_min_moveout() -> f64 {
    0.6
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            eps_space_km: d_eps_space(),
            eps_time_s: d_eps_time(),
            min_weight: d_min_weight(),
            window_s: d_window(),
            coarse_spacing_km: d_coarse(),
            refine_levels: d_refine(),
            search_radius_km: d_search_radius(),
            moveout_tolerance_s: d_moveout_tol(),
            min_moveout_fraction: d_min_moveout(),
            search_depth_km: 0.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_space_km", self.eps_space_km),
            ("eps_time_s", self.eps_time_s),
            ("min_weight", self.min_weight),
            ("window_s", self.window_s),
            ("coarse_spacing_km", self.coarse_spacing_km),
            ("search_radius_km", self.search_radius_km),
            ("moveout_tolerance_s", self.moveout_tolerance_s),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name}: {value} must be positive")));
            }
        }
        if self.window_s < self.eps_time_s {
            return Err(Error::Config(format!(
                "window_s: {} must be at least eps_time_s ({})",
                self.window_s, self.eps_time_s
            )));
        }
        if !(0.0..=1.0).contains(&self.min_moveout_fraction) {
            return Err(Error::Config(format!(
                "min_moveout_fraction: {} outside [0, 1]",
                self.min_moveout_fraction
            )));
        }
        if !(self.search_depth_km >= 0.0) {
            return Err(Error::Config(format!(
                "search_depth_km: {} must be non-negative",
                self.search_depth_km
            )));
        }
        Ok(())
    }

    /// Grid spacing of the last refinement level, km.
    pub fn final_spacing_km(&self) -> f64 {
        self.coarse_spacing_km / 2f64.powi(self.refine_levels as i32)
    }
}

/// Forward model shared by the parameter estimators.
#[derive(Debug, Clone, Copy)]
pub struct Estimator {
    pub gmm: GroundMotionModel,
    pub speeds: WaveSpeeds,
}

/// A confirmed earthquake.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    /// Stream time at which the alert was issued.
    pub t_alert: f64,
    pub epicenter: GeoPoint,
    pub origin_time: f64,
    /// None when no member carried a positive amplitude.
    pub magnitude: Option<f64>,
    /// The estimate issued at alert time, before later refinement.
    pub first_magnitude: Option<f64>,
    /// Stream indices of every trigger attributed to this event.
    pub member_ids: Vec<u64>,
    /// Summed member weight at the latest estimate.
    pub weight: f64,
}

/// JSON Lines representation of a detection, with city warnings attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub t_alert: f64,
    pub lat: f64,
    pub lon: f64,
    pub t0: f64,
    pub mag: Option<f64>,
    pub mag_first: Option<f64>,
    pub n: usize,
    pub weight: f64,
    pub members: Vec<u64>,
    #[serde(default)]
    pub cities: Vec<CityWarning>,
}

impl DetectionEvent {
    pub fn to_record(&self, cities: Vec<CityWarning>) -> DetectionRecord {
        DetectionRecord {
            t_alert: self.t_alert,
            lat: self.epicenter.lat,
            lon: self.epicenter.lon,
            t0: self.origin_time,
            mag: self.magnitude,
            mag_first: self.first_magnitude,
            n: self.member_ids.len(),
            weight: self.weight,
            members: self.member_ids.clone(),
            cities,
        }
    }
}

fn within_eps(a: &TriggerMessage, b: &TriggerMessage, eps_space: f64, eps_time: f64) -> bool {
    (a.t_report - b.t_report).abs() <= eps_time
        && great_circle_distance(a.location, b.location) <= eps_space
}

/// Indices of all triggers within both the spatial and temporal radius of
/// `stream[idx]`, excluding `idx` itself, ascending.
pub fn st_neighbors(
    idx: usize,
    stream: &[TriggerMessage],
    eps_space_km: f64,
    eps_time_s: f64,
) -> Vec<usize> {
    let t = stream[idx].t_report;
    let lo = stream.partition_point(|m| m.t_report < t - eps_time_s);
    let hi = stream.partition_point(|m| m.t_report <= t + eps_time_s);
    (lo..hi)
        .filter(|&j| j != idx && within_eps(&stream[idx], &stream[j], eps_space_km, eps_time_s))
        .collect()
}

/// DBSCAN decomposition of a stream: clusters hold stream indices in
/// discovery order; `noise` holds everything unassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// Cluster a time-ordered stream.
///
/// Core criterion: closed-neighborhood weight sum >= `min_weight`.
/// Expansion is breadth-first from the earliest unvisited trigger, so
/// border triggers join the first-discovered cluster.
pub fn cluster_triggers(stream: &TriggerStream, params: &DetectorParams) -> Result<Clustering> {
    params.validate()?;
    let messages = stream.as_slice();
    cluster_slice(messages, params)
}

fn cluster_slice(messages: &[TriggerMessage], params: &DetectorParams) -> Result<Clustering> {
    let n = messages.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    let neighborhood_weight = |i: usize, neighbors: &[usize]| -> f64 {
        messages[i].weight + neighbors.iter().map(|&j| messages[j].weight).sum::<f64>()
    };

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let neighbors = st_neighbors(i, messages, params.eps_space_km, params.eps_time_s);
        if neighborhood_weight(i, &neighbors) < params.min_weight {
            continue; // noise for now; may become a border point later
        }
        let cluster_id = clusters.len();
        clusters.push(vec![i]);
        labels[i] = Some(cluster_id);
        let mut queue: VecDeque<usize> = neighbors.into();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                None => {
                    labels[j] = Some(cluster_id);
                    clusters[cluster_id].push(j);
                }
                Some(label) if label != cluster_id => continue,
                _ => {}
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let next = st_neighbors(j, messages, params.eps_space_km, params.eps_time_s);
            if neighborhood_weight(j, &next) >= params.min_weight {
                for q in next {
                    if !visited[q] || labels[q].is_none() {
                        queue.push_back(q);
                    }
                }
            }
        }
    }

    let noise = (0..n).filter(|&i| labels[i].is_none()).collect();
    Ok(Clustering { clusters, noise })
}

/// Lower weighted median: the smallest value whose cumulative weight
/// reaches half the total. Falls back to equal weights when all weights
/// are zero.
fn weighted_median(pairs: &mut Vec<(f64, f64)>) -> f64 {
    debug_assert!(!pairs.is_empty());
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if total <= 0.0 {
        return pairs[(pairs.len() - 1) / 2].0;
    }
    let mut acc = 0.0;
    for &(value, weight) in pairs.iter() {
        acc += weight;
        if acc >= total / 2.0 {
            return value;
        }
    }
    pairs[pairs.len() - 1].0
}

fn hyp_distance(candidate: GeoPoint, member: &TriggerMessage, depth_km: f64) -> f64 {
    great_circle_distance(candidate, member.location).hypot(depth_km)
}

/// Best-fit origin time and weighted L1 moveout residual for one
/// candidate epicenter.
fn moveout_fit(
    candidate: GeoPoint,
    members: &[TriggerMessage],
    vp: f64,
    depth_km: f64,
) -> (f64, f64) {
    let mut basis: Vec<(f64, f64)> = members
        .iter()
        .map(|m| (m.t_report - hyp_distance(candidate, m, depth_km) / vp, m.weight))
        .collect();
    let t0 = weighted_median(&mut basis);
    let objective = members
        .iter()
        .map(|m| m.weight * (m.t_report - t0 - hyp_distance(candidate, m, depth_km) / vp).abs())
        .sum();
    (t0, objective)
}

fn weighted_centroid(members: &[TriggerMessage]) -> GeoPoint {
    let mut total = 0.0;
    let mut lat = 0.0;
    let mut lon = 0.0;
    for m in members {
        total += m.weight;
        lat += m.weight * m.location.lat;
        lon += m.weight * m.location.lon;
    }
    if total <= 0.0 {
        let n = members.len() as f64;
        return GeoPoint {
            lat: members.iter().map(|m| m.location.lat).sum::<f64>() / n,
            lon: members.iter().map(|m| m.location.lon).sum::<f64>() / n,
        };
    }
    GeoPoint {
        lat: lat / total,
        lon: lon / total,
    }
}

/// Epicenter estimate: coarse-to-fine grid search minimizing the weighted
/// L1 moveout residual; ties go to the candidate nearest the weighted
/// centroid.
pub fn estimate_location(
    members: &[TriggerMessage],
    params: &DetectorParams,
    speeds: &WaveSpeeds,
) -> Result<GeoPoint> {
    if members.len() < 2 {
        return Err(Error::Contract(format!(
            "location estimation needs at least 2 members, got {}",
            members.len()
        )));
    }
    let centroid = weighted_centroid(members);
    let deg_per_km_lat = 180.0 / (std::f64::consts::PI * EARTH_RADIUS_KM);
    let cos_lat = centroid.lat.to_radians().cos().max(1e-2);
    let deg_per_km_lon = deg_per_km_lat / cos_lat;

    let mut center = centroid;
    let mut spacing = params.coarse_spacing_km;
    let mut half_extent = params.search_radius_km;
    let mut best_point = centroid;
    let (_t0, mut best_obj) = moveout_fit(centroid, members, speeds.vp, params.search_depth_km);
    let mut best_centroid_dist = 0.0;

    for _level in 0..=params.refine_levels {
        let steps = (half_extent / spacing).round() as i64;
        for di in -steps..=steps {
            for dj in -steps..=steps {
                let candidate = GeoPoint {
                    lat: (center.lat + di as f64 * spacing * deg_per_km_lat).clamp(-90.0, 90.0),
                    lon: center.lon + dj as f64 * spacing * deg_per_km_lon,
                };
                let centroid_dist = great_circle_distance(candidate, centroid);
                if centroid_dist > params.search_radius_km + 1e-9 {
                    continue;
                }
                let (_t0, obj) = moveout_fit(candidate, members, speeds.vp, params.search_depth_km);
                let tie = (obj - best_obj).abs() <= 1e-12 * best_obj.max(1.0);
                if (!tie && obj < best_obj) || (tie && centroid_dist < best_centroid_dist - 1e-12) {
                    best_obj = obj;
                    best_point = candidate;
                    best_centroid_dist = centroid_dist;
                }
            }
        }
        center = best_point;
        half_extent = spacing;
        spacing /= 2.0;
    }

    // Normalize longitude back into [-180, 180].
    let lon = (best_point.lon + 180.0).rem_euclid(360.0) - 180.0;
    Ok(GeoPoint {
        lat: best_point.lat,
        lon,
    })
}

/// Origin-time estimate: weighted median of `t_i - d_i/vp` at a fixed
/// epicenter.
pub fn estimate_origin_time(
    members: &[TriggerMessage],
    epicenter: GeoPoint,
    speeds: &WaveSpeeds,
    depth_km: f64,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Contract("origin-time estimation needs at least 1 member".into()));
    }
    let mut basis: Vec<(f64, f64)> = members
        .iter()
        .map(|m| (m.t_report - hyp_distance(epicenter, m, depth_km) / speeds.vp, m.weight))
        .collect();
    Ok(weighted_median(&mut basis))
}

/// Magnitude estimate: weighted median of per-member attenuation
/// inversions. Members with zero amplitude are excluded; if none remain
/// the estimate is an error the caller flags on the event.
pub fn estimate_magnitude(
    members: &[TriggerMessage],
    epicenter: GeoPoint,
    gmm: &GroundMotionModel,
    depth_km: f64,
) -> Result<f64> {
    let mut basis: Vec<(f64, f64)> = members
        .iter()
        .filter(|m| m.amplitude > 0.0)
        .map(|m| {
            let log_pga = (m.amplitude * 100.0).log10();
            (
                gmm.invert_magnitude(log_pga, hyp_distance(epicenter, m, depth_km)),
                m.weight,
            )
        })
        .collect();
    if basis.is_empty() {
        return Err(Error::Estimation(
            "no member with positive amplitude to invert".into(),
        ));
    }
    Ok(weighted_median(&mut basis))
}

/// Moveout plausibility: the fraction of members whose residual against
/// the fitted P wavefront is within tolerance AND whose implied apparent
/// speed lies in [vs/2, 2*vp]. Returns (pass, fraction); pass is
/// inclusive at `min_moveout_fraction`.
pub fn plausibility_filter(
    members: &[TriggerMessage],
    epicenter: GeoPoint,
    origin_time: f64,
    params: &DetectorParams,
    speeds: &WaveSpeeds,
) -> (bool, f64) {
    if members.is_empty() {
        return (false, 0.0);
    }
    let consistent = members
        .iter()
        .filter(|m| {
            let d = hyp_distance(epicenter, m, params.search_depth_km);
            let dt = m.t_report - origin_time;
            let residual = dt - d / speeds.vp;
            // Speed gate in product form so dt = 0, d = 0 passes.
            residual.abs() <= params.moveout_tolerance_s
                && dt >= 0.0
                && d <= 2.0 * speeds.vp * dt
                && d >= 0.5 * speeds.vs * dt
        })
        .count();
    let fraction = consistent as f64 / members.len() as f64;
    (fraction >= params.min_moveout_fraction, fraction)
}

/// A trigger retained by the online detector.
#[derive(Debug, Clone)]
struct WindowEntry {
    stream_idx: usize,
    message: TriggerMessage,
}

/// One alerted event and everything attributed to it.
struct ActiveEvent {
    event: DetectionEvent,
    /// Attributed triggers in arrival order (non-decreasing t_report).
    members: Vec<TriggerMessage>,
    member_ids: Vec<u64>,
    /// Re-estimate when the member count reaches this.
    next_refit: usize,
}

impl ActiveEvent {
    fn matches(&self, message: &TriggerMessage, params: &DetectorParams) -> bool {
        // Members are time-sorted; only the slab within eps_time can match.
        let lo = self
            .members
            .partition_point(|m| m.t_report < message.t_report - params.eps_time_s);
        // Newest first: the most recent members are the likeliest neighbors.
        self.members[lo..]
            .iter()
            .rev()
            .any(|m| within_eps(m, message, params.eps_space_km, params.eps_time_s))
    }

    fn reestimate(&mut self, params: &DetectorParams, est: &Estimator) -> Result<()> {
        let epicenter = estimate_location(&self.members, params, &est.speeds)?;
        let origin = estimate_origin_time(&self.members, epicenter, &est.speeds, params.search_depth_km)?;
        let magnitude = estimate_magnitude(&self.members, epicenter, &est.gmm, params.search_depth_km).ok();
        self.event.epicenter = epicenter;
        self.event.origin_time = origin;
        self.event.magnitude = magnitude;
        self.event.weight = self.members.iter().map(|m| m.weight).sum();
        Ok(())
    }
}

/// Replay a time-ordered stream through the sliding-window detector.
///
/// Each arrival first tries to join an already-alerted event (within the
/// space-time neighborhood of any of its attributed triggers); otherwise
/// it enters the free pool, which is re-clustered. A cluster whose weight
/// reaches `min_weight` and whose members pass the plausibility filter
/// alerts once, with `t_alert` equal to the arrival that completed it.
/// Events re-estimate their parameters as attributed membership doubles
/// and once more when the stream ends. Returned events are in alert
/// order with final estimates and `first_magnitude` preserved from alert
/// time.
pub fn online_detect(
    stream: &TriggerStream,
    params: &DetectorParams,
    est: &Estimator,
) -> Result<Vec<DetectionEvent>> {
    params.validate()?;
    let mut pool: VecDeque<WindowEntry> = VecDeque::new();
    let mut active: Vec<ActiveEvent> = Vec::new();

    for (stream_idx, message) in stream.iter().enumerate() {
        let now = message.t_report;
        while pool
            .front()
            .is_some_and(|entry| entry.message.t_report < now - params.window_s)
        {
            pool.pop_front();
        }

        // Attribution to an alerted event wins over new-cluster formation.
        if let Some(event) = active.iter_mut().find(|e| e.matches(message, params)) {
            event.members.push(message.clone());
            event.member_ids.push(stream_idx as u64);
            if event.members.len() >= event.next_refit {
                event.reestimate(params, est)?;
                event.next_refit *= 2;
            }
            continue;
        }

        pool.push_back(WindowEntry {
            stream_idx,
            message: message.clone(),
        });
        let window: Vec<TriggerMessage> = pool.iter().map(|e| e.message.clone()).collect();
        let clustering = cluster_slice(&window, params)?;

        let mut claimed: Vec<usize> = Vec::new();
        for cluster in &clustering.clusters {
            let weight: f64 = cluster.iter().map(|&i| window[i].weight).sum();
            if weight < params.min_weight || cluster.len() < 2 {
                continue;
            }
            // Pool order is time order; sorted indices keep the member
            // list time-sorted for the attribution binary search.
            let mut ordered = cluster.clone();
            ordered.sort_unstable();
            let members: Vec<TriggerMessage> = ordered.iter().map(|&i| window[i].clone()).collect();
            let epicenter = estimate_location(&members, params, &est.speeds)?;
            let origin = estimate_origin_time(&members, epicenter, &est.speeds, params.search_depth_km)?;
            let (pass, _fraction) = plausibility_filter(&members, epicenter, origin, params, &est.speeds);
            if !pass {
                continue;
            }
            let magnitude = estimate_magnitude(&members, epicenter, &est.gmm, params.search_depth_km).ok();
            let member_ids: Vec<u64> = ordered.iter().map(|&i| pool[i].stream_idx as u64).collect();
            active.push(ActiveEvent {
                event: DetectionEvent {
                    t_alert: now,
                    epicenter,
                    origin_time: origin,
                    magnitude,
                    first_magnitude: magnitude,
                    member_ids: Vec::new(),
                    weight,
                },
                members,
                member_ids,
                next_refit: 2 * cluster.len(),
            });
            claimed.extend(cluster.iter().copied());
        }

        if !claimed.is_empty() {
            claimed.sort_unstable();
            let mut keep = Vec::with_capacity(pool.len() - claimed.len());
            for (i, entry) in pool.drain(..).enumerate() {
                if claimed.binary_search(&i).is_err() {
                    keep.push(entry);
                }
            }
            pool = keep.into();
        }
    }

    // Final refinement over each event's full attributed membership.
    let mut events = Vec::with_capacity(active.len());
    for mut a in active {
        a.reestimate(params, est)?;
        a.member_ids.sort_unstable();
        a.event.member_ids = a.member_ids;
        events.push(a.event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn msg(phone_id: u64, lat: f64, lon: f64, t: f64, amp: f64, w: f64) -> TriggerMessage {
        TriggerMessage {
            phone_id,
            location: GeoPoint { lat, lon },
            t_report: t,
            amplitude: amp,
            weight: w,
            provenance: None,
        }
    }

    fn default_estimator() -> Estimator {
        Estimator {
            gmm: GroundMotionModel::default(),
            speeds: WaveSpeeds::default(),
        }
    }

    /// Noise-free stream: phones on a ring plus scattered interior, all
    /// triggering exactly at the P arrival with forward-model amplitudes.
    fn forward_stream(
        epicenter: GeoPoint,
        mag: f64,
        n: usize,
        depth_km: f64,
        origin: f64,
    ) -> TriggerStream {
        let gmm = GroundMotionModel::default();
        let speeds = WaveSpeeds::default();
        let mut rng = substream(314, 77, n as u64);
        let mut messages = Vec::new();
        for i in 0..n {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let radius = 5.0 + rng.random::<f64>() * 70.0;
            let lat = epicenter.lat + radius / 111.195 * angle.sin();
            let lon = epicenter.lon + radius / 111.195 * angle.cos() / epicenter.lat.to_radians().cos();
            let loc = GeoPoint { lat, lon };
            let d = great_circle_distance(epicenter, loc).hypot(depth_km);
            messages.push(TriggerMessage {
                phone_id: i as u64,
                location: loc,
                t_report: origin + d / speeds.vp,
                amplitude: 10f64.powf(gmm.predict_log_pga(mag, d)) / 100.0,
                weight: 1.0,
                provenance: None,
            });
        }
        TriggerStream::from_unsorted(messages)
    }

    #[test]
    fn neighbors_singleton_is_empty() {
        let stream = vec![msg(0, 0.0, 0.0, 0.0, 0.1, 1.0)];
        assert!(st_neighbors(0, &stream, 30.0, 20.0).is_empty());
    }

    #[test]
    fn neighbors_gate_space_and_time() {
        // 1 km and 1 s apart: mutual neighbors.
        let near = [msg(0, 0.0, 0.0, 0.0, 0.1, 1.0), msg(1, 0.009, 0.0, 1.0, 0.1, 1.0)];
        assert_eq!(st_neighbors(0, &near, 30.0, 20.0), vec![1]);
        assert_eq!(st_neighbors(1, &near, 30.0, 20.0), vec![0]);
        // 1 km but 100 s apart: the temporal gate cuts it.
        let far = [msg(0, 0.0, 0.0, 0.0, 0.1, 1.0), msg(1, 0.009, 0.0, 100.0, 0.1, 1.0)];
        assert!(st_neighbors(0, &far, 30.0, 20.0).is_empty());
    }

    #[test]
    fn cluster_empty_stream() {
        let clustering = cluster_triggers(&TriggerStream::empty(), &DetectorParams::default()).unwrap();
        assert!(clustering.clusters.is_empty());
        assert!(clustering.noise.is_empty());
    }

    #[test]
    fn colocated_triggers_form_one_cluster() {
        let messages: Vec<TriggerMessage> =
            (0..10).map(|i| msg(i, 10.0, 20.0, 5.0, 0.1, 1.0)).collect();
        let stream = TriggerStream::from_sorted(messages).unwrap();
        let params = DetectorParams {
            min_weight: 4.0,
            ..Default::default()
        };
        let clustering = cluster_triggers(&stream, &params).unwrap();
        assert_eq!(clustering.clusters.len(), 1);
        assert_eq!(clustering.clusters[0].len(), 10);
        assert!(clustering.noise.is_empty());
    }

    /// Brute-force DBSCAN reference: O(n^2) adjacency, core set from
    /// closed-neighborhood weights, components over cores in discovery
    /// order, borders to the earliest-discovered adjacent cluster.
    fn brute_force_reference(messages: &[TriggerMessage], params: &DetectorParams) -> Clustering {
        let n = messages.len();
        let adjacent = |i: usize, j: usize| {
            i != j && within_eps(&messages[i], &messages[j], params.eps_space_km, params.eps_time_s)
        };
        let is_core: Vec<bool> = (0..n)
            .map(|i| {
                let w: f64 = (0..n)
                    .filter(|&j| j == i || adjacent(i, j))
                    .map(|j| messages[j].weight)
                    .sum();
                w >= params.min_weight
            })
            .collect();

        let mut cluster_of: Vec<Option<usize>> = vec![None; n];
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if !is_core[start] || cluster_of[start].is_some() {
                continue;
            }
            let id = clusters.len();
            clusters.push(Vec::new());
            let mut queue = vec![start];
            cluster_of[start] = Some(id);
            while let Some(i) = queue.pop() {
                clusters[id].push(i);
                for j in 0..n {
                    if is_core[j] && cluster_of[j].is_none() && adjacent(i, j) {
                        cluster_of[j] = Some(id);
                        queue.push(j);
                    }
                }
            }
        }
        // Borders: earliest-discovered cluster among adjacent cores.
        for i in 0..n {
            if is_core[i] || cluster_of[i].is_some() {
                continue;
            }
            let owner = (0..n)
                .filter(|&j| is_core[j] && adjacent(i, j))
                .filter_map(|j| cluster_of[j])
                .min();
            if let Some(id) = owner {
                cluster_of[i] = Some(id);
                clusters[id].push(i);
            }
        }
        let noise = (0..n).filter(|&i| cluster_of[i].is_none()).collect();
        Clustering { clusters, noise }
    }

    fn canonical(clustering: &Clustering) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut clusters: Vec<Vec<usize>> = clustering
            .clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        clusters.sort();
        let mut noise = clustering.noise.clone();
        noise.sort_unstable();
        (clusters, noise)
    }

    fn random_stream(seed: u64, n: usize) -> TriggerStream {
        let mut rng = substream(seed, 88, 0);
        let messages: Vec<TriggerMessage> = (0..n)
            .map(|i| {
                msg(
                    i as u64,
                    rng.random::<f64>() * 1.0 - 0.5,
                    rng.random::<f64>() * 1.0 - 0.5,
                    rng.random::<f64>() * 120.0,
                    0.1,
                    0.2 + rng.random::<f64>() * 0.8,
                )
            })
            .collect();
        TriggerStream::from_unsorted(messages)
    }

    #[test]
    fn matches_brute_force_reference() {
        let params = DetectorParams {
            eps_space_km: 25.0,
            eps_time_s: 15.0,
            min_weight: 2.5,
            ..Default::default()
        };
        for seed in 0..100 {
            let n = 1 + (seed as usize * 7) % 200;
            let stream = random_stream(seed, n);
            let fast = cluster_triggers(&stream, &params).unwrap();
            let reference = brute_force_reference(stream.as_slice(), &params);
            assert_eq!(canonical(&fast), canonical(&reference), "seed {seed}, n {n}");
        }
    }

    #[test]
    fn weight_scaling_preserves_membership() {
        for seed in [3u64, 19, 57] {
            let stream = random_stream(seed, 120);
            let params = DetectorParams {
                min_weight: 2.0,
                ..Default::default()
            };
            let base = cluster_triggers(&stream, &params).unwrap();
            for scale in [0.25, 0.5, 0.9] {
                let scaled_stream = TriggerStream::from_sorted(
                    stream
                        .iter()
                        .map(|m| TriggerMessage {
                            weight: m.weight * scale,
                            ..m.clone()
                        })
                        .collect(),
                )
                .unwrap();
                let scaled_params = DetectorParams {
                    min_weight: 2.0 * scale,
                    ..params
                };
                let scaled = cluster_triggers(&scaled_stream, &scaled_params).unwrap();
                assert_eq!(canonical(&base), canonical(&scaled), "seed {seed} scale {scale}");
            }
        }
    }

    #[test]
    fn location_degenerate_geometry() {
        let members: Vec<TriggerMessage> = (0..4).map(|i| msg(i, 12.5, -7.25, 3.0, 0.1, 1.0)).collect();
        let params = DetectorParams::default();
        let p = estimate_location(&members, &params, &WaveSpeeds::default()).unwrap();
        assert!(great_circle_distance(p, GeoPoint { lat: 12.5, lon: -7.25 }) < 1e-9);
        assert!(estimate_location(&members[..1], &params, &WaveSpeeds::default()).is_err());
    }

    #[test]
    fn location_recovers_noise_free_epicenter() {
        let epicenter = GeoPoint { lat: -43.5, lon: 172.0 };
        let stream = forward_stream(epicenter, 6.0, 40, 0.0, 100.0);
        let params = DetectorParams::default();
        let members: Vec<TriggerMessage> = stream.as_slice().to_vec();
        let estimate = estimate_location(&members, &params, &WaveSpeeds::default()).unwrap();
        let err = great_circle_distance(estimate, epicenter);
        assert!(err <= params.final_spacing_km(), "error {err} km");
    }

    #[test]
    fn location_translation_equivariance() {
        let epicenter = GeoPoint { lat: 10.0, lon: 30.0 };
        let stream = forward_stream(epicenter, 5.5, 25, 0.0, 0.0);
        let params = DetectorParams::default();
        let speeds = WaveSpeeds::default();
        let base = estimate_location(stream.as_slice(), &params, &speeds).unwrap();
        let shifted: Vec<TriggerMessage> = stream
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.location.lon += 0.5;
                m
            })
            .collect();
        let moved = estimate_location(&shifted, &params, &speeds).unwrap();
        assert!((moved.lon - base.lon - 0.5).abs() < 1e-9, "{} vs {}", moved.lon, base.lon);
        assert!((moved.lat - base.lat).abs() < 1e-9);
    }

    #[test]
    fn origin_time_single_member_inversion() {
        let member = msg(0, 0.0, 0.539559, 10.0, 0.1, 1.0); // ~60 km east
        let d = great_circle_distance(GeoPoint { lat: 0.0, lon: 0.0 }, member.location);
        assert!((d - 60.0).abs() < 0.01, "distance {d}");
        let t0 = estimate_origin_time(
            &[member],
            GeoPoint { lat: 0.0, lon: 0.0 },
            &WaveSpeeds::default(),
            0.0,
        )
        .unwrap();
        assert!(t0.abs() < 0.01, "origin {t0}");
    }

    #[test]
    fn origin_time_shift_equivariance() {
        let epicenter = GeoPoint { lat: 5.0, lon: 5.0 };
        let stream = forward_stream(epicenter, 6.0, 15, 0.0, 50.0);
        let speeds = WaveSpeeds::default();
        let t0 = estimate_origin_time(stream.as_slice(), epicenter, &speeds, 0.0).unwrap();
        let shifted: Vec<TriggerMessage> = stream
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.t_report += 123.25;
                m
            })
            .collect();
        let t1 = estimate_origin_time(&shifted, epicenter, &speeds, 0.0).unwrap();
        assert!((t1 - t0 - 123.25).abs() < 1e-9);
    }

    #[test]
    fn magnitude_exact_on_forward_model() {
        let epicenter = GeoPoint { lat: -43.5, lon: 172.0 };
        let stream = forward_stream(epicenter, 6.4, 30, 0.0, 0.0);
        let m = estimate_magnitude(stream.as_slice(), epicenter, &GroundMotionModel::default(), 0.0)
            .unwrap();
        assert!((m - 6.4).abs() < 1e-6, "magnitude {m}");
    }

    #[test]
    fn magnitude_median_shrugs_off_one_corruption() {
        let epicenter = GeoPoint { lat: 0.0, lon: 0.0 };
        let stream = forward_stream(epicenter, 5.8, 11, 0.0, 0.0);
        let mut members: Vec<TriggerMessage> = stream.as_slice().to_vec();
        let clean = estimate_magnitude(&members, epicenter, &GroundMotionModel::default(), 0.0).unwrap();
        members[4].amplitude *= 1e4;
        let corrupted =
            estimate_magnitude(&members, epicenter, &GroundMotionModel::default(), 0.0).unwrap();
        assert!((clean - corrupted).abs() < 1e-9, "{clean} vs {corrupted}");
    }

    #[test]
    fn magnitude_all_zero_amplitudes_is_flagged() {
        let members: Vec<TriggerMessage> = (0..5).map(|i| msg(i, 0.0, 0.0, 1.0, 0.0, 1.0)).collect();
        let err = estimate_magnitude(&members, GeoPoint { lat: 0.0, lon: 0.0 }, &GroundMotionModel::default(), 0.0);
        assert!(matches!(err, Err(Error::Estimation(_))));
    }

    #[test]
    fn plausibility_passes_noise_free_cluster() {
        let epicenter = GeoPoint { lat: 0.0, lon: 0.0 };
        let stream = forward_stream(epicenter, 6.0, 20, 0.0, 0.0);
        let params = DetectorParams::default();
        let (pass, fraction) =
            plausibility_filter(stream.as_slice(), epicenter, 0.0, &params, &WaveSpeeds::default());
        assert!(pass);
        assert_eq!(fraction, 1.0);
    }

    #[test]
    fn plausibility_rejects_impossible_moveout() {
        // 10 simultaneous triggers scattered across ~100 km: no candidate
        // epicenter can equalize the distances, so no wavefront fits at
        // 2 s tolerance. (A collinear arrangement would not do: a remote
        // perpendicular source flattens it into a plane wave.)
        let mut members: Vec<TriggerMessage> = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let id = (3 * i + j) as u64;
                members.push(msg(id, 0.45 * i as f64, 0.45 * j as f64, 50.0, 0.1, 1.0));
            }
        }
        members.push(msg(9, 0.225, 0.225, 50.0, 0.1, 1.0));
        let params = DetectorParams {
            moveout_tolerance_s: 2.0,
            ..Default::default()
        };
        let speeds = WaveSpeeds::default();
        let epicenter = estimate_location(&members, &params, &speeds).unwrap();
        let t0 = estimate_origin_time(&members, epicenter, &speeds, 0.0).unwrap();
        let (pass, fraction) = plausibility_filter(&members, epicenter, t0, &params, &speeds);
        assert!(!pass, "fraction {fraction}");
    }

    #[test]
    fn plausibility_boundary_is_inclusive() {
        // Construct 3 of 5 consistent members with min fraction 0.6.
        let speeds = WaveSpeeds::default();
        let epicenter = GeoPoint { lat: 0.0, lon: 0.0 };
        let mut members = Vec::new();
        for i in 0..3 {
            let lon = 0.2 + 0.1 * i as f64;
            let d = great_circle_distance(epicenter, GeoPoint { lat: 0.0, lon });
            members.push(msg(i, 0.0, lon, d / speeds.vp, 0.1, 1.0));
        }
        members.push(msg(3, 0.0, 0.5, 500.0, 0.1, 1.0));
        members.push(msg(4, 0.0, 0.6, 700.0, 0.1, 1.0));
        let params = DetectorParams {
            min_moveout_fraction: 0.6,
            ..Default::default()
        };
        let (pass, fraction) = plausibility_filter(&members, epicenter, 0.0, &params, &speeds);
        assert_eq!(fraction, 0.6);
        assert!(pass);
    }

    #[test]
    fn online_detects_dense_noise_free_event_once() {
        let epicenter = GeoPoint { lat: -43.5, lon: 172.0 };
        let stream = forward_stream(epicenter, 7.0, 120, 0.0, 1000.0);
        let params = DetectorParams::default();
        let events = online_detect(&stream, &params, &default_estimator()).unwrap();
        assert_eq!(events.len(), 1);
        let event = &events[0];
        assert!(great_circle_distance(event.epicenter, epicenter) <= 2.0 * params.final_spacing_km());
        assert!((event.origin_time - 1000.0).abs() < 0.5);
        assert!((event.magnitude.unwrap() - 7.0).abs() < 0.05);
        assert!(event.member_ids.len() >= 100);
        // Alert can't precede the members that confirmed it.
        assert!(event.t_alert >= stream.as_slice()[0].t_report);
    }

    #[test]
    fn online_scattered_false_positives_stay_silent() {
        let mut rng = substream(5, 91, 0);
        let messages: Vec<TriggerMessage> = (0..400)
            .map(|i| {
                msg(
                    i as u64,
                    rng.random::<f64>() * 3.0 - 1.5,
                    rng.random::<f64>() * 3.0 - 1.5,
                    rng.random::<f64>() * 86400.0,
                    0.01,
                    0.95,
                )
            })
            .collect();
        let stream = TriggerStream::from_unsorted(messages);
        let events = online_detect(&stream, &DetectorParams::default(), &default_estimator()).unwrap();
        assert!(events.is_empty(), "unexpected events: {}", events.len());
    }

    #[test]
    fn online_equals_offline_membership_when_window_covers_stream() {
        let epicenter = GeoPoint { lat: 1.0, lon: 1.0 };
        let stream = forward_stream(epicenter, 6.5, 60, 0.0, 0.0);
        let params = DetectorParams {
            window_s: 1e6,
            ..Default::default()
        };
        let events = online_detect(&stream, &params, &default_estimator()).unwrap();
        assert_eq!(events.len(), 1);
        let clustering = cluster_triggers(&stream, &params).unwrap();
        let biggest = clustering
            .clusters
            .iter()
            .max_by_key(|c| c.len())
            .unwrap()
            .clone();
        let mut expected: Vec<u64> = biggest.into_iter().map(|i| i as u64).collect();
        expected.sort_unstable();
        assert_eq!(events[0].member_ids, expected);
    }

    #[test]
    fn online_rejects_nothing_twice_and_is_deterministic() {
        let epicenter = GeoPoint { lat: 0.0, lon: 0.0 };
        let stream = forward_stream(epicenter, 6.8, 80, 5.0, 0.0);
        let params = DetectorParams::default();
        let est = default_estimator();
        let a = online_detect(&stream, &params, &est).unwrap();
        let b = online_detect(&stream, &params, &est).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn clustering_matches_reference_on_random_input(seed in 1000u64..1100) {
            let n = 1 + (seed as usize % 60);
            let stream = random_stream(seed, n);
            let params = DetectorParams { min_weight: 2.0, ..Default::default() };
            let fast = cluster_triggers(&stream, &params).unwrap();
            let reference = brute_force_reference(stream.as_slice(), &params);
            prop_assert_eq!(canonical(&fast), canonical(&reference));
        }
    }
}
