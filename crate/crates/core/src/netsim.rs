//! Phone-network synthesis.
//!
//! Builds the simulated sensor network for one scenario: phone positions
//! sampled from a population-density grid, steady/moving state drawn from
//! a diurnal curve, clock offsets from a zero-mean Laplace, and sensor
//! quality classes from a configured mixture. The whole pass is a single
//! deterministic sweep over one seeded generator; the resulting network is
//! immutable for the duration of a simulated event.

use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::{Error, Result};

/// Geographic bounding box, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let all_finite =
            lat_min.is_finite() && lat_max.is_finite() && lon_min.is_finite() && lon_max.is_finite();
        if !all_finite || lat_min >= lat_max || lon_min >= lon_max {
            return Err(Error::Config(format!(
                "invalid bounding box [{lat_min}, {lat_max}] x [{lon_min}, {lon_max}]"
            )));
        }
        if lat_min < -90.0 || lat_max > 90.0 || lon_min < -180.0 || lon_max > 180.0 {
            return Err(Error::Config(format!(
                "bounding box [{lat_min}, {lat_max}] x [{lon_min}, {lon_max}] outside valid coordinates"
            )));
        }
        Ok(BoundingBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }
}

/// Population counts on a regular lat/lon grid, northernmost row first.
///
/// Cell sizes are in degrees (0.01 deg approximates a 1 km cell at
/// mid-latitudes); keeping the grid rectangular in lat/lon is a documented
/// approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    bbox: BoundingBox,
    cell_size_deg: f64,
    n_rows: usize,
    n_cols: usize,
    densities: Vec<f64>,
}

impl PopulationGrid {
    /// Build a grid from row-major densities (row 0 = northernmost).
    pub fn new(
        bbox: BoundingBox,
        cell_size_deg: f64,
        n_rows: usize,
        n_cols: usize,
        densities: Vec<f64>,
    ) -> Result<Self> {
        if !(cell_size_deg > 0.0) {
            return Err(Error::Config(format!(
                "cell size must be positive, got {cell_size_deg}"
            )));
        }
        if n_rows == 0 || n_cols == 0 || densities.len() != n_rows * n_cols {
            return Err(Error::Config(format!(
                "grid dimensions {n_rows}x{n_cols} do not match {} density values",
                densities.len()
            )));
        }
        let lat_span = bbox.lat_max - bbox.lat_min;
        let lon_span = bbox.lon_max - bbox.lon_min;
        if (lat_span - n_rows as f64 * cell_size_deg).abs() > 1e-6
            || (lon_span - n_cols as f64 * cell_size_deg).abs() > 1e-6
        {
            return Err(Error::Config(format!(
                "bbox spans ({lat_span}, {lon_span}) deg inconsistent with {n_rows}x{n_cols} cells of {cell_size_deg} deg"
            )));
        }
        for (i, &d) in densities.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!(
                    "density at row {}, col {} must be finite and non-negative, got {d}",
                    i / n_cols,
                    i % n_cols
                )));
            }
        }
        Ok(PopulationGrid {
            bbox,
            cell_size_deg,
            n_rows,
            n_cols,
            densities,
        })
    }

    /// Uniform-density grid covering `bbox` with square cells of
    /// `cell_size_deg`; spans are rounded up to whole cells.
    pub fn uniform(bbox: BoundingBox, cell_size_deg: f64, density: f64) -> Result<Self> {
        if !(cell_size_deg > 0.0) {
            return Err(Error::Config(format!(
                "cell size must be positive, got {cell_size_deg}"
            )));
        }
        if !(density.is_finite() && density >= 0.0) {
            return Err(Error::Config(format!(
                "uniform density must be finite and non-negative, got {density}"
            )));
        }
        let n_rows = ((bbox.lat_max - bbox.lat_min) / cell_size_deg).ceil().max(1.0) as usize;
        let n_cols = ((bbox.lon_max - bbox.lon_min) / cell_size_deg).ceil().max(1.0) as usize;
        let bbox = BoundingBox::new(
            bbox.lat_min,
            bbox.lat_min + n_rows as f64 * cell_size_deg,
            bbox.lon_min,
            bbox.lon_min + n_cols as f64 * cell_size_deg,
        )?;
        PopulationGrid::new(bbox, cell_size_deg, n_rows, n_cols, vec![density; n_rows * n_cols])
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Sum over all cells.
    pub fn total_population(&self) -> f64 {
        self.densities.iter().sum()
    }

    /// Lat/lon bounds of one cell; row 0 is the northernmost row.
    fn cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let lat_hi = self.bbox.lat_max - row as f64 * self.cell_size_deg;
        let lat_lo = lat_hi - self.cell_size_deg;
        let lon_lo = self.bbox.lon_min + col as f64 * self.cell_size_deg;
        let lon_hi = lon_lo + self.cell_size_deg;
        (lat_lo, lat_hi, lon_lo, lon_hi)
    }
}

/// Parse a population grid file.
///
/// Format: header `lat_min,lat_max,lon_min,lon_max,cell_size_deg,n_rows,n_cols`
/// followed by `n_rows` lines of `n_cols` comma-separated non-negative
/// densities, northernmost row first.
pub fn load_population_grid<R: BufRead>(reader: R) -> Result<PopulationGrid> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty grid file".into()))?
        .map_err(Error::Io)?;
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.len() != 7 {
        return Err(Error::Parse(format!(
            "line 1: header must have 7 fields (lat_min,lat_max,lon_min,lon_max,cell_size_deg,n_rows,n_cols), got {}",
            fields.len()
        )));
    }
    let num = |i: usize, name: &str| -> Result<f64> {
        fields[i]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("line 1: bad {name} value {:?}", fields[i])))
    };
    let lat_min = num(0, "lat_min")?;
    let lat_max = num(1, "lat_max")?;
    let lon_min = num(2, "lon_min")?;
    let lon_max = num(3, "lon_max")?;
    let cell_size = num(4, "cell_size_deg")?;
    let n_rows = num(5, "n_rows")? as usize;
    let n_cols = num(6, "n_cols")? as usize;

    let mut densities = Vec::with_capacity(n_rows * n_cols);
    for row in 0..n_rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: expected {n_rows} data rows", row + 2)))?
            .map_err(Error::Io)?;
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != n_cols {
            return Err(Error::Parse(format!(
                "line {}: expected {n_cols} columns, got {}",
                row + 2,
                cells.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            let d: f64 = cell.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad density at row {row}, col {col}: {cell:?}", row + 2))
            })?;
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Parse(format!(
                    "line {}: density at row {row}, col {col} must be finite and non-negative, got {d}",
                    row + 2
                )));
            }
            densities.push(d);
        }
    }
    let bbox = BoundingBox::new(lat_min, lat_max, lon_min, lon_max)?;
    PopulationGrid::new(bbox, cell_size, n_rows, n_cols, densities)
}

/// Convenience wrapper over [`load_population_grid`] for a file path.
pub fn load_population_grid_file(path: &Path) -> Result<PopulationGrid> {
    let file = std::fs::File::open(path)?;
    load_population_grid(std::io::BufReader::new(file))
}

/// Draw `n` phone positions, cell-weighted by density and uniform within
/// the chosen cell.
pub fn sample_phone_locations<R: Rng>(
    grid: &PopulationGrid,
    n: usize,
    rng: &mut R,
) -> Result<Vec<GeoPoint>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let total = grid.total_population();
    if !(total > 0.0) {
        return Err(Error::Config(
            "cannot sample phones from an all-zero population grid".into(),
        ));
    }
    // Cumulative weights + binary search keeps the draw O(log cells).
    let mut cumulative = Vec::with_capacity(grid.densities.len());
    let mut acc = 0.0;
    for &d in &grid.densities {
        acc += d;
        cumulative.push(acc);
    }

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let (lat_lo, lat_hi, lon_lo, lon_hi) = grid.cell_bounds(idx / grid.n_cols, idx % grid.n_cols);
        let lat = lat_lo + rng.random::<f64>() * (lat_hi - lat_lo);
        let lon = lon_lo + rng.random::<f64>() * (lon_hi - lon_lo);
        points.push(GeoPoint { lat, lon });
    }
    Ok(points)
}

/// Fraction of steady phones as a function of local hour, periodic linear
/// interpolation between anchor points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalCurve {
    anchors: Vec<(f64, f64)>,
}

impl DiurnalCurve {
    /// Anchors are `(hour, fraction)` pairs with hours strictly increasing
    /// in [0, 24) and fractions in [0, 1].
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Config("diurnal curve needs at least one anchor".into()));
        }
        for (i, &(h, f)) in anchors.iter().enumerate() {
            if !(0.0..24.0).contains(&h) {
                return Err(Error::Config(format!("anchor {i}: hour {h} outside [0, 24)")));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("anchor {i}: fraction {f} outside [0, 1]")));
            }
            if i > 0 && h <= anchors[i - 1].0 {
                return Err(Error::Config(format!(
                    "anchor hours must be strictly increasing, got {} after {}",
                    h,
                    anchors[i - 1].0
                )));
            }
        }
        Ok(DiurnalCurve { anchors })
    }

    /// Constant curve.
    pub fn constant(fraction: f64) -> Result<Self> {
        DiurnalCurve::new(vec![(0.0, fraction)])
    }

    /// Steady-phone fraction at `local_hour` in [0, 24).
    pub fn steady_fraction(&self, local_hour: f64) -> f64 {
        let h = local_hour.rem_euclid(24.0);
        let n = self.anchors.len();
        if n == 1 {
            return self.anchors[0].1;
        }
        // Find the anchor interval containing h, wrapping across midnight.
        let idx = self.anchors.partition_point(|&(ah, _)| ah <= h);
        let (h0, f0, h1, f1) = if idx == 0 || idx == n {
            // Between the last anchor and the first one of the next day.
            let (h0, f0) = self.anchors[n - 1];
            let (h1, f1) = self.anchors[0];
            (h0, f0, h1 + 24.0, f1)
        } else {
            let (h0, f0) = self.anchors[idx - 1];
            let (h1, f1) = self.anchors[idx];
            (h0, f0, h1, f1)
        };
        let h = if h < h0 { h + 24.0 } else { h };
        let t = (h - h0) / (h1 - h0);
        f0 + t * (f1 - f0)
    }
}

impl Default for DiurnalCurve {
    /// Night-heavy default: more phones are stationary at night.
    fn default() -> Self {
        DiurnalCurve::new(vec![(2.0, 0.70), (8.0, 0.45), (14.0, 0.40), (20.0, 0.55)])
            .expect("default anchors are valid")
    }
}

/// One simulated phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneAgent {
    pub id: u64,
    pub location: GeoPoint,
    /// Steady phones are reliable sensors; moving phones never trigger.
    pub steady: bool,
    /// Signed clock error, seconds; added to every reported time.
    pub clock_offset: f64,
    /// Triggering midpoint, log10 cm/s^2.
    pub trigger_threshold: f64,
    /// Detector confidence weight in [0, 1].
    pub quality_weight: f64,
    /// On-phone pick latency, seconds.
    pub detection_delay: f64,
}

/// Set `steady` on every phone by an independent Bernoulli draw with
/// probability `curve.steady_fraction(local_hour)`.
pub fn mark_steady<R: Rng>(
    phones: &mut [PhoneAgent],
    curve: &DiurnalCurve,
    local_hour: f64,
    rng: &mut R,
) {
    let p = curve.steady_fraction(local_hour);
    for phone in phones.iter_mut() {
        phone.steady = rng.random::<f64>() < p;
    }
}

/// Default Laplace scale: calibrated so 90% of offsets fall within
/// +/- 2.5 s, i.e. b = 2.5 / ln 10.
pub fn default_clock_offset_scale() -> f64 {
    2.5 / 10f64.ln()
}

/// One zero-centered Laplace draw with scale `scale_b` seconds.
pub fn sample_clock_offset<R: Rng>(rng: &mut R, scale_b: f64) -> f64 {
    // Inverse CDF on u in (-0.5, 0.5]: x = -b * sgn(u) * ln(1 - 2|u|).
    let u: f64 = rng.random::<f64>() - 0.5;
    if scale_b == 0.0 {
        return 0.0;
    }
    -scale_b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One sensor quality class in a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityClass {
    /// Mixture probability; all classes must sum to 1.
    pub probability: f64,
    /// Detector weight assigned to phones of this class.
    pub quality_weight: f64,
    /// Triggering midpoint, log10 cm/s^2.
    pub trigger_threshold: f64,
    /// Uniform pick-latency range, seconds.
    pub delay_range: (f64, f64),
}

/// Validate a quality mixture: probabilities sum to 1 within 1e-9, weights
/// in [0, 1], delay ranges ordered and non-negative.
pub fn validate_mixture(mixture: &[QualityClass]) -> Result<()> {
    if mixture.is_empty() {
        return Err(Error::Config("quality mixture must not be empty".into()));
    }
    let sum: f64 = mixture.iter().map(|c| c.probability).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "quality mixture probabilities must sum to 1, got {sum}"
        )));
    }
    for (i, c) in mixture.iter().enumerate() {
        if !(0.0..=1.0).contains(&c.probability) {
            return Err(Error::Config(format!("class {i}: probability {} outside [0, 1]", c.probability)));
        }
        if !(0.0..=1.0).contains(&c.quality_weight) {
            return Err(Error::Config(format!("class {i}: weight {} outside [0, 1]", c.quality_weight)));
        }
        if !c.trigger_threshold.is_finite() {
            return Err(Error::Config(format!("class {i}: non-finite trigger threshold")));
        }
        let (lo, hi) = c.delay_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return Err(Error::Config(format!("class {i}: bad delay range ({lo}, {hi})")));
        }
    }
    Ok(())
}

/// Draw one quality class per phone and fill in weight, threshold and
/// pick latency.
pub fn assign_quality<R: Rng>(
    phones: &mut [PhoneAgent],
    mixture: &[QualityClass],
    rng: &mut R,
) -> Result<()> {
    validate_mixture(mixture)?;
    for phone in phones.iter_mut() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = mixture[mixture.len() - 1];
        for class in mixture {
            acc += class.probability;
            if u < acc {
                chosen = *class;
                break;
            }
        }
        phone.quality_weight = chosen.quality_weight;
        phone.trigger_threshold = chosen.trigger_threshold;
        let (lo, hi) = chosen.delay_range;
        phone.detection_delay = if hi > lo { lo + rng.random::<f64>() * (hi - lo) } else { lo };
    }
    Ok(())
}

/// Full network synthesis: sample positions, mark steady phones, draw
/// clock offsets and quality classes. Single deterministic pass over `rng`.
pub fn synthesize_network<R: Rng>(
    grid: &PopulationGrid,
    n_phones: usize,
    curve: &DiurnalCurve,
    local_hour: f64,
    clock_offset_scale: f64,
    mixture: &[QualityClass],
    rng: &mut R,
) -> Result<Vec<PhoneAgent>> {
    validate_mixture(mixture)?;
    let locations = sample_phone_locations(grid, n_phones, rng)?;
    let mut phones: Vec<PhoneAgent> = locations
        .into_iter()
        .enumerate()
        .map(|(i, location)| PhoneAgent {
            id: i as u64,
            location,
            steady: false,
            clock_offset: 0.0,
            trigger_threshold: 0.0,
            quality_weight: 1.0,
            detection_delay: 0.0,
        })
        .collect();
    mark_steady(&mut phones, curve, local_hour, rng);
    for phone in phones.iter_mut() {
        phone.clock_offset = sample_clock_offset(rng, clock_offset_scale);
    }
    assign_quality(&mut phones, mixture, rng)?;
    Ok(phones)
}
