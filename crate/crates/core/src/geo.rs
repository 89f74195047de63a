//! Geographic primitives, onboard records, voyages and route segments.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle distances, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Names of the navigational and weather channels, matching the onboard export headers.
pub mod channels {
    pub const TIMESTAMP: &str = "Timestamp";
    pub const LATITUDE: &str = "Latitude";
    pub const LONGITUDE: &str = "Longitude";
    pub const SPEED_OVER_GROUND: &str = "SpeedOverGround";
    pub const HEADING_MAGNETIC: &str = "HeadingMagnetic";
    pub const ENGINE_FUEL_RATE: &str = "EngineFuelRate";

    pub const PITCH: &str = "Pitch";
    pub const ROLL: &str = "Roll";
    pub const WIND_SPEED_ONB: &str = "WindSpeed_onb";
    pub const WIND_DIRECTION_ONB: &str = "WindDirection_onb";
    pub const WIND_SPEED_CPS: &str = "WindSpeed_cps";
    pub const WIND_DIRECTION_CPS: &str = "WindDirection_cps";
    pub const WAVE_HEIGHT: &str = "WaveHeight";
    pub const WAVE_DIRECTION: &str = "WaveDirection";
    pub const WIND_SPEED_SG: &str = "WindSpeed_sg";
    pub const WIND_DIRECTION_SG: &str = "WindDirection_sg";
    pub const CURRENT_SPEED: &str = "CurrentSpeed";
    pub const CURRENT_DIRECTION: &str = "CurrentDirection";

    /// Columns every onboard file must carry.
    pub const REQUIRED: [&str; 6] = [
        TIMESTAMP,
        LATITUDE,
        LONGITUDE,
        SPEED_OVER_GROUND,
        HEADING_MAGNETIC,
        ENGINE_FUEL_RATE,
    ];

    /// Optional per-sample channels kept in [`super::SamplePoint::weather`].
    pub const OPTIONAL: [&str; 12] = [
        PITCH,
        ROLL,
        WIND_SPEED_ONB,
        WIND_DIRECTION_ONB,
        WIND_SPEED_CPS,
        WIND_DIRECTION_CPS,
        WAVE_HEIGHT,
        WAVE_DIRECTION,
        WIND_SPEED_SG,
        WIND_DIRECTION_SG,
        CURRENT_SPEED,
        CURRENT_DIRECTION,
    ];

    /// Angular channels are averaged on the circle and encoded as (sin, cos) features.
    pub fn is_direction(name: &str) -> bool {
        name.contains("Direction") || name == HEADING_MAGNETIC
    }
}

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({}, {})",
                self.lat, self.lon
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::invalid(format!(
                "coordinate ({}, {}) outside lat [-90, 90] / lon [-180, 180]",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(haversine_unchecked(a, b))
}

pub(crate) fn haversine_unchecked(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Plain Euclidean distance on raw degrees, no latitude scaling.
pub fn euclidean_distance(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(euclidean_unchecked(a, b))
}

pub(crate) fn euclidean_unchecked(a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lat - b.lat).hypot(a.lon - b.lon)
}

/// Normalize an angle in degrees to `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// One timestamped onboard record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    /// UTC epoch seconds.
    pub timestamp: f64,
    pub position: GeoPoint,
    /// Speed over ground, m/s.
    pub sog: f64,
    /// Degrees in `[0, 360)`.
    pub heading: f64,
    /// Engine fuel rate, liters/hour.
    pub fuel_rate: f64,
    /// Weather (and other optional) channels keyed by channel name.
    #[serde(default)]
    pub weather: BTreeMap<String, f64>,
}

impl SamplePoint {
    pub fn new(timestamp: f64, position: GeoPoint, sog: f64, heading: f64, fuel_rate: f64) -> Self {
        SamplePoint {
            timestamp,
            position,
            sog,
            heading,
            fuel_rate,
            weather: BTreeMap::new(),
        }
    }

    pub fn with_channel(mut self, name: &str, value: f64) -> Self {
        self.weather.insert(name.to_string(), value);
        self
    }

    pub fn channel(&self, name: &str) -> Option<f64> {
        self.weather.get(name).copied()
    }

    pub fn validate(&self) -> Result<()> {
        self.position.validate()?;
        let scalars = [
            ("timestamp", self.timestamp),
            ("sog", self.sog),
            ("heading", self.heading),
            ("fuel_rate", self.fuel_rate),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
        }
        if self.sog < 0.0 || self.fuel_rate < 0.0 {
            return Err(Error::invalid("sog and fuel_rate must be non-negative"));
        }
        if let Some((k, _)) = self.weather.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("channel {k} is not finite")));
        }
        Ok(())
    }
}

/// An ordered, port-to-port sequence of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Voyage {
    pub voyage_id: String,
    samples: Vec<SamplePoint>,
    pub origin: Option<String>,
    pub destination: Option<String>,
}

impl Voyage {
    pub fn new(voyage_id: impl Into<String>, samples: Vec<SamplePoint>) -> Result<Self> {
        let voyage_id = voyage_id.into();
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "voyage {voyage_id} has {} samples, need at least 2",
                samples.len()
            )));
        }
        if samples.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::invalid(format!(
                "voyage {voyage_id} is not time-ordered"
            )));
        }
        Ok(Voyage {
            voyage_id,
            samples,
            origin: None,
            destination: None,
        })
    }

    pub fn with_ports(mut self, origin: Option<String>, destination: Option<String>) -> Self {
        self.origin = origin;
        self.destination = destination;
        self
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sog(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sog).collect()
    }

    pub fn positions(&self) -> Vec<GeoPoint> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn into_samples(self) -> Vec<SamplePoint> {
        self.samples
    }
}

/// A named polygon in (lat, lon).
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSegment {
    pub name: String,
    pub polygon: Vec<GeoPoint>,
}

impl RouteSegment {
    /// Even-odd point-in-polygon test with longitude as x and latitude as y.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let poly = &self.polygon;
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let (yi, xi) = (poly[i].lat, poly[i].lon);
            let (yj, xj) = (poly[j].lat, poly[j].lon);
            if (yi > p.lat) != (yj > p.lat) {
                let x_cross = xi + (p.lat - yi) / (yj - yi) * (xj - xi);
                if p.lon < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

#[derive(Deserialize, Serialize)]
struct SegmentRecord {
    name: String,
    polygon: Vec<[f64; 2]>,
}

/// Ordered list of named segment polygons. Order resolves overlaps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteSegmentSpec {
    segments: Vec<RouteSegment>,
}

impl RouteSegmentSpec {
    pub fn new(segments: Vec<RouteSegment>) -> Result<Self> {
        let mut names = HashSet::new();
        for seg in &segments {
            if seg.polygon.len() < 3 {
                return Err(Error::Config(format!(
                    "segment `{}` polygon needs at least 3 vertices",
                    seg.name
                )));
            }
            for v in &seg.polygon {
                v.validate()?;
            }
            if !names.insert(seg.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate segment name `{}`",
                    seg.name
                )));
            }
        }
        Ok(RouteSegmentSpec { segments })
    }

    /// Convenience constructor from `(name, [(lat, lon), ...])` pairs.
    pub fn from_polygons<S: Into<String>>(items: Vec<(S, Vec<(f64, f64)>)>) -> Result<Self> {
        let segments = items
            .into_iter()
            .map(|(name, poly)| RouteSegment {
                name: name.into(),
                polygon: poly
                    .into_iter()
                    .map(|(lat, lon)| GeoPoint { lat, lon })
                    .collect(),
            })
            .collect();
        Self::new(segments)
    }

    /// Parse `[{"name": ..., "polygon": [[lat, lon], ...]}, ...]`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let records: Vec<SegmentRecord> = serde_json::from_str(s)?;
        Self::from_polygons(
            records
                .into_iter()
                .map(|r| (r.name, r.polygon.into_iter().map(|[a, b]| (a, b)).collect()))
                .collect(),
        )
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let records: Vec<SegmentRecord> = self
            .segments
            .iter()
            .map(|s| SegmentRecord {
                name: s.name.clone(),
                polygon: s.polygon.iter().map(|p| [p.lat, p.lon]).collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)?)
    }

    pub fn segments(&self) -> &[RouteSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub(crate) fn locate(&self, p: GeoPoint) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(p))
    }
}

/// Name used when a point falls in no segment.
pub const UNASSIGNED: &str = "unassigned";

/// Name of the first segment (in spec order) containing `p`, or [`UNASSIGNED`].
pub fn assign_segment(p: GeoPoint, spec: &RouteSegmentSpec) -> Result<&str> {
    if spec.is_empty() {
        return Err(Error::Config("route segment spec is empty".into()));
    }
    p.validate()?;
    Ok(spec
        .locate(p)
        .map(|i| spec.segments[i].name.as_str())
        .unwrap_or(UNASSIGNED))
}

/// Rules for cutting a continuous sample stream into voyages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// A gap strictly larger than this (seconds) starts a new voyage.
    pub gap_threshold: f64,
    /// Minimum in-port dwell (seconds) that ends a voyage.
    pub dwell_min_secs: f64,
    /// Speed below which an in-port sample counts as dwelling (m/s).
    pub dwell_max_sog: f64,
}

impl SplitConfig {
    pub fn new(gap_threshold: f64) -> Self {
        SplitConfig {
            gap_threshold,
            dwell_min_secs: 120.0,
            dwell_max_sog: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub voyages: Vec<Voyage>,
    /// Samples from pieces too short to form a voyage (n < 2).
    pub dropped: Vec<SamplePoint>,
}

impl SplitOutcome {
    pub fn dropped_pieces(&self) -> usize {
        self.dropped.len()
    }
}

/// Tag each sample with its voyage.
///
/// A voyage ends at any timestamp gap above the threshold, and at the first
/// moving sample after an in-port dwell lasting at least `dwell_min_secs`.
/// The dwell samples stay with the voyage that arrived. Voyage ids are
/// `V0001`, `V0002`, ... in time order.
pub fn split_into_voyages(
    samples: &[SamplePoint],
    config: &SplitConfig,
    port_regions: &RouteSegmentSpec,
) -> Result<SplitOutcome> {
    if !(config.gap_threshold > 0.0) {
        return Err(Error::Config("gap_threshold must be positive".into()));
    }
    if let Some(i) = samples
        .windows(2)
        .position(|w| !(w[1].timestamp >= w[0].timestamp))
    {
        return Err(Error::invalid(format!(
            "samples not time-ordered at index {}",
            i + 1
        )));
    }

    let port_of = |s: &SamplePoint| -> Option<usize> {
        if port_regions.is_empty() {
            None
        } else {
            port_regions.locate(s.position)
        }
    };
    let dwelling = |s: &SamplePoint| s.sog < config.dwell_max_sog && port_of(s).is_some();

    let mut pieces: Vec<Vec<SamplePoint>> = Vec::new();
    let mut current: Vec<SamplePoint> = Vec::new();
    let mut dwell_start: Option<f64> = None;
    let mut dwell_done = false;

    for s in samples {
        let gap = current
            .last()
            .map(|last| s.timestamp - last.timestamp > config.gap_threshold)
            .unwrap_or(false);
        let is_dwell = dwelling(s);
        let leaves_dwell = dwell_done && !is_dwell;
        if (gap || leaves_dwell) && !current.is_empty() {
            pieces.push(std::mem::take(&mut current));
            dwell_start = None;
            dwell_done = false;
        }
        if is_dwell {
            let start = *dwell_start.get_or_insert(s.timestamp);
            if s.timestamp - start >= config.dwell_min_secs {
                dwell_done = true;
            }
        } else {
            dwell_start = None;
        }
        current.push(s.clone());
    }
    if !current.is_empty() {
        pieces.push(current);
    }

    let mut voyages = Vec::new();
    let mut dropped = Vec::new();
    for piece in pieces {
        if piece.len() < 2 {
            dropped.extend(piece);
            continue;
        }
        let origin = port_of(&piece[0]).map(|i| port_regions.segments[i].name.clone());
        let destination =
            port_of(&piece[piece.len() - 1]).map(|i| port_regions.segments[i].name.clone());
        let id = format!("V{:04}", voyages.len() + 1);
        voyages.push(Voyage::new(id, piece)?.with_ports(origin, destination));
    }
    Ok(SplitOutcome { voyages, dropped })
}
