//! Onboard CSV and weather-grid ingestion, resampling and weather attachment.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{channels, normalize_degrees, GeoPoint, SamplePoint, Voyage};

/// Column-oriented view of one CSV file. Every column has the same length.
#[derive(Debug, Clone, Default)]
pub struct RawRecordBatch {
    names: Vec<String>,
    columns: Vec<Vec<String>>,
    lookup: HashMap<String, usize>,
}

impl RawRecordBatch {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::EmptyInput("CSV has no header row".into()));
        }
        let names: Vec<String> = headers.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for record in rdr.records() {
            let record = record?;
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                col.push(field.to_string());
            }
        }
        let lookup = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_ascii_lowercase(), i))
            .collect();
        Ok(RawRecordBatch {
            names,
            columns,
            lookup,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    /// Case-insensitive column lookup.
    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.lookup
            .get(&name.to_ascii_lowercase())
            .map(|&i| self.columns[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parse epoch seconds or an ISO-8601 / RFC 3339 UTC timestamp.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 / 1e6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 / 1e6);
        }
    }
    None
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone)]
pub struct OnboardParse {
    pub samples: Vec<SamplePoint>,
    /// Rows dropped because a required field was missing or invalid.
    pub skipped: usize,
}

/// Parse an onboard CSV file into time-sorted samples.
pub fn parse_onboard_csv(path: &Path) -> Result<OnboardParse> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_onboard_reader(file)
}

pub fn parse_onboard_reader<R: Read>(reader: R) -> Result<OnboardParse> {
    let batch = RawRecordBatch::from_reader(reader)?;
    onboard_from_batch(&batch)
}

pub fn onboard_from_batch(batch: &RawRecordBatch) -> Result<OnboardParse> {
    let mut required = Vec::with_capacity(channels::REQUIRED.len());
    for name in channels::REQUIRED {
        let col = batch.column(name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })?;
        required.push(col);
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("onboard CSV has no data rows".into()));
    }
    let optional: Vec<(&str, &[String])> = channels::OPTIONAL
        .iter()
        .filter_map(|&name| batch.column(name).map(|c| (name, c)))
        .collect();

    let mut samples = Vec::with_capacity(batch.len());
    let mut skipped = 0;
    for row in 0..batch.len() {
        let ts = parse_timestamp(&required[0][row]);
        let nums: Option<Vec<f64>> = required[1..]
            .iter()
            .map(|c| parse_finite(&c[row]))
            .collect();
        let (Some(ts), Some(nums)) = (ts, nums) else {
            skipped += 1;
            continue;
        };
        let (lat, lon, sog, heading, fuel) = (nums[0], nums[1], nums[2], nums[3], nums[4]);
        let Ok(position) = GeoPoint::new(lat, lon) else {
            skipped += 1;
            continue;
        };
        if sog < 0.0 || fuel < 0.0 {
            skipped += 1;
            continue;
        }
        let mut s = SamplePoint::new(ts, position, sog, normalize_degrees(heading), fuel);
        for (name, col) in &optional {
            if let Some(v) = parse_finite(&col[row]) {
                let v = if channels::is_direction(name) {
                    normalize_degrees(v)
                } else {
                    v
                };
                s.weather.insert(name.to_string(), v);
            }
        }
        samples.push(s);
    }
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(OnboardParse { samples, skipped })
}

/// Dense (time, lat, lon) grid of one weather variable.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherGrid {
    pub variable: String,
    times: Vec<f64>,
    lats: Vec<f64>,
    lons: Vec<f64>,
    values: Vec<Option<f64>>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::invalid(format!(
            "{name} axis needs at least 2 entries"
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!(
            "{name} axis must be finite and strictly increasing"
        )));
    }
    Ok(())
}

impl WeatherGrid {
    /// `values` is indexed `(time, lat, lon)` in row-major order.
    pub fn new(
        variable: impl Into<String>,
        times: Vec<f64>,
        lats: Vec<f64>,
        lons: Vec<f64>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        check_axis("time", &times)?;
        check_axis("lat", &lats)?;
        check_axis("lon", &lons)?;
        if values.len() != times.len() * lats.len() * lons.len() {
            return Err(Error::invalid("grid value count does not match axis sizes"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite or missing"));
        }
        Ok(WeatherGrid {
            variable: variable.into(),
            times,
            lats,
            lons,
            values,
        })
    }

    /// Sample `f(t, lat, lon)` on every lattice node.
    pub fn from_fn(
        variable: impl Into<String>,
        times: Vec<f64>,
        lats: Vec<f64>,
        lons: Vec<f64>,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * lats.len() * lons.len());
        for &t in &times {
            for &la in &lats {
                for &lo in &lons {
                    values.push(Some(f(t, la, lo)));
                }
            }
        }
        Self::new(variable, times, lats, lons, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    fn index(&self, ti: usize, yi: usize, xi: usize) -> usize {
        (ti * self.lats.len() + yi) * self.lons.len() + xi
    }

    pub fn value(&self, ti: usize, yi: usize, xi: usize) -> Option<f64> {
        self.values[self.index(ti, yi, xi)]
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

#[derive(Debug, Deserialize)]
struct GridRow {
    time: f64,
    lat: f64,
    lon: f64,
    value: Option<f64>,
}

/// Parse a long-format `time,lat,lon,value` CSV into a dense grid.
pub fn parse_weather_grid(path: &Path, variable: &str) -> Result<WeatherGrid> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_weather_reader(file, variable)
}

pub fn parse_weather_reader<R: Read>(reader: R, variable: &str) -> Result<WeatherGrid> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for row in rdr.deserialize::<GridRow>() {
        let row = row?;
        if !row.time.is_finite() || !row.lat.is_finite() || !row.lon.is_finite() {
            return Err(Error::invalid("non-finite grid coordinate"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "weather grid `{variable}` has no rows"
        )));
    }

    let axis = |f: fn(&GridRow) -> f64| {
        let mut a: Vec<f64> = rows.iter().map(f).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    };
    let times = axis(|r| r.time);
    let lats = axis(|r| r.lat);
    let lons = axis(|r| r.lon);
    let find = |a: &[f64], v: f64| a.binary_search_by(|x| x.total_cmp(&v)).expect("axis value");

    let mut values: Vec<Option<f64>> = vec![None; times.len() * lats.len() * lons.len()];
    let mut seen = vec![false; values.len()];
    for r in &rows {
        let idx = (find(&times, r.time) * lats.len() + find(&lats, r.lat)) * lons.len()
            + find(&lons, r.lon);
        let v = r.value.filter(|v| v.is_finite());
        if seen[idx] {
            if values[idx] != v {
                return Err(Error::invalid(format!(
                    "conflicting values at (time={}, lat={}, lon={})",
                    r.time, r.lat, r.lon
                )));
            }
            continue;
        }
        seen[idx] = true;
        values[idx] = v;
    }
    WeatherGrid::new(variable, times, lats, lons, values)
}

/// Load every `*.csv` in `dir` as a grid named after its file stem, sorted by name.
pub fn load_weather_dir(dir: &Path) -> Result<Vec<WeatherGrid>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            parse_weather_grid(p, stem)
        })
        .collect()
}

fn bracket(axis: &[f64], x: f64, name: &str) -> Result<(usize, f64)> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfDomain(format!(
            "{name} {x} outside [{lo}, {hi}]"
        )));
    }
    let i = axis
        .partition_point(|&a| a <= x)
        .saturating_sub(1)
        .min(axis.len() - 2);
    let frac = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Ok((i, frac))
}

/// Trilinear blend over the enclosing (time, lat, lon) cell.
///
/// Corners carrying zero weight may be missing; any weighted missing corner is
/// a [`Error::MissingData`].
pub fn trilinear_interpolate(grid: &WeatherGrid, t: f64, p: GeoPoint) -> Result<f64> {
    let (ti, ft) = bracket(&grid.times, t, "time")?;
    let (yi, fy) = bracket(&grid.lats, p.lat, "lat")?;
    let (xi, fx) = bracket(&grid.lons, p.lon, "lon")?;

    let corner = |dt: usize, dy: usize, dx: usize| {
        grid.value(ti + dt, yi + dy, xi + dx).ok_or_else(|| {
            Error::MissingData(format!(
                "{} missing at cell ({}, {}, {})",
                grid.variable,
                ti + dt,
                yi + dy,
                xi + dx
            ))
        })
    };
    let along_lon = |dt, dy| lerp(|| corner(dt, dy, 0), || corner(dt, dy, 1), fx);
    let along_lat = |dt| lerp(|| along_lon(dt, 0), || along_lon(dt, 1), fy);
    lerp(|| along_lat(0), || along_lat(1), ft)
}

/// `a + (b - a) f`, evaluating only the endpoints that carry weight.
fn lerp(a: impl Fn() -> Result<f64>, b: impl Fn() -> Result<f64>, f: f64) -> Result<f64> {
    if f == 0.0 {
        a()
    } else if f == 1.0 {
        b()
    } else {
        let (a, b) = (a()?, b()?);
        Ok(a + (b - a) * f)
    }
}

#[derive(Default)]
struct BinAccumulator {
    n: usize,
    lat: f64,
    lon: f64,
    sog: f64,
    fuel: f64,
    heading: (f64, f64),
    channels: BTreeMap<String, (usize, f64, f64, f64)>,
}

impl BinAccumulator {
    fn add(&mut self, s: &SamplePoint) {
        self.n += 1;
        self.lat += s.position.lat;
        self.lon += s.position.lon;
        self.sog += s.sog;
        self.fuel += s.fuel_rate;
        let h = s.heading.to_radians();
        self.heading.0 += h.sin();
        self.heading.1 += h.cos();
        for (name, &v) in &s.weather {
            let e = self.channels.entry(name.clone()).or_default();
            e.0 += 1;
            e.1 += v;
            let r = v.to_radians();
            e.2 += r.sin();
            e.3 += r.cos();
        }
    }

    fn finish(self, timestamp: f64) -> SamplePoint {
        let n = self.n as f64;
        let mut s = SamplePoint::new(
            timestamp,
            GeoPoint {
                lat: self.lat / n,
                lon: self.lon / n,
            },
            self.sog / n,
            circular_mean(self.heading.0, self.heading.1),
            self.fuel / n,
        );
        for (name, (count, sum, sin, cos)) in self.channels {
            let v = if channels::is_direction(&name) {
                circular_mean(sin, cos)
            } else {
                sum / count as f64
            };
            s.weather.insert(name, v);
        }
        s
    }
}

/// Mean direction in degrees `[0, 360)` from summed unit-vector components.
pub fn circular_mean(sin_sum: f64, cos_sum: f64) -> f64 {
    if sin_sum.abs() < 1e-12 && cos_sum.abs() < 1e-12 {
        return 0.0;
    }
    normalize_degrees(sin_sum.atan2(cos_sum).to_degrees())
}

/// Bin-average a voyage onto `period`-second windows anchored at its first sample.
pub fn resample_voyage(v: &Voyage, period: f64) -> Result<Voyage> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Config(format!(
            "resample period must be positive, got {period}"
        )));
    }
    let t0 = v.samples()[0].timestamp;
    let mut bins: Vec<(i64, BinAccumulator)> = Vec::new();
    for s in v.samples() {
        let bin = ((s.timestamp - t0) / period).floor() as i64;
        match bins.last_mut() {
            Some((b, acc)) if *b == bin => acc.add(s),
            _ => {
                let mut acc = BinAccumulator::default();
                acc.add(s);
                bins.push((bin, acc));
            }
        }
    }
    let samples: Vec<SamplePoint> = bins
        .into_iter()
        .map(|(b, acc)| acc.finish(t0 + b as f64 * period))
        .collect();
    Ok(Voyage::new(v.voyage_id.clone(), samples)?
        .with_ports(v.origin.clone(), v.destination.clone()))
}

#[derive(Debug, Clone)]
pub struct WeatherAttachment {
    /// `None` when fewer than two samples survived.
    pub voyage: Option<Voyage>,
    pub dropped: usize,
}

/// Set every grid variable on every sample; samples that cannot be interpolated are dropped.
pub fn attach_weather(v: &Voyage, grids: &[WeatherGrid]) -> WeatherAttachment {
    let results: Vec<Option<SamplePoint>> = v
        .samples()
        .par_iter()
        .map(|s| {
            let mut out = s.clone();
            for g in grids {
                let value = trilinear_interpolate(g, s.timestamp, s.position).ok()?;
                out.weather.insert(g.variable.clone(), value);
            }
            Some(out)
        })
        .collect();
    let total = results.len();
    let kept: Vec<SamplePoint> = results.into_iter().flatten().collect();
    let dropped = total - kept.len();
    let voyage = Voyage::new(v.voyage_id.clone(), kept)
        .ok()
        .map(|nv| nv.with_ports(v.origin.clone(), v.destination.clone()));
    WeatherAttachment { voyage, dropped }
}

/// On-disk collection of processed voyages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoyageStore {
    pub voyages: Vec<Voyage>,
}

impl VoyageStore {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, id: &str) -> Option<&Voyage> {
        self.voyages.iter().find(|v| v.voyage_id == id)
    }
}
