//! Seeded synthetic fleet: branching routes, Markov weather and a monotone
//! fuel model. Stands in for proprietary vessel logs at desk scale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{channels, normalize_degrees, GeoPoint, RouteSegmentSpec, SamplePoint, Voyage};
use crate::ingest::WeatherGrid;
use crate::path_id::PathLabeling;

/// Meters per degree of arc on the mean-radius sphere.
pub const METERS_PER_DEGREE: f64 = crate::geo::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: String,
    /// Polyline vertices as `[lat, lon]`.
    pub centerline: Vec<[f64; 2]>,
}

/// Weather and speed behaviour of one hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRegime {
    pub wind_mean: f64,
    pub wind_std: f64,
    pub wave_mean: f64,
    pub wave_std: f64,
    pub sog_mean: f64,
    pub sog_std: f64,
    /// Mean time spent in the state before switching, seconds.
    pub dwell_secs: f64,
}

/// `fuel_rate = a + b * sog^2 + c * wind` (L/h, sog in m/s, wind in m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelPhysics {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FuelPhysics {
    pub fn rate(&self, sog: f64, wind: f64) -> f64 {
        self.a + self.b * sog * sog + self.c * wind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDef {
    pub name: String,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFleetSpec {
    pub branches: Vec<Branch>,
    pub voyages_per_branch: usize,
    /// Positional noise, degrees.
    pub noise_std: f64,
    /// Calm, moderate and rough, in that order.
    pub regimes: Vec<WeatherRegime>,
    pub physics: FuelPhysics,
    pub sample_period: f64,
    /// Each voyage sails at a fixed pace factor drawn from `[1 - s, 1 + s]`.
    pub pace_spread: f64,
    /// Idle time between consecutive voyages, seconds.
    pub voyage_gap: f64,
    /// Epoch seconds of the first sample.
    pub start_time: f64,
    pub segments: Vec<SegmentDef>,
    pub grid_spacing_deg: f64,
    pub grid_period_secs: f64,
    pub seed: u64,
}

fn rect(name: &str, lat0: f64, lat1: f64, lon0: f64, lon1: f64) -> SegmentDef {
    SegmentDef {
        name: name.into(),
        polygon: vec![[lat0, lon0], [lat0, lon1], [lat1, lon1], [lat1, lon0]],
    }
}

impl Default for SyntheticFleetSpec {
    /// Three branches leaving a common port, running 0.5 degrees apart and
    /// rejoining at the far port.
    fn default() -> Self {
        let (lat0, lon0) = (56.0, 10.0);
        let branch = |label: &str, off: f64| Branch {
            label: label.into(),
            centerline: vec![
                [lat0, lon0],
                [lat0 + off, lon0 + 0.5],
                [lat0 + off, lon0 + 1.5],
                [lat0, lon0 + 2.0],
            ],
        };
        SyntheticFleetSpec {
            branches: vec![
                branch("North", 0.5),
                branch("Middle", 0.0),
                branch("South", -0.5),
            ],
            voyages_per_branch: 40,
            noise_std: 0.05,
            regimes: vec![
                WeatherRegime {
                    wind_mean: 4.0,
                    wind_std: 1.5,
                    wave_mean: 0.5,
                    wave_std: 0.2,
                    sog_mean: 7.5,
                    sog_std: 0.5,
                    dwell_secs: 4.0 * 3600.0,
                },
                WeatherRegime {
                    wind_mean: 9.0,
                    wind_std: 1.5,
                    wave_mean: 1.3,
                    wave_std: 0.3,
                    sog_mean: 6.5,
                    sog_std: 0.5,
                    dwell_secs: 3.0 * 3600.0,
                },
                WeatherRegime {
                    wind_mean: 15.0,
                    wind_std: 2.0,
                    wave_mean: 2.6,
                    wave_std: 0.4,
                    sog_mean: 5.0,
                    sog_std: 0.5,
                    dwell_secs: 2.0 * 3600.0,
                },
            ],
            physics: FuelPhysics {
                a: 400.0,
                b: 4.0,
                c: 6.0,
            },
            sample_period: 120.0,
            pace_spread: 0.3,
            voyage_gap: 1800.0,
            start_time: 1_700_000_000.0,
            segments: vec![
                rect("west", lat0 - 0.7, lat0 + 0.7, lon0 - 0.1, lon0 + 0.5),
                rect("middle", lat0 - 0.7, lat0 + 0.7, lon0 + 0.5, lon0 + 1.5),
                rect("east", lat0 - 0.7, lat0 + 0.7, lon0 + 1.5, lon0 + 2.1),
            ],
            grid_spacing_deg: 0.5,
            grid_period_secs: 3600.0,
            seed: 7,
        }
    }
}

impl SyntheticFleetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Config(
                "synthetic fleet needs at least one branch".into(),
            ));
        }
        for b in &self.branches {
            if b.centerline.len() < 2 {
                return Err(Error::Config(format!(
                    "branch `{}` centerline needs at least 2 points",
                    b.label
                )));
            }
            if polyline_length(&b.centerline) <= 0.0 {
                return Err(Error::Config(format!(
                    "branch `{}` has zero length",
                    b.label
                )));
            }
        }
        if self.regimes.len() != 3 {
            return Err(Error::Config(
                "exactly three weather regimes are required".into(),
            ));
        }
        let p = self.physics;
        if !(p.a >= 0.0 && p.b >= 0.0 && p.c >= 0.0) {
            return Err(Error::Config(
                "fuel physics coefficients must be non-negative".into(),
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise std must be non-negative".into()));
        }
        if !(self.sample_period > 0.0 && self.grid_spacing_deg > 0.0 && self.grid_period_secs > 0.0)
        {
            return Err(Error::Config(
                "periods and grid spacing must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.pace_spread) {
            return Err(Error::Config("pace spread must lie in [0, 1)".into()));
        }
        if !(self.voyage_gap > self.sample_period) {
            return Err(Error::Config(
                "voyage gap must exceed the sample period".into(),
            ));
        }
        for r in &self.regimes {
            if !(r.dwell_secs >= self.sample_period)
                || r.wind_std < 0.0
                || r.wave_std < 0.0
                || r.sog_std < 0.0
            {
                return Err(Error::Config(
                    "regime dwell must cover a sample and stds be non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn segment_spec(&self) -> Result<RouteSegmentSpec> {
        RouteSegmentSpec::from_polygons(
            self.segments
                .iter()
                .map(|s| {
                    (
                        s.name.clone(),
                        s.polygon.iter().map(|p| (p[0], p[1])).collect(),
                    )
                })
                .collect(),
        )
    }
}

fn polyline_length(line: &[[f64; 2]]) -> f64 {
    line.windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum()
}

/// Point at arc length `s` along the polyline and the local bearing in degrees.
fn along(line: &[[f64; 2]], mut s: f64) -> ([f64; 2], f64) {
    let last = line.len() - 2;
    for (i, w) in line.windows(2).enumerate() {
        let (dlat, dlon) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        let len = (dlat * dlat + dlon * dlon).sqrt();
        if s <= len || i == last {
            let f = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            let bearing = normalize_degrees(dlon.atan2(dlat).to_degrees());
            return ([w[0][0] + dlat * f, w[0][1] + dlon * f], bearing);
        }
        s -= len;
    }
    unreachable!("polyline has at least two vertices")
}

#[derive(Debug, Clone)]
pub struct SyntheticFleet {
    /// The raw onboard stream, all voyages back to back.
    pub voyages: Vec<Voyage>,
    /// Hidden weather state of every sample, per voyage (0 calm .. 2 rough).
    pub states: Vec<Vec<usize>>,
    pub labels: PathLabeling,
    pub grids: Vec<WeatherGrid>,
    pub segments: RouteSegmentSpec,
}

struct WeatherChain {
    state: usize,
}

impl WeatherChain {
    fn step(&mut self, rng: &mut ChaCha8Rng, regimes: &[WeatherRegime], dt: f64) {
        let leave = (dt / regimes[self.state].dwell_secs).min(1.0);
        if rng.random::<f64>() < leave {
            let shift = rng.random_range(1..3);
            self.state = (self.state + shift) % 3;
        }
    }
}

fn normal(mean: f64, std: f64) -> Normal<f64> {
    Normal::new(mean, std).expect("validated std")
}

/// Generate the fleet. Voyage `i` follows branch `i % branches`, alternating
/// direction, and is named `V0001`, `V0002`, ... in time order.
pub fn generate_fleet(spec: &SyntheticFleetSpec) -> Result<SyntheticFleet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dt = spec.sample_period;
    let mut chain = WeatherChain { state: 0 };
    let mut t = spec.start_time;
    let n_total = spec.voyages_per_branch * spec.branches.len();
    let mut voyages = Vec::with_capacity(n_total);
    let mut states = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    let mut hourly: Vec<(f64, usize)> = Vec::new();
    let pos_noise = normal(0.0, spec.noise_std);
    let unit = normal(0.0, 1.0);

    for i in 0..n_total {
        let branch = &spec.branches[i % spec.branches.len()];
        let mut line = branch.centerline.clone();
        if (i / spec.branches.len()) % 2 == 1 {
            line.reverse();
        }
        let length = polyline_length(&line);
        let id = format!("V{:04}", i + 1);
        let pace = 1.0 + spec.pace_spread * rng.random_range(-1.0..=1.0);
        let mut s = 0.0;
        let mut samples = Vec::new();
        let mut vs = Vec::new();
        loop {
            let r = spec.regimes[chain.state];
            let sog = (pace * (r.sog_mean + r.sog_std * unit.sample(&mut rng))).max(1.0);
            let wind = (r.wind_mean + r.wind_std * unit.sample(&mut rng)).max(0.0);
            let wave = (r.wave_mean + r.wave_std * unit.sample(&mut rng)).max(0.0);
            let (c, bearing) = along(&line, s);
            let pos = GeoPoint {
                lat: c[0] + pos_noise.sample(&mut rng),
                lon: c[1] + pos_noise.sample(&mut rng),
            };
            let heading = normalize_degrees(bearing + 2.0 * unit.sample(&mut rng));
            let wind_dir = 240.0 + rng.random_range(-30.0..30.0);
            let wave_dir = 220.0 + rng.random_range(-30.0..30.0);
            samples.push(
                SamplePoint::new(t, pos, sog, heading, spec.physics.rate(sog, wind))
                    .with_channel(channels::WIND_SPEED_ONB, wind)
                    .with_channel(channels::WIND_DIRECTION_ONB, wind_dir)
                    .with_channel(channels::WAVE_HEIGHT, wave)
                    .with_channel(channels::WAVE_DIRECTION, wave_dir),
            );
            vs.push(chain.state);
            hourly.push((t, chain.state));
            if s >= length {
                break;
            }
            s = (s + sog * dt / METERS_PER_DEGREE).min(length);
            t += dt;
            chain.step(&mut rng, &spec.regimes, dt);
        }
        voyages.push(Voyage::new(id.clone(), samples)?);
        states.push(vs);
        labels.push((id, branch.label.clone()));
        // The weather keeps evolving while in port.
        let idle_steps = (spec.voyage_gap / dt).round() as usize;
        for k in 0..idle_steps {
            chain.step(&mut rng, &spec.regimes, dt);
            hourly.push((t + (k + 1) as f64 * dt, chain.state));
        }
        t += spec.voyage_gap;
    }

    let grids = build_grids(spec, &voyages, &hourly)?;
    Ok(SyntheticFleet {
        voyages,
        states,
        labels: PathLabeling::from_pairs(labels)?,
        grids,
        segments: spec.segment_spec()?,
    })
}

/// External wind and current fields on a regular lattice covering the fleet.
fn build_grids(
    spec: &SyntheticFleetSpec,
    voyages: &[Voyage],
    states: &[(f64, usize)],
) -> Result<Vec<WeatherGrid>> {
    let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for v in voyages {
        for s in v.samples() {
            lat_lo = lat_lo.min(s.position.lat);
            lat_hi = lat_hi.max(s.position.lat);
            lon_lo = lon_lo.min(s.position.lon);
            lon_hi = lon_hi.max(s.position.lon);
        }
    }
    let step = spec.grid_spacing_deg;
    let axis = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
        let start = (lo / step).floor() - 1.0;
        let end = (hi / step).ceil() + 1.0;
        (start as i64..=end as i64)
            .map(|k| k as f64 * step)
            .collect()
    };
    let lats = axis(lat_lo, lat_hi, step);
    let lons = axis(lon_lo, lon_hi, step);
    let t0 = states.first().map_or(spec.start_time, |s| s.0);
    let t1 = states.last().map_or(spec.start_time, |s| s.0);
    let times = axis(t0, t1, spec.grid_period_secs);
    let state_at = |t: f64| {
        let i = states.partition_point(|s| s.0 <= t).saturating_sub(1);
        states.get(i).map_or(0, |s| s.1)
    };
    let wind_at = |t: f64| spec.regimes[state_at(t)].wind_mean;
    Ok(vec![
        WeatherGrid::from_fn(
            channels::WIND_SPEED_CPS,
            times.clone(),
            lats.clone(),
            lons.clone(),
            |t, la, lo| wind_at(t) + 0.5 * (la * 3.0).sin() + 0.3 * (lo * 2.0).cos(),
        )?,
        WeatherGrid::from_fn(
            channels::WIND_DIRECTION_CPS,
            times.clone(),
            lats.clone(),
            lons.clone(),
            |t, la, _| 240.0 + 20.0 * ((t - t0) / 86_400.0).sin() + 5.0 * (la - 56.0),
        )?,
        WeatherGrid::from_fn(
            channels::CURRENT_SPEED,
            times.clone(),
            lats.clone(),
            lons.clone(),
            |t, la, lo| 0.3 + 0.2 * ((t - t0) / 44_700.0).sin().abs() + 0.05 * (la + lo).cos(),
        )?,
        WeatherGrid::from_fn(
            channels::CURRENT_DIRECTION,
            times,
            lats,
            lons,
            |t, _, lo| 230.0 + 30.0 * ((t - t0) / 44_700.0).cos() + 2.0 * lo,
        )?,
    ])
}

fn fmt_time(t: f64) -> String {
    chrono::DateTime::from_timestamp(t.round() as i64, 0)
        .map(|d| d.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .unwrap_or_else(|| format!("{t}"))
}

/// Onboard CSV of all voyages with RFC 3339 timestamps.
pub fn onboard_csv(voyages: &[Voyage]) -> String {
    let extra = [
        channels::WIND_SPEED_ONB,
        channels::WIND_DIRECTION_ONB,
        channels::WAVE_HEIGHT,
        channels::WAVE_DIRECTION,
    ];
    let mut out = String::new();
    let mut header: Vec<&str> = channels::REQUIRED.to_vec();
    header.extend(extra);
    out.push_str(&header.join(","));
    out.push('\n');
    for v in voyages {
        for s in v.samples() {
            let _ = write!(
                out,
                "{},{:.6},{:.6},{:.4},{:.2},{:.3}",
                fmt_time(s.timestamp),
                s.position.lat,
                s.position.lon,
                s.sog,
                s.heading,
                s.fuel_rate
            );
            for name in extra {
                match s.channel(name) {
                    Some(x) => {
                        let _ = write!(out, ",{x:.3}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Long-format `time,lat,lon,value` CSV of one grid.
pub fn grid_csv(grid: &WeatherGrid) -> String {
    let mut out = String::from("time,lat,lon,value\n");
    for (ti, t) in grid.times().iter().enumerate() {
        for (yi, la) in grid.lats().iter().enumerate() {
            for (xi, lo) in grid.lons().iter().enumerate() {
                let _ = match grid.value(ti, yi, xi) {
                    Some(v) => writeln!(out, "{t},{la},{lo},{v:.4}"),
                    None => writeln!(out, "{t},{la},{lo},"),
                };
            }
        }
    }
    out
}

pub fn labels_csv(labels: &PathLabeling) -> String {
    let mut out = String::from("voyage_id,label\n");
    for (id, l) in labels.iter() {
        let _ = writeln!(out, "{id},{l}");
    }
    out
}

/// Paths of the files written by [`write_fleet`], relative to its directory.
pub const ONBOARD_DIR: &str = "onboard";
pub const WEATHER_DIR: &str = "weather";
pub const SEGMENTS_FILE: &str = "segments.json";
pub const LABELS_FILE: &str = "labels.csv";

/// Write onboard, weather, segment and label files under `dir`.
pub fn write_fleet(fleet: &SyntheticFleet, dir: &FsPath) -> Result<()> {
    let write = |path: &FsPath, text: &str| fs::write(path, text).map_err(|e| Error::io(path, e));
    let mkdir = |path: &FsPath| fs::create_dir_all(path).map_err(|e| Error::io(path, e));
    mkdir(&dir.join(ONBOARD_DIR))?;
    mkdir(&dir.join(WEATHER_DIR))?;
    write(
        &dir.join(ONBOARD_DIR).join("onboard.csv"),
        &onboard_csv(&fleet.voyages),
    )?;
    for g in &fleet.grids {
        write(
            &dir.join(WEATHER_DIR).join(format!("{}.csv", g.variable)),
            &grid_csv(g),
        )?;
    }
    write(&dir.join(SEGMENTS_FILE), &fleet.segments.to_json_string()?)?;
    write(&dir.join(LABELS_FILE), &labels_csv(&fleet.labels))
}
