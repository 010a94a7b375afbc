//! Vehicle trace ingestion and synthesis.
//!
//! The on-disk format is CSV with header `vehicle_id,timestamp_s,lat,lon,occupied`,
//! one report per row, `occupied` in {0,1}. Parsing groups rows into
//! per-vehicle trajectories, collapses duplicate (vehicle, timestamp)
//! rows to the last occurrence, sorts by time and shifts timestamps so
//! the earliest report in the dataset is t = 0.

use crate::error::{Error, Result};
use crate::geo::{meters_per_degree, GeoArea, GeoPoint, GeoRect};
use crate::rng::{derive_seed, seeded_rng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const TRACE_HEADER: &str = "vehicle_id,timestamp_s,lat,lon,occupied";

/// Sampling cadence: occupied vehicles report every second, unoccupied
/// every 15 seconds.
pub const OCCUPIED_SAMPLE_S: u64 = 1;
pub const FREE_SAMPLE_S: u64 = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub pos: GeoPoint,
    pub occupied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub points: Vec<TracePoint>,
}

impl Trajectory {
    pub fn new(vehicle_id: String, points: Vec<TracePoint>) -> Result<Self> {
        let t = Trajectory { vehicle_id, points };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vehicle_id.is_empty() || self.vehicle_id.contains([',', '\n', '\r']) {
            return Err(Error::InvalidInput(format!(
                "bad vehicle id {:?}",
                self.vehicle_id
            )));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidInput(format!(
                "trajectory {} has no points",
                self.vehicle_id
            )));
        }
        for p in &self.points {
            p.pos.validate()?;
        }
        for w in self.points.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::InvalidInput(format!(
                    "trajectory {} timestamps not strictly increasing at t={}",
                    self.vehicle_id, w[1].t
                )));
            }
        }
        Ok(())
    }

    pub fn start_t(&self) -> u64 {
        self.points[0].t
    }

    pub fn end_t(&self) -> u64 {
        self.points[self.points.len() - 1].t
    }
}

/// Parses trace CSV. Returns trajectories sorted by vehicle id, each
/// sorted by time, timestamps shifted so the dataset minimum is 0.
/// Empty input (or a bare header) yields an empty list.
pub fn parse_traces<R: Read>(reader: R) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(rec) => rec.map_err(|e| Error::TraceParse { line: 1, msg: e.to_string() })?,
    };
    let header_joined = header.iter().map(str::trim).collect::<Vec<_>>().join(",");
    if header_joined != TRACE_HEADER {
        return Err(Error::TraceParse {
            line: 1,
            msg: format!("expected header {TRACE_HEADER:?}, got {header_joined:?}"),
        });
    }

    let mut by_vehicle: BTreeMap<String, Vec<TracePoint>> = BTreeMap::new();
    for rec in rows {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::TraceParse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fail = |msg: String| Error::TraceParse { line, msg };

        if rec.len() != 5 {
            return Err(fail(format!("expected 5 fields, got {}", rec.len())));
        }
        let vehicle_id = rec[0].trim().to_string();
        if vehicle_id.is_empty() {
            return Err(fail("empty vehicle_id".into()));
        }
        let t: u64 = rec[1]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad timestamp_s {:?}: {e}", &rec[1])))?;
        let lat: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad lat {:?}: {e}", &rec[2])))?;
        let lon: f64 = rec[3]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad lon {:?}: {e}", &rec[3])))?;
        let pos = GeoPoint::new(lat, lon)
            .map_err(|e| fail(e.to_string()))?;
        let occupied = match rec[4].trim() {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("occupied must be 0 or 1, got {other:?}"))),
        };
        by_vehicle
            .entry(vehicle_id)
            .or_default()
            .push(TracePoint { t, pos, occupied });
    }

    let min_t = by_vehicle
        .values()
        .flatten()
        .map(|p| p.t)
        .min()
        .unwrap_or(0);

    let mut out = Vec::with_capacity(by_vehicle.len());
    for (vehicle_id, mut points) in by_vehicle {
        points.sort_by_key(|p| p.t);
        // same (vehicle, timestamp): the last occurrence in file order
        // wins; stable sort keeps file order within equal keys.
        let mut dedup: Vec<TracePoint> = Vec::with_capacity(points.len());
        for p in points {
            match dedup.last_mut() {
                Some(last) if last.t == p.t => *last = p,
                _ => dedup.push(p),
            }
        }
        for p in &mut dedup {
            p.t -= min_t;
        }
        out.push(Trajectory { vehicle_id, points: dedup });
    }
    Ok(out)
}

pub fn parse_traces_path<P: AsRef<Path>>(path: P) -> Result<Vec<Trajectory>> {
    parse_traces(std::fs::File::open(&path).map_err(Error::file(&path))?)
}

/// Inverse of [`parse_traces`] for canonical trajectory lists (sorted by
/// vehicle id, earliest timestamp 0): write-then-parse is identity.
pub fn write_traces<W: Write>(trajectories: &[Trajectory], mut w: W) -> Result<()> {
    for t in trajectories {
        t.validate()?;
    }
    writeln!(w, "{TRACE_HEADER}")?;
    for traj in trajectories {
        for p in &traj.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                traj.vehicle_id,
                p.t,
                p.pos.lat,
                p.pos.lon,
                u8::from(p.occupied)
            )?;
        }
    }
    Ok(())
}

pub fn write_traces_path<P: AsRef<Path>>(trajectories: &[Trajectory], path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(Error::file(&path))?);
    write_traces(trajectories, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Synthetic-fleet settings. Vehicles drive waypoint to waypoint on a
/// street grid inside `bounds`; occupancy follows a two-state Markov
/// process whose transition probabilities are per second of elapsed
/// time (a 15 s reporting gap compounds them).
/// How trip start times spread over the start window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartProfile {
    /// Uniform over [0, start_window_s].
    #[default]
    Uniform,
    /// Density proportional to sin^2(pi * u): quiet edges, busy middle.
    /// Gives the fleet a rush-hour shape, so service load and costs
    /// genuinely vary by time of day.
    MiddayPeak,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceGenConfig {
    pub bounds: GeoRect,
    /// Street grid pitch in metres.
    pub grid_spacing_m: f64,
    pub vehicle_count: usize,
    /// Seconds each vehicle keeps reporting after its first sample.
    pub duration_s: u64,
    /// Vehicle start times are drawn uniformly from [0, start_window_s];
    /// 0 starts the whole fleet together.
    pub start_window_s: u64,
    pub start_profile: StartProfile,
    pub mean_speed_mps: f64,
    pub max_speed_mps: f64,
    /// When set, waypoints are drawn from inside this area with
    /// probability `urban_bias`, concentrating traffic there.
    pub urban: Option<GeoArea>,
    pub urban_bias: f64,
    /// Per-second probability an occupied taxi drops its passenger.
    pub p_occupied_to_free: f64,
    /// Per-second probability a free taxi picks a passenger up.
    pub p_free_to_occupied: f64,
    pub initial_occupied_prob: f64,
}

impl Default for TraceGenConfig {
    fn default() -> Self {
        TraceGenConfig {
            bounds: GeoRect {
                min_lat: 31.200,
                min_lon: 121.400,
                max_lat: 31.254,
                max_lon: 121.463,
            },
            grid_spacing_m: 200.0,
            vehicle_count: 20,
            duration_s: 1500,
            start_window_s: 36_000,
            start_profile: StartProfile::Uniform,
            mean_speed_mps: 10.0,
            max_speed_mps: 15.0,
            urban: None,
            urban_bias: 0.0,
            p_occupied_to_free: 0.002,
            p_free_to_occupied: 0.004,
            // stationary point of the default transition rates
            initial_occupied_prob: 2.0 / 3.0,
        }
    }
}

impl TraceGenConfig {
    pub fn validate(&self) -> Result<()> {
        GeoRect::new(
            self.bounds.min_lat,
            self.bounds.min_lon,
            self.bounds.max_lat,
            self.bounds.max_lon,
        )?;
        if self.vehicle_count == 0 {
            return Err(Error::InvalidInput("vehicle_count must be positive".into()));
        }
        if self.duration_s == 0 {
            return Err(Error::InvalidInput("duration_s must be positive".into()));
        }
        if !(self.grid_spacing_m.is_finite() && self.grid_spacing_m > 0.0) {
            return Err(Error::InvalidInput("grid_spacing_m must be positive".into()));
        }
        if !(self.mean_speed_mps > 0.0 && self.max_speed_mps >= self.mean_speed_mps) {
            return Err(Error::InvalidInput(format!(
                "speeds must satisfy 0 < mean ({}) <= max ({})",
                self.mean_speed_mps, self.max_speed_mps
            )));
        }
        for (name, p) in [
            ("p_occupied_to_free", self.p_occupied_to_free),
            ("p_free_to_occupied", self.p_free_to_occupied),
            ("initial_occupied_prob", self.initial_occupied_prob),
            ("urban_bias", self.urban_bias),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

struct GridMap {
    origin: GeoPoint,
    m_per_deg_lat: f64,
    m_per_deg_lon: f64,
    spacing: f64,
    nx: usize,
    ny: usize,
}

impl GridMap {
    fn new(bounds: &GeoRect, spacing: f64) -> Self {
        let center = bounds.center();
        let (m_lat, m_lon) = meters_per_degree(center.lat);
        let width = (bounds.max_lon - bounds.min_lon) * m_lon;
        let height = (bounds.max_lat - bounds.min_lat) * m_lat;
        GridMap {
            origin: GeoPoint { lat: bounds.min_lat, lon: bounds.min_lon },
            m_per_deg_lat: m_lat,
            m_per_deg_lon: m_lon,
            spacing,
            nx: ((width / spacing).floor() as usize + 1).max(2),
            ny: ((height / spacing).floor() as usize + 1).max(2),
        }
    }

    fn node_xy(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.spacing, j as f64 * self.spacing)
    }

    fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + y / self.m_per_deg_lat,
            lon: self.origin.lon + x / self.m_per_deg_lon,
        }
    }
}

/// Synthesizes a fleet of trajectories. Deterministic in (config, seed);
/// each vehicle gets an independent derived stream, so changing the
/// vehicle count does not reshuffle the others.
pub fn synthesize_traces(cfg: &TraceGenConfig, seed: u64) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let grid = GridMap::new(&cfg.bounds, cfg.grid_spacing_m);

    let all_nodes: Vec<(usize, usize)> = (0..grid.nx)
        .flat_map(|i| (0..grid.ny).map(move |j| (i, j)))
        .collect();
    let urban_nodes: Vec<(usize, usize)> = match &cfg.urban {
        Some(area) => all_nodes
            .iter()
            .copied()
            .filter(|&(i, j)| {
                let (x, y) = grid.node_xy(i, j);
                area.contains(grid.to_geo(x, y))
            })
            .collect(),
        None => Vec::new(),
    };

    let id_width = cfg.vehicle_count.saturating_sub(1).to_string().len().max(3);
    let mut out = Vec::with_capacity(cfg.vehicle_count);
    for v in 0..cfg.vehicle_count {
        let mut rng = seeded_rng(derive_seed(seed, v as u64));
        let pick_node = |rng: &mut rand_chacha::ChaCha8Rng| -> (usize, usize) {
            if !urban_nodes.is_empty() && rng.gen::<f64>() < cfg.urban_bias {
                urban_nodes[rng.gen_range(0..urban_nodes.len())]
            } else {
                all_nodes[rng.gen_range(0..all_nodes.len())]
            }
        };

        let start_t = if cfg.start_window_s == 0 {
            0
        } else {
            match cfg.start_profile {
                StartProfile::Uniform => rng.gen_range(0..=cfg.start_window_s),
                StartProfile::MiddayPeak => loop {
                    // rejection sampling against sin^2(pi u), peak 1
                    let u: f64 = rng.gen();
                    if rng.gen::<f64>() < (std::f64::consts::PI * u).sin().powi(2) {
                        break (u * cfg.start_window_s as f64).round() as u64;
                    }
                },
            }
        };
        let mut node = pick_node(&mut rng);
        let (mut x, mut y) = grid.node_xy(node.0, node.1);
        let mut occupied = rng.gen::<f64>() < cfg.initial_occupied_prob;

        // waypoints left on the current trip, front first
        let mut waypoints: Vec<(f64, f64)> = Vec::new();
        let mut speed = 0.0f64;

        let mut points = Vec::new();
        let mut t = start_t;
        let end_t = start_t + cfg.duration_s;
        loop {
            points.push(TracePoint { t, pos: grid.to_geo(x, y), occupied });
            if t >= end_t {
                break;
            }
            let dt = if occupied { OCCUPIED_SAMPLE_S } else { FREE_SAMPLE_S };

            // drive for dt seconds along the waypoint chain
            let mut remaining = 0.0;
            for _ in 0..dt {
                if waypoints.is_empty() {
                    let target = {
                        let mut n = pick_node(&mut rng);
                        while n == node {
                            n = pick_node(&mut rng);
                        }
                        n
                    };
                    // rectilinear route with a random corner order
                    let (tx, ty) = grid.node_xy(target.0, target.1);
                    if rng.gen::<bool>() {
                        waypoints.push((tx, y));
                    } else {
                        waypoints.push((x, ty));
                    }
                    waypoints.push((tx, ty));
                    node = target;
                    speed = (cfg.mean_speed_mps * rng.gen_range(0.7..1.3))
                        .min(cfg.max_speed_mps);
                }
                remaining += speed;
                while remaining > 0.0 && !waypoints.is_empty() {
                    let (wx, wy) = waypoints[0];
                    let dist = (wx - x).hypot(wy - y);
                    if dist <= remaining {
                        x = wx;
                        y = wy;
                        remaining -= dist;
                        waypoints.remove(0);
                        if waypoints.is_empty() {
                            // trip done; leftover motion this second is
                            // dwell time at the destination
                            remaining = 0.0;
                        }
                    } else {
                        x += (wx - x) / dist * remaining;
                        y += (wy - y) / dist * remaining;
                        remaining = 0.0;
                    }
                }
            }

            // occupancy transition compounded over the gap
            let p = if occupied { cfg.p_occupied_to_free } else { cfg.p_free_to_occupied };
            let p_gap = 1.0 - (1.0 - p).powi(dt as i32);
            if rng.gen::<f64>() < p_gap {
                occupied = !occupied;
            }
            t += dt;
        }

        out.push(Trajectory {
            vehicle_id: format!("v{v:0id_width$}"),
            points,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> TraceGenConfig {
        TraceGenConfig {
            vehicle_count: 3,
            duration_s: 120,
            start_window_s: 0,
            ..Default::default()
        }
    }

    #[test]
    fn parse_groups_sorts_normalizes_and_dedups() {
        let csv = "vehicle_id,timestamp_s,lat,lon,occupied\n\
                   b,105,31.2,121.4,1\n\
                   a,103,31.21,121.41,0\n\
                   a,101,31.22,121.42,1\n\
                   a,103,31.25,121.45,1\n";
        let trajs = parse_traces(csv.as_bytes()).unwrap();
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[0].vehicle_id, "a");
        assert_eq!(trajs[1].vehicle_id, "b");
        // min timestamp 101 shifted to 0
        assert_eq!(trajs[0].points[0].t, 0);
        assert_eq!(trajs[0].points[1].t, 2);
        assert_eq!(trajs[1].points[0].t, 4);
        // duplicate (a, 103): last row wins
        assert_eq!(trajs[0].points[1].pos.lat, 31.25);
        assert!(trajs[0].points[1].occupied);
    }

    #[test]
    fn parse_empty_input_is_empty() {
        assert!(parse_traces(&b""[..]).unwrap().is_empty());
        assert!(parse_traces(&b"vehicle_id,timestamp_s,lat,lon,occupied\n"[..])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_fields = "vehicle_id,timestamp_s,lat,lon,occupied\na,1,31.2,121.4,1\na,2,31.2\n";
        match parse_traces(bad_fields.as_bytes()) {
            Err(Error::TraceParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_occ = "vehicle_id,timestamp_s,lat,lon,occupied\na,1,31.2,121.4,2\n";
        match parse_traces(bad_occ.as_bytes()) {
            Err(Error::TraceParse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("occupied"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_lat = "vehicle_id,timestamp_s,lat,lon,occupied\na,1,99.0,121.4,1\n";
        assert!(matches!(
            parse_traces(bad_lat.as_bytes()),
            Err(Error::TraceParse { line: 2, .. })
        ));
        let bad_header = "vid,ts,lat,lon,occ\n";
        assert!(matches!(
            parse_traces(bad_header.as_bytes()),
            Err(Error::TraceParse { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let trajs = synthesize_traces(&small_cfg(), 7).unwrap();
        let mut buf = Vec::new();
        write_traces(&trajs, &mut buf).unwrap();
        let back = parse_traces(&buf[..]).unwrap();
        assert_eq!(trajs, back);
    }

    #[test]
    fn synthesis_is_deterministic_and_seed_sensitive() {
        let cfg = small_cfg();
        let a = synthesize_traces(&cfg, 9).unwrap();
        let b = synthesize_traces(&cfg, 9).unwrap();
        let c = synthesize_traces(&cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn points_stay_in_bounds_and_respect_speed_cap() {
        let cfg = TraceGenConfig {
            vehicle_count: 5,
            duration_s: 600,
            start_window_s: 100,
            ..Default::default()
        };
        let trajs = synthesize_traces(&cfg, 11).unwrap();
        for traj in &trajs {
            for p in &traj.points {
                assert!(cfg.bounds.contains(p.pos), "{:?} out of bounds", p.pos);
            }
            for w in traj.points.windows(2) {
                let d = crate::geo::haversine_m(w[0].pos, w[1].pos);
                let dt = (w[1].t - w[0].t) as f64;
                assert!(
                    d <= cfg.max_speed_mps * dt * 1.01 + 1e-6,
                    "{} m in {} s", d, dt
                );
            }
        }
    }

    #[test]
    fn occupancy_drives_sampling_cadence() {
        let always = TraceGenConfig {
            vehicle_count: 1,
            duration_s: 60,
            start_window_s: 0,
            initial_occupied_prob: 1.0,
            p_occupied_to_free: 0.0,
            ..Default::default()
        };
        let t = &synthesize_traces(&always, 3).unwrap()[0];
        assert_eq!(t.points.len(), 61);
        assert!(t.points.iter().all(|p| p.occupied));

        let never = TraceGenConfig {
            vehicle_count: 1,
            duration_s: 60,
            start_window_s: 0,
            initial_occupied_prob: 0.0,
            p_free_to_occupied: 0.0,
            ..Default::default()
        };
        let t = &synthesize_traces(&never, 3).unwrap()[0];
        assert_eq!(t.points.len(), 5); // 0, 15, 30, 45, 60
        assert!(t.points.iter().all(|p| !p.occupied));
    }

    #[test]
    fn midday_peak_concentrates_starts() {
        let cfg = TraceGenConfig {
            vehicle_count: 200,
            duration_s: 30,
            start_window_s: 40_000,
            start_profile: StartProfile::MiddayPeak,
            ..Default::default()
        };
        let peaked = synthesize_traces(&cfg, 8).unwrap();
        let uniform = synthesize_traces(
            &TraceGenConfig { start_profile: StartProfile::Uniform, ..cfg.clone() },
            8,
        )
        .unwrap();
        // fraction of starts in the middle half of the window
        let mid_frac = |trajs: &[Trajectory]| {
            let n = trajs
                .iter()
                .filter(|t| {
                    let s = t.start_t();
                    s >= 10_000 && s <= 30_000
                })
                .count();
            n as f64 / trajs.len() as f64
        };
        // sin^2 puts ~0.82 of the mass in the middle half vs 0.5 uniform
        assert!(mid_frac(&peaked) > 0.7, "peaked {}", mid_frac(&peaked));
        assert!(mid_frac(&uniform) < 0.65, "uniform {}", mid_frac(&uniform));
        // deterministic too
        let again = synthesize_traces(&cfg, 8).unwrap();
        assert_eq!(peaked, again);
    }

    #[test]
    fn urban_bias_concentrates_waypoints() {
        let bounds = GeoRect {
            min_lat: 31.200,
            min_lon: 121.400,
            max_lat: 31.254,
            max_lon: 121.463,
        };
        let urban = GeoArea::Rect(GeoRect {
            min_lat: 31.217,
            min_lon: 121.420,
            max_lat: 31.237,
            max_lon: 121.443,
        });
        let cfg = TraceGenConfig {
            bounds,
            vehicle_count: 10,
            duration_s: 1200,
            start_window_s: 0,
            urban: Some(urban.clone()),
            urban_bias: 0.9,
            ..Default::default()
        };
        let biased = synthesize_traces(&cfg, 5).unwrap();
        let unbiased = synthesize_traces(&TraceGenConfig { urban: None, ..cfg }, 5).unwrap();
        let frac = |trajs: &[Trajectory]| {
            let (mut inside, mut total) = (0usize, 0usize);
            for t in trajs {
                for p in &t.points {
                    total += 1;
                    inside += usize::from(urban.contains(p.pos));
                }
            }
            inside as f64 / total as f64
        };
        assert!(frac(&biased) > frac(&unbiased) + 0.2);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = small_cfg();
        cfg.vehicle_count = 0;
        assert!(synthesize_traces(&cfg, 1).is_err());
        let mut cfg = small_cfg();
        cfg.duration_s = 0;
        assert!(synthesize_traces(&cfg, 1).is_err());
        let mut cfg = small_cfg();
        cfg.mean_speed_mps = 20.0; // above max
        assert!(synthesize_traces(&cfg, 1).is_err());
        let mut cfg = small_cfg();
        cfg.urban_bias = 1.5;
        assert!(synthesize_traces(&cfg, 1).is_err());
    }
}
