//! Fog-node network, nearest-fog association and the service-cost
//! simulator that turns vehicle traces into interaction records.

use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoArea, GeoPoint};
use crate::rng::seeded_rng;
use crate::traces::Trajectory;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Simulated cost never drops below this, whatever the noise draw.
pub const MIN_COST_MS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    Urban,
    Suburban,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FogNode {
    pub fog_id: u32,
    pub lat: f64,
    pub lon: f64,
    pub coverage_radius_m: f64,
    pub base_cost_ms: f64,
    pub region: RegionTag,
}

impl FogNode {
    pub fn pos(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

/// Validated set of fog nodes with ids 0..n.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<FogNode>", into = "Vec<FogNode>")]
pub struct FogNetwork {
    nodes: Vec<FogNode>,
}

impl TryFrom<Vec<FogNode>> for FogNetwork {
    type Error = Error;
    fn try_from(nodes: Vec<FogNode>) -> Result<Self> {
        FogNetwork::new(nodes)
    }
}

impl From<FogNetwork> for Vec<FogNode> {
    fn from(n: FogNetwork) -> Self {
        n.nodes
    }
}

impl FogNetwork {
    pub fn new(mut nodes: Vec<FogNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("fog network has no nodes".into()));
        }
        nodes.sort_by_key(|n| n.fog_id);
        for (i, n) in nodes.iter().enumerate() {
            if n.fog_id as usize != i {
                return Err(Error::InvalidInput(format!(
                    "fog ids must be contiguous from 0; found {} at position {i}",
                    n.fog_id
                )));
            }
            n.pos().validate()?;
            if !(n.coverage_radius_m.is_finite() && n.coverage_radius_m > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "fog {} coverage_radius_m must be positive",
                    n.fog_id
                )));
            }
            if !(n.base_cost_ms.is_finite() && n.base_cost_ms >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "fog {} base_cost_ms must be non-negative",
                    n.fog_id
                )));
            }
        }
        Ok(FogNetwork { nodes })
    }

    pub fn nodes(&self) -> &[FogNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, fog_id: u32) -> Option<&FogNode> {
        self.nodes.get(fog_id as usize)
    }
}

/// The fog whose site is nearest to `p` among those whose coverage
/// radius reaches it. Ties break toward the smaller fog id.
pub fn nearest_fog(p: GeoPoint, network: &FogNetwork) -> Option<u32> {
    nearest_fog_detailed(p, network).map(|(node, _)| node.fog_id)
}

pub fn nearest_fog_detailed<'a>(p: GeoPoint, network: &'a FogNetwork) -> Option<(&'a FogNode, f64)> {
    let mut best: Option<(&FogNode, f64)> = None;
    for node in network.nodes() {
        let d = haversine_m(p, node.pos());
        if d > node.coverage_radius_m {
            continue;
        }
        // strict '<' in id order keeps the smaller id on exact ties
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((node, d));
        }
    }
    best
}

/// Per-point nearest fog along a trajectory; None where uncovered.
pub fn associate_trajectory(traj: &Trajectory, network: &FogNetwork) -> Vec<Option<u32>> {
    traj.points
        .iter()
        .map(|pt| nearest_fog(pt.pos, network))
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// ms of cost per metre of vehicle-fog distance.
    pub distance_ms_per_m: f64,
    /// Weight of the load term: load_fraction * base_cost * this.
    pub load_weight: f64,
    /// Std-dev of the Gaussian noise term, ms.
    pub noise_sigma_ms: f64,
    /// Vehicles one fog serves at load 1.0; further arrivals saturate.
    pub capacity: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            distance_ms_per_m: 0.02,
            load_weight: 1.0,
            noise_sigma_ms: 1.0,
            capacity: 10,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_ms_per_m.is_finite() && self.distance_ms_per_m >= 0.0) {
            return Err(Error::InvalidInput("distance_ms_per_m must be >= 0".into()));
        }
        if !(self.load_weight.is_finite() && self.load_weight >= 0.0) {
            return Err(Error::InvalidInput("load_weight must be >= 0".into()));
        }
        if !(self.noise_sigma_ms.is_finite() && self.noise_sigma_ms >= 0.0) {
            return Err(Error::InvalidInput("noise_sigma_ms must be >= 0".into()));
        }
        if self.capacity == 0 {
            return Err(Error::InvalidInput("capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// One service interaction:
/// base + distance_ms_per_m * d + load_weight * load * base + N(0, sigma),
/// clamped to [`MIN_COST_MS`]. With sigma = 0 no noise is drawn, so the
/// value is exact and costs no RNG state.
pub fn service_cost<R: Rng>(
    node: &FogNode,
    distance_m: f64,
    load_fraction: f64,
    params: &CostParams,
    rng: &mut R,
) -> Result<f64> {
    params.validate()?;
    if !(distance_m.is_finite() && distance_m >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "distance_m must be non-negative, got {distance_m}"
        )));
    }
    if !(0.0..=1.0).contains(&load_fraction) {
        return Err(Error::InvalidInput(format!(
            "load_fraction must be in [0, 1], got {load_fraction}"
        )));
    }
    let mut cost = node.base_cost_ms
        + params.distance_ms_per_m * distance_m
        + params.load_weight * load_fraction * node.base_cost_ms;
    if params.noise_sigma_ms > 0.0 {
        let noise = Normal::new(0.0, params.noise_sigma_ms)
            .map_err(|e| Error::InvalidInput(format!("bad noise sigma: {e}")))?;
        cost += noise.sample(rng);
    }
    Ok(cost.max(MIN_COST_MS))
}

/// An area where fog service is unavailable, optionally only during
/// [start, end] (inclusive, seconds).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstacleRegion {
    pub area: GeoArea,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<(u64, u64)>,
}

impl ObstacleRegion {
    pub fn blocks(&self, p: GeoPoint, t: u64) -> bool {
        let active = match self.active {
            None => true,
            Some((start, end)) => t >= start && t <= end,
        };
        active && self.area.contains(p)
    }
}

/// One line of the simulator's JSONL output. Numeric fog fields are
/// present exactly when `no_coverage` is false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub vehicle_id: String,
    pub t: u64,
    pub vlat: f64,
    pub vlon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fog_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_ms: Option<f64>,
    pub no_coverage: bool,
}

impl InteractionRecord {
    pub fn pos(&self) -> GeoPoint {
        GeoPoint { lat: self.vlat, lon: self.vlon }
    }

    fn check(&self, line: usize) -> Result<()> {
        let covered = [
            self.fog_id.is_some(),
            self.flat.is_some(),
            self.flon.is_some(),
            self.dist_m.is_some(),
            self.cost_ms.is_some(),
        ];
        let consistent = if self.no_coverage {
            covered.iter().all(|c| !c)
        } else {
            covered.iter().all(|c| *c)
        };
        if consistent {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "record {line}: fog fields inconsistent with no_coverage={}",
                self.no_coverage
            )))
        }
    }
}

/// Runs the service simulation over a fleet.
///
/// Reports are processed in (t, vehicle_id) order. A vehicle occupies
/// its assigned fog from each report until its next one (or the end of
/// its trace); the load a report sees counts every vehicle currently
/// assigned to that fog, itself included, processed in that global
/// order. Obstacles override coverage. Deterministic in (inputs, seed):
/// sequential processing, one noise draw per covered report.
pub fn simulate(
    trajectories: &[Trajectory],
    network: &FogNetwork,
    params: &CostParams,
    obstacles: &[ObstacleRegion],
    seed: u64,
) -> Result<Vec<InteractionRecord>> {
    params.validate()?;
    let mut ids = BTreeSet::new();
    for t in trajectories {
        t.validate()?;
        if !ids.insert(&t.vehicle_id) {
            return Err(Error::InvalidInput(format!(
                "duplicate vehicle id {:?}",
                t.vehicle_id
            )));
        }
    }

    enum Ev {
        // depart sorts before reports at the same second: a vehicle whose
        // trace ended at t-1 no longer holds capacity at t
        Depart(usize),
        Report(usize, usize),
    }
    let mut events: Vec<(u64, u8, &str, Ev)> = Vec::new();
    for (vi, traj) in trajectories.iter().enumerate() {
        for (pi, p) in traj.points.iter().enumerate() {
            events.push((p.t, 1, traj.vehicle_id.as_str(), Ev::Report(vi, pi)));
        }
        events.push((traj.end_t() + 1, 0, traj.vehicle_id.as_str(), Ev::Depart(vi)));
    }
    events.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut rng = seeded_rng(seed);
    let mut assigned: Vec<Option<u32>> = vec![None; trajectories.len()];
    let mut load_count: Vec<u32> = vec![0; network.len()];
    let mut out = Vec::new();

    let reassign = |assigned: &mut Vec<Option<u32>>, load: &mut Vec<u32>, vi: usize, new: Option<u32>| {
        if let Some(old) = assigned[vi] {
            load[old as usize] -= 1;
        }
        if let Some(f) = new {
            load[f as usize] += 1;
        }
        assigned[vi] = new;
    };

    for (t, _, _, ev) in events {
        match ev {
            Ev::Depart(vi) => reassign(&mut assigned, &mut load_count, vi, None),
            Ev::Report(vi, pi) => {
                let traj = &trajectories[vi];
                let p = traj.points[pi];
                let blocked = obstacles.iter().any(|o| o.blocks(p.pos, t));
                let hit = if blocked { None } else { nearest_fog_detailed(p.pos, network) };
                match hit {
                    None => {
                        reassign(&mut assigned, &mut load_count, vi, None);
                        out.push(InteractionRecord {
                            vehicle_id: traj.vehicle_id.clone(),
                            t,
                            vlat: p.pos.lat,
                            vlon: p.pos.lon,
                            fog_id: None,
                            flat: None,
                            flon: None,
                            dist_m: None,
                            cost_ms: None,
                            no_coverage: true,
                        });
                    }
                    Some((node, dist)) => {
                        reassign(&mut assigned, &mut load_count, vi, Some(node.fog_id));
                        let load = (load_count[node.fog_id as usize] as f64
                            / params.capacity as f64)
                            .min(1.0);
                        let cost = service_cost(node, dist, load, params, &mut rng)?;
                        out.push(InteractionRecord {
                            vehicle_id: traj.vehicle_id.clone(),
                            t,
                            vlat: p.pos.lat,
                            vlon: p.pos.lon,
                            fog_id: Some(node.fog_id),
                            flat: Some(node.lat),
                            flon: Some(node.lon),
                            dist_m: Some(dist),
                            cost_ms: Some(cost),
                            no_coverage: false,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn write_records_jsonl<W: Write>(records: &[InteractionRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_records_path<P: AsRef<Path>>(records: &[InteractionRecord], path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(Error::file(&path))?);
    write_records_jsonl(records, &mut f)?;
    use std::io::Write as _;
    f.flush()?;
    Ok(())
}

pub fn read_records_jsonl<R: Read>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InteractionRecord = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("records line {}: {e}", i + 1))
        })?;
        rec.check(i + 1)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records_path<P: AsRef<Path>>(path: P) -> Result<Vec<InteractionRecord>> {
    read_records_jsonl(std::fs::File::open(&path).map_err(Error::file(&path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{offset_m, GeoRect};
    use crate::traces::TracePoint;

    fn node(id: u32, lat: f64, lon: f64, radius: f64) -> FogNode {
        FogNode {
            fog_id: id,
            lat,
            lon,
            coverage_radius_m: radius,
            base_cost_ms: 10.0,
            region: RegionTag::Urban,
        }
    }

    fn two_fogs() -> FogNetwork {
        let a = GeoPoint { lat: 31.22, lon: 121.42 };
        let b = offset_m(a, 2000.0, 0.0);
        FogNetwork::new(vec![
            node(0, a.lat, a.lon, 2500.0),
            node(1, b.lat, b.lon, 2500.0),
        ])
        .unwrap()
    }

    #[test]
    fn network_validation() {
        assert!(FogNetwork::new(vec![]).is_err());
        assert!(FogNetwork::new(vec![node(1, 31.0, 121.0, 100.0)]).is_err());
        assert!(FogNetwork::new(vec![
            node(0, 31.0, 121.0, 100.0),
            node(0, 31.0, 121.1, 100.0),
        ])
        .is_err());
        assert!(FogNetwork::new(vec![node(0, 31.0, 121.0, -5.0)]).is_err());
        // order in the input list does not matter
        let net = FogNetwork::new(vec![
            node(1, 31.0, 121.1, 100.0),
            node(0, 31.0, 121.0, 100.0),
        ])
        .unwrap();
        assert_eq!(net.node(0).unwrap().lon, 121.0);
    }

    #[test]
    fn nearest_prefers_close_then_small_id() {
        let net = two_fogs();
        let a = net.node(0).unwrap().pos();
        let b = net.node(1).unwrap().pos();
        assert_eq!(nearest_fog(a, &net), Some(0));
        assert_eq!(nearest_fog(b, &net), Some(1));
        // exact midpoint: equidistant, the smaller id wins
        let mid = offset_m(a, 1000.0, 0.0);
        let (_, da) = nearest_fog_detailed(mid, &net).unwrap();
        assert_eq!(nearest_fog(mid, &net), Some(0));
        assert!(da <= 1001.0);
        // far away: nothing in range
        let far = offset_m(a, 50_000.0, 0.0);
        assert_eq!(nearest_fog(far, &net), None);
    }

    #[test]
    fn out_of_radius_is_uncovered_even_if_nearest() {
        let net = FogNetwork::new(vec![node(0, 31.22, 121.42, 500.0)]).unwrap();
        let p = offset_m(GeoPoint { lat: 31.22, lon: 121.42 }, 800.0, 0.0);
        assert_eq!(nearest_fog(p, &net), None);
    }

    #[test]
    fn service_cost_deterministic_part() {
        let n = node(0, 31.22, 121.42, 1000.0);
        let quiet = CostParams { noise_sigma_ms: 0.0, ..Default::default() };
        let mut rng = seeded_rng(1);
        // 10 + 0.02*100 + 1.0*0.5*10 = 17
        let c = service_cost(&n, 100.0, 0.5, &quiet, &mut rng).unwrap();
        assert_eq!(c, 17.0);
        // zero everything: cost clamps at the floor
        let zero = FogNode { base_cost_ms: 0.0, ..n.clone() };
        let c = service_cost(&zero, 0.0, 0.0, &quiet, &mut rng).unwrap();
        assert_eq!(c, MIN_COST_MS);
        assert!(service_cost(&n, -1.0, 0.0, &quiet, &mut rng).is_err());
        assert!(service_cost(&n, 1.0, 1.5, &quiet, &mut rng).is_err());
    }

    #[test]
    fn noiseless_cost_monotone_in_distance() {
        let n = node(0, 31.22, 121.42, 1000.0);
        let quiet = CostParams { noise_sigma_ms: 0.0, ..Default::default() };
        let mut rng = seeded_rng(1);
        let mut last = 0.0;
        for d in [0.0, 10.0, 100.0, 500.0, 2000.0] {
            let c = service_cost(&n, d, 0.3, &quiet, &mut rng).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    fn stationary_traj(id: &str, pos: GeoPoint, ts: &[u64]) -> Trajectory {
        Trajectory::new(
            id.to_string(),
            ts.iter().map(|&t| TracePoint { t, pos, occupied: true }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn simulate_tracks_load_and_departures() {
        let net = two_fogs();
        let at0 = net.node(0).unwrap().pos();
        let params = CostParams { noise_sigma_ms: 0.0, ..Default::default() };
        // v1 reports at t=0,1,2; v2 at t=1 only; both sit on fog 0
        let trajs = vec![
            stationary_traj("v1", at0, &[0, 1, 2]),
            stationary_traj("v2", at0, &[1]),
        ];
        let recs = simulate(&trajs, &net, &params, &[], 0).unwrap();
        assert_eq!(recs.len(), 4);
        // (t, vehicle_id) order
        let order: Vec<(u64, &str)> = recs.iter().map(|r| (r.t, r.vehicle_id.as_str())).collect();
        assert_eq!(order, vec![(0, "v1"), (1, "v1"), (1, "v2"), (2, "v1")]);
        // base 10, d 0: cost = 10 * (1 + load)
        let costs: Vec<f64> = recs.iter().map(|r| r.cost_ms.unwrap()).collect();
        assert_eq!(costs[0], 11.0); // v1 alone: load 1/10
        assert_eq!(costs[1], 11.0); // v1 re-reports before v2's t=1 report
        assert_eq!(costs[2], 12.0); // v2 sees both: load 2/10
        // v2's trace ended at t=1, so at t=2 only v1 remains
        assert_eq!(costs[3], 11.0);
    }

    #[test]
    fn recorded_distance_matches_recomputation() {
        let net = two_fogs();
        let p = offset_m(net.node(0).unwrap().pos(), 333.0, manhattan_y());
        let trajs = vec![stationary_traj("v", p, &[0])];
        let recs = simulate(&trajs, &net, &CostParams::default(), &[], 7).unwrap();
        let r = &recs[0];
        let d = haversine_m(r.pos(), GeoPoint { lat: r.flat.unwrap(), lon: r.flon.unwrap() });
        assert!((d - r.dist_m.unwrap()).abs() / d.max(1e-9) < 1e-6);
    }

    fn manhattan_y() -> f64 {
        217.0
    }

    #[test]
    fn obstacle_blocks_coverage_in_its_window() {
        let net = two_fogs();
        let at0 = net.node(0).unwrap().pos();
        let area = GeoArea::Rect(GeoRect::new(at0.lat - 0.01, at0.lon - 0.01, at0.lat + 0.01, at0.lon + 0.01).unwrap());
        let obstacle = ObstacleRegion { area, active: Some((1, 2)) };
        let trajs = vec![stationary_traj("v", at0, &[0, 1, 2, 3])];
        let recs = simulate(&trajs, &net, &CostParams::default(), &[obstacle], 0).unwrap();
        let noc: Vec<bool> = recs.iter().map(|r| r.no_coverage).collect();
        assert_eq!(noc, vec![false, true, true, false]);
        for r in &recs {
            if r.no_coverage {
                assert!(r.fog_id.is_none() && r.cost_ms.is_none() && r.dist_m.is_none());
            } else {
                assert!(r.fog_id.is_some() && r.cost_ms.is_some());
            }
        }
    }

    #[test]
    fn simulate_rejects_duplicate_vehicles() {
        let net = two_fogs();
        let p = net.node(0).unwrap().pos();
        let trajs = vec![stationary_traj("v", p, &[0]), stationary_traj("v", p, &[1])];
        assert!(simulate(&trajs, &net, &CostParams::default(), &[], 0).is_err());
    }

    #[test]
    fn simulation_and_serialization_are_byte_deterministic() {
        let net = two_fogs();
        let cfg = crate::traces::TraceGenConfig {
            vehicle_count: 4,
            duration_s: 120,
            start_window_s: 30,
            ..Default::default()
        };
        let trajs = crate::traces::synthesize_traces(&cfg, 13).unwrap();
        let run = || {
            let recs = simulate(&trajs, &net, &CostParams::default(), &[], 99).unwrap();
            let mut buf = Vec::new();
            write_records_jsonl(&recs, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn jsonl_round_trip_and_validation() {
        let net = two_fogs();
        let p = net.node(0).unwrap().pos();
        let far = offset_m(p, 30_000.0, 0.0);
        let trajs = vec![
            stationary_traj("v1", p, &[0, 5]),
            stationary_traj("v2", far, &[3]),
        ];
        let recs = simulate(&trajs, &net, &CostParams::default(), &[], 5).unwrap();
        assert!(recs.iter().any(|r| r.no_coverage));
        let mut buf = Vec::new();
        write_records_jsonl(&recs, &mut buf).unwrap();
        let back = read_records_jsonl(&buf[..]).unwrap();
        assert_eq!(recs, back);

        // inconsistent record rejected
        let bad = r#"{"vehicle_id":"x","t":0,"vlat":31.0,"vlon":121.0,"cost_ms":5.0,"no_coverage":true}"#;
        assert!(read_records_jsonl(bad.as_bytes()).is_err());
        // malformed json rejected with its line
        let malformed = "{\"vehicle_id\":\"x\"";
        match read_records_jsonl(malformed.as_bytes()) {
            Err(Error::InvalidInput(msg)) => assert!(msg.contains("line 1")),
            other => panic!("expected error, got {other:?}"),
        }
    }
}
