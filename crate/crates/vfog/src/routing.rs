//! Route planning over a trajectory using the trained predictors:
//! per-point fog classes, handover transitions with buffer zones, and
//! low-coverage intervals where work should be offloaded ahead of time.
//!
//! Transition detection works on smoothed classes: an isolated
//! single-point flicker is first replaced by its surrounding class,
//! then a handover is reported only where three consecutive points on
//! each side agree. Coverage gaps are not handovers; the no-coverage
//! class never appears as a transition endpoint.

use crate::error::{Error, Result};
use crate::features::cost_raw_step_parts;
use crate::geo::{haversine_m, GeoPoint};
use crate::models::{CostPredictor, FogPredictor};
use crate::traces::TracePoint;
use serde::{Deserialize, Serialize};

/// Points this close to a transition belong to its buffer zone.
pub const DEFAULT_BUFFER_RADIUS_M: f64 = 100.0;
/// Scaled predicted cost above this marks a point as low-coverage.
pub const DEFAULT_HIGH_COST_THRESHOLD: f64 = 0.9;
/// detect_transitions needs this many points to say anything.
pub const MIN_TRANSITION_POINTS: usize = 7;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RouteConfig {
    pub buffer_radius_m: f64,
    pub high_cost_threshold: f64,
}

impl Default for RouteConfig {
    fn default() -> Self {
        RouteConfig {
            buffer_radius_m: DEFAULT_BUFFER_RADIUS_M,
            high_cost_threshold: DEFAULT_HIGH_COST_THRESHOLD,
        }
    }
}

impl RouteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_radius_m > 0.0) || !self.buffer_radius_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "buffer radius must be positive, got {}",
                self.buffer_radius_m
            )));
        }
        if !(0.0..=1.0).contains(&self.high_cost_threshold) {
            return Err(Error::InvalidInput(format!(
                "high-cost threshold must be in [0, 1], got {}",
                self.high_cost_threshold
            )));
        }
        Ok(())
    }
}

/// Pointwise fog classes along a trajectory.
pub fn predict_along(fog: &FogPredictor, points: &[TracePoint]) -> Result<Vec<usize>> {
    points
        .iter()
        .map(|p| fog.predict_class(p.pos.lat, p.pos.lon, p.t))
        .collect()
}

/// Replaces isolated single-point flickers (a lone class between two
/// equal neighbors) with the surrounding class. Endpoints stay as-is.
pub fn smooth_classes(classes: &[usize]) -> Vec<usize> {
    let mut out = classes.to_vec();
    for i in 1..classes.len().saturating_sub(1) {
        if classes[i - 1] == classes[i + 1] && classes[i] != classes[i - 1] {
            out[i] = classes[i - 1];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    /// Index of the first point on the new fog.
    pub index: usize,
    pub t: u64,
    pub pos: GeoPoint,
    pub from_class: usize,
    pub to_class: usize,
}

/// Handover points over smoothed classes. `no_coverage_class` marks
/// coverage gaps, which are never transition endpoints. Returns the
/// transitions plus any warnings (e.g. a route too short to judge).
pub fn detect_transitions(
    classes: &[usize],
    points: &[TracePoint],
    no_coverage_class: usize,
) -> Result<(Vec<TransitionPoint>, Vec<String>)> {
    if classes.len() != points.len() {
        return Err(Error::Shape {
            context: "transition classes vs points",
            expected: points.len(),
            got: classes.len(),
        });
    }
    let mut warnings = Vec::new();
    if classes.len() < MIN_TRANSITION_POINTS {
        warnings.push(format!(
            "route has {} points; transition detection needs at least {}",
            classes.len(),
            MIN_TRANSITION_POINTS
        ));
        return Ok((Vec::new(), warnings));
    }
    let smoothed = smooth_classes(classes);
    let mut out = Vec::new();
    // i is the first index of the new class; need 3 stable points on
    // both sides, so i ranges over [3, len-3].
    for i in 3..=smoothed.len() - 3 {
        let (a, b) = (smoothed[i - 1], smoothed[i]);
        if a == b || a == no_coverage_class || b == no_coverage_class {
            continue;
        }
        if smoothed[i - 3..i].iter().all(|&c| c == a)
            && smoothed[i..i + 3].iter().all(|&c| c == b)
        {
            out.push(TransitionPoint {
                index: i,
                t: points[i].t,
                pos: points[i].pos,
                from_class: a,
                to_class: b,
            });
        }
    }
    Ok((out, warnings))
}

/// Maximal run of one smoothed class; indices inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub class: usize,
    pub start_index: usize,
    pub end_index: usize,
    pub start_t: u64,
    pub end_t: u64,
}

pub fn segment_route(smoothed: &[usize], points: &[TracePoint]) -> Result<Vec<Segment>> {
    if smoothed.len() != points.len() {
        return Err(Error::Shape {
            context: "segment classes vs points",
            expected: points.len(),
            got: smoothed.len(),
        });
    }
    let mut out: Vec<Segment> = Vec::new();
    for (i, &c) in smoothed.iter().enumerate() {
        match out.last_mut() {
            Some(seg) if seg.class == c => {
                seg.end_index = i;
                seg.end_t = points[i].t;
            }
            _ => out.push(Segment {
                class: c,
                start_index: i,
                end_index: i,
                start_t: points[i].t,
                end_t: points[i].t,
            }),
        }
    }
    Ok(out)
}

/// Contiguous points around a transition within the buffer radius of
/// the crossing position; where handover preparation should happen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferZone {
    pub transition: TransitionPoint,
    pub start_index: usize,
    pub end_index: usize,
}

pub fn buffer_zones(
    transitions: &[TransitionPoint],
    points: &[TracePoint],
    radius_m: f64,
) -> Vec<BufferZone> {
    transitions
        .iter()
        .map(|tr| {
            let within = |i: usize| haversine_m(points[i].pos, tr.pos) <= radius_m;
            let mut start = tr.index;
            while start > 0 && within(start - 1) {
                start -= 1;
            }
            let mut end = tr.index;
            while end + 1 < points.len() && within(end + 1) {
                end += 1;
            }
            BufferZone { transition: *tr, start_index: start, end_index: end }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowCoverageReason {
    /// At least one point in the interval has no covering fog.
    NoCoverage,
    /// Coverage exists but predicted cost stays above the threshold.
    HighCost,
}

/// Interval (inclusive) where service is unavailable or predicted too
/// expensive: offload work at `offload_before` and pick it back up at
/// `resume_at` (None when the route starts/ends inside the interval).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowCoverageInterval {
    pub start_index: usize,
    pub end_index: usize,
    pub reason: LowCoverageReason,
    pub offload_before: Option<usize>,
    pub resume_at: Option<usize>,
}

/// Flags each point from raw (unsmoothed) classes and scaled cost
/// predictions, then groups contiguous flagged runs.
pub fn find_low_coverage(
    raw_classes: &[usize],
    costs_scaled: &[Option<f64>],
    no_coverage_class: usize,
    threshold: f64,
) -> Result<Vec<LowCoverageInterval>> {
    if raw_classes.len() != costs_scaled.len() {
        return Err(Error::Shape {
            context: "low-coverage classes vs costs",
            expected: raw_classes.len(),
            got: costs_scaled.len(),
        });
    }
    let mut out: Vec<LowCoverageInterval> = Vec::new();
    let mut run: Option<(usize, bool)> = None; // (start, saw_no_coverage)
    for i in 0..=raw_classes.len() {
        let flagged = i < raw_classes.len()
            && (raw_classes[i] == no_coverage_class
                || costs_scaled[i].is_some_and(|c| c > threshold));
        match (run, flagged) {
            (None, true) => run = Some((i, raw_classes[i] == no_coverage_class)),
            (Some((start, saw_noc)), true) => {
                run = Some((start, saw_noc || raw_classes[i] == no_coverage_class))
            }
            (Some((start, saw_noc)), false) => {
                out.push(LowCoverageInterval {
                    start_index: start,
                    end_index: i - 1,
                    reason: if saw_noc {
                        LowCoverageReason::NoCoverage
                    } else {
                        LowCoverageReason::HighCost
                    },
                    offload_before: start.checked_sub(1),
                    resume_at: (i < raw_classes.len()).then_some(i),
                });
                run = None;
            }
            (None, false) => {}
        }
    }
    Ok(out)
}

/// Per-point planning output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutePointPlan {
    pub index: usize,
    pub t: u64,
    pub pos: GeoPoint,
    pub raw_class: usize,
    pub smoothed_class: usize,
    /// None at points with no covering fog.
    pub predicted_cost_scaled: Option<f64>,
    pub predicted_cost_ms: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoutePlan {
    pub points: Vec<RoutePointPlan>,
    pub segments: Vec<Segment>,
    pub transitions: Vec<TransitionPoint>,
    pub buffers: Vec<BufferZone>,
    pub low_coverage: Vec<LowCoverageInterval>,
    pub warnings: Vec<String>,
}

/// Plans a route: classifies every point, predicts service cost
/// autoregressively (each covered point's predicted cost feeds the next
/// window, mirroring how the regressor was trained on real histories),
/// detects handovers with buffer zones, and marks low-coverage
/// intervals.
pub fn plan_route(
    fog: &FogPredictor,
    cost: &CostPredictor,
    route: &[TracePoint],
    cfg: &RouteConfig,
) -> Result<RoutePlan> {
    cfg.validate()?;
    if route.is_empty() {
        return Err(Error::InvalidInput("route has no points".into()));
    }
    if fog.epoch_weekday() != cost.epoch_weekday() {
        return Err(Error::ModelMismatch(format!(
            "fog model labels t=0 as weekday {}, cost model as {}",
            fog.epoch_weekday(),
            cost.epoch_weekday()
        )));
    }
    let noc = fog.no_coverage_class();
    let raw = predict_along(fog, route)?;
    let smoothed = smooth_classes(&raw);

    let window = cost.window();
    let width = cost.scaler().width();
    // Rolling history of scaled steps; None marks an uncovered point.
    let mut hist: Vec<Option<Vec<f64>>> = Vec::with_capacity(route.len());
    let mut points = Vec::with_capacity(route.len());
    let mut costs_scaled = Vec::with_capacity(route.len());
    for (i, p) in route.iter().enumerate() {
        let covered = raw[i] != noc;
        let (cost_scaled, cost_ms) = if covered {
            let mut steps = Vec::with_capacity(window);
            let mut mask = Vec::with_capacity(window);
            let tail_start = hist.len().saturating_sub(window);
            for _ in 0..window - (hist.len() - tail_start) {
                steps.push(vec![0.0; width]);
                mask.push(false);
            }
            for h in &hist[tail_start..] {
                match h {
                    Some(s) => {
                        steps.push(s.clone());
                        mask.push(true);
                    }
                    None => {
                        steps.push(vec![0.0; width]);
                        mask.push(false);
                    }
                }
            }
            let scaled = cost.predict_scaled(&steps, &mask)?;
            let ms = cost.scaler().unscale_col(crate::features::COST_COL, scaled);
            let site = fog.site(raw[i]).ok_or_else(|| {
                Error::InvalidInput(format!("no site recorded for fog class {}", raw[i]))
            })?;
            let dist = haversine_m(p.pos, site.pos());
            let step_raw =
                cost_raw_step_parts(p.pos, site.pos(), dist, p.t, ms, fog.epoch_weekday());
            hist.push(Some(cost.scaler().transform(&step_raw)?));
            (Some(scaled), Some(ms))
        } else {
            hist.push(None);
            (None, None)
        };
        costs_scaled.push(cost_scaled);
        points.push(RoutePointPlan {
            index: i,
            t: p.t,
            pos: p.pos,
            raw_class: raw[i],
            smoothed_class: smoothed[i],
            predicted_cost_scaled: cost_scaled,
            predicted_cost_ms: cost_ms,
        });
    }

    let (transitions, warnings) = detect_transitions(&raw, route, noc)?;
    let buffers = buffer_zones(&transitions, route, cfg.buffer_radius_m);
    let segments = segment_route(&smoothed, route)?;
    let low_coverage = find_low_coverage(&raw, &costs_scaled, noc, cfg.high_cost_threshold)?;
    Ok(RoutePlan { points, segments, transitions, buffers, low_coverage, warnings })
}
