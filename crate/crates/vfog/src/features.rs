//! Feature engineering shared by both predictors.
//!
//! Positions enter the models as unit-sphere Cartesian coordinates (a
//! smooth, bounded encoding of lat/lon), time of day as sin/cos of the
//! day angle, day of week one-hot. Real-valued columns are min-max
//! scaled to [0, 1] with statistics fitted on training rows only;
//! sin/cos columns use the fixed affine map [-1, 1] -> [0, 1]; one-hot
//! columns pass through.
//!
//! The fog-class features deliberately exclude anything about the fog
//! itself: the classifier must infer the serving fog from where and
//! when a vehicle reports, which is what lets it stand in for real
//! coverage measurements at planning time.

use crate::error::{Error, Result};
use crate::fogsim::InteractionRecord;
use crate::geo::GeoPoint;
use crate::rng::seeded_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SECONDS_PER_DAY: u64 = 86_400;
pub const DAYS_PER_WEEK: usize = 7;

/// Widths of the two feature layouts.
pub const FOG_FEATURES: usize = 12;
pub const COST_STEP_FEATURES: usize = 17;

/// Default history length for cost windows.
pub const DEFAULT_WINDOW: usize = 10;

/// lat/lon (degrees) to a point on the unit sphere.
pub fn geo_to_cartesian(lat: f64, lon: f64) -> [f64; 3] {
    let (lat, lon) = (lat.to_radians(), lon.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// (sin, cos) of the time-of-day angle, plus the weekday index given
/// which weekday t = 0 falls on (0..6, caller's labeling convention).
pub fn time_features(t: u64, epoch_weekday: u8) -> (f64, f64, usize) {
    let sod = (t % SECONDS_PER_DAY) as f64;
    let angle = 2.0 * std::f64::consts::PI * sod / SECONDS_PER_DAY as f64;
    let dow = (epoch_weekday as u64 + t / SECONDS_PER_DAY) % DAYS_PER_WEEK as u64;
    (angle.sin(), angle.cos(), dow as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Scaled (v - min) / (max - min) with fitted stats, clamped to [0, 1].
    /// A degenerate column (max == min) maps to 0.
    MinMax,
    /// Fixed affine [-1, 1] -> [0, 1]; no fitted state.
    SymmetricUnit,
    /// Left untouched (one-hot columns).
    Passthrough,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerColumn {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

pub const SCALER_VERSION: u32 = 1;

/// Per-column scaling fitted on training rows. Serializes to a
/// versioned JSON document carrying column names in order, so a loaded
/// model can verify it is fed the layout it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub version: u32,
    columns: Vec<ScalerColumn>,
}

pub type FeatureLayout = Vec<(String, ColumnKind)>;

impl FeatureScaler {
    /// Fits min/max statistics over `rows` (training rows only).
    pub fn fit<'a, I>(layout: &FeatureLayout, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut columns: Vec<ScalerColumn> = layout
            .iter()
            .map(|(name, kind)| ScalerColumn {
                name: name.clone(),
                kind: *kind,
                min: None,
                max: None,
            })
            .collect();
        let mut saw_rows = false;
        for row in rows {
            saw_rows = true;
            if row.len() != columns.len() {
                return Err(Error::Shape {
                    context: "scaler fit row",
                    expected: columns.len(),
                    got: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                if col.kind != ColumnKind::MinMax {
                    continue;
                }
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value in column {}",
                        col.name
                    )));
                }
                col.min = Some(col.min.map_or(v, |m| m.min(v)));
                col.max = Some(col.max.map_or(v, |m| m.max(v)));
            }
        }
        if !saw_rows {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(FeatureScaler { version: SCALER_VERSION, columns })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ScalerColumn] {
        &self.columns
    }

    pub fn scale_col(&self, idx: usize, v: f64) -> f64 {
        let col = &self.columns[idx];
        match col.kind {
            ColumnKind::Passthrough => v,
            ColumnKind::SymmetricUnit => (v + 1.0) / 2.0,
            ColumnKind::MinMax => {
                let (min, max) = (col.min.unwrap_or(0.0), col.max.unwrap_or(0.0));
                if max > min {
                    ((v - min) / (max - min)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse of [`scale_col`] where one exists; a clamped or
    /// degenerate value maps back onto the training range boundary.
    pub fn unscale_col(&self, idx: usize, v: f64) -> f64 {
        let col = &self.columns[idx];
        match col.kind {
            ColumnKind::Passthrough => v,
            ColumnKind::SymmetricUnit => v * 2.0 - 1.0,
            ColumnKind::MinMax => {
                let (min, max) = (col.min.unwrap_or(0.0), col.max.unwrap_or(0.0));
                min + v.clamp(0.0, 1.0) * (max - min)
            }
        }
    }

    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::Shape {
                context: "scaler transform row",
                expected: self.columns.len(),
                got: raw.len(),
            });
        }
        Ok((0..raw.len()).map(|i| self.scale_col(i, raw[i])).collect())
    }
}

pub fn fog_feature_layout() -> FeatureLayout {
    let mut layout: FeatureLayout = vec![
        ("vx".into(), ColumnKind::MinMax),
        ("vy".into(), ColumnKind::MinMax),
        ("vz".into(), ColumnKind::MinMax),
    ];
    for d in 0..DAYS_PER_WEEK {
        layout.push((format!("dow{d}"), ColumnKind::Passthrough));
    }
    layout.push(("sin_t".into(), ColumnKind::SymmetricUnit));
    layout.push(("cos_t".into(), ColumnKind::SymmetricUnit));
    layout
}

pub fn cost_step_layout() -> FeatureLayout {
    let mut layout: FeatureLayout = vec![
        ("vx".into(), ColumnKind::MinMax),
        ("vy".into(), ColumnKind::MinMax),
        ("vz".into(), ColumnKind::MinMax),
        ("fx".into(), ColumnKind::MinMax),
        ("fy".into(), ColumnKind::MinMax),
        ("fz".into(), ColumnKind::MinMax),
        ("dist_m".into(), ColumnKind::MinMax),
        ("sin_t".into(), ColumnKind::SymmetricUnit),
        ("cos_t".into(), ColumnKind::SymmetricUnit),
    ];
    for d in 0..DAYS_PER_WEEK {
        layout.push((format!("dow{d}"), ColumnKind::Passthrough));
    }
    layout.push(("cost_ms".into(), ColumnKind::MinMax));
    layout
}

/// Index of the cost column in [`cost_step_layout`]; the regression
/// target is scaled with this column's statistics.
pub const COST_COL: usize = COST_STEP_FEATURES - 1;

/// Unscaled fog-classifier row for a report at (lat, lon, t).
pub fn fog_raw_row(lat: f64, lon: f64, t: u64, epoch_weekday: u8) -> [f64; FOG_FEATURES] {
    let [x, y, z] = geo_to_cartesian(lat, lon);
    let (sin_t, cos_t, dow) = time_features(t, epoch_weekday);
    let mut row = [0.0; FOG_FEATURES];
    row[0] = x;
    row[1] = y;
    row[2] = z;
    row[3 + dow] = 1.0;
    row[10] = sin_t;
    row[11] = cos_t;
    row
}

/// Unscaled cost-window step from its parts; shared by dataset building
/// and autoregressive route planning.
pub fn cost_raw_step_parts(
    vpos: GeoPoint,
    fpos: GeoPoint,
    dist_m: f64,
    t: u64,
    cost_ms: f64,
    epoch_weekday: u8,
) -> [f64; COST_STEP_FEATURES] {
    let [vx, vy, vz] = geo_to_cartesian(vpos.lat, vpos.lon);
    let [fx, fy, fz] = geo_to_cartesian(fpos.lat, fpos.lon);
    let (sin_t, cos_t, dow) = time_features(t, epoch_weekday);
    let mut row = [0.0; COST_STEP_FEATURES];
    row[0] = vx;
    row[1] = vy;
    row[2] = vz;
    row[3] = fx;
    row[4] = fy;
    row[5] = fz;
    row[6] = dist_m;
    row[7] = sin_t;
    row[8] = cos_t;
    row[9 + dow] = 1.0;
    row[COST_COL] = cost_ms;
    row
}

/// Unscaled cost-window step for a covered record.
pub fn cost_raw_step(rec: &InteractionRecord, epoch_weekday: u8) -> Result<[f64; COST_STEP_FEATURES]> {
    let (Some(flat), Some(flon), Some(dist), Some(cost)) =
        (rec.flat, rec.flon, rec.dist_m, rec.cost_ms)
    else {
        return Err(Error::InvalidInput(format!(
            "cost step needs a covered record (vehicle {} t {})",
            rec.vehicle_id, rec.t
        )));
    };
    Ok(cost_raw_step_parts(
        rec.pos(),
        GeoPoint { lat: flat, lon: flon },
        dist,
        rec.t,
        cost,
        epoch_weekday,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMeta {
    pub vehicle_id: String,
    pub t: u64,
    pub pos: GeoPoint,
}

/// One classifier sample: scaled features and the fog class, where
/// class `num_fogs` is the synthetic "no coverage" class.
#[derive(Clone, Debug)]
pub struct FogSample {
    pub features: Vec<f64>,
    pub class: usize,
    pub meta: SampleMeta,
}

/// Class index for a record: its fog id, or `num_fogs` when uncovered.
pub fn fog_class(rec: &InteractionRecord, num_fogs: usize) -> Result<usize> {
    match rec.fog_id {
        None => Ok(num_fogs),
        Some(f) if (f as usize) < num_fogs => Ok(f as usize),
        Some(f) => Err(Error::InvalidInput(format!(
            "record references fog {f} outside a {num_fogs}-fog network"
        ))),
    }
}

/// Unscaled classifier rows for every record, in input order.
pub fn fog_raw_rows(
    records: &[InteractionRecord],
    num_fogs: usize,
    epoch_weekday: u8,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Vec<SampleMeta>)> {
    let mut rows = Vec::with_capacity(records.len());
    let mut classes = Vec::with_capacity(records.len());
    let mut metas = Vec::with_capacity(records.len());
    for rec in records {
        rows.push(fog_raw_row(rec.vlat, rec.vlon, rec.t, epoch_weekday).to_vec());
        classes.push(fog_class(rec, num_fogs)?);
        metas.push(SampleMeta {
            vehicle_id: rec.vehicle_id.clone(),
            t: rec.t,
            pos: rec.pos(),
        });
    }
    Ok((rows, classes, metas))
}

/// Scaled classifier dataset under an already-fitted scaler.
pub fn build_fog_dataset(
    records: &[InteractionRecord],
    scaler: &FeatureScaler,
    num_fogs: usize,
    epoch_weekday: u8,
) -> Result<Vec<FogSample>> {
    let (rows, classes, metas) = fog_raw_rows(records, num_fogs, epoch_weekday)?;
    rows.into_iter()
        .zip(classes)
        .zip(metas)
        .map(|((row, class), meta)| {
            Ok(FogSample { features: scaler.transform(&row)?, class, meta })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowMeta {
    pub vehicle_id: String,
    /// Timestamp and position of the target report.
    pub t: u64,
    pub pos: GeoPoint,
    /// Unscaled target cost in ms.
    pub cost_ms: f64,
}

/// Cost window before scaling: `steps[k]` holds the raw step features
/// of the k-th oldest history record; padded or uncovered history slots
/// are all-zero with mask false.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCostWindow {
    pub steps: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub target_cost_ms: f64,
    pub meta: WindowMeta,
}

/// Scaled window ready for the sequence model.
#[derive(Clone, Debug, PartialEq)]
pub struct CostWindow {
    pub steps: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub target_scaled: f64,
    pub meta: WindowMeta,
}

/// Builds one raw window per covered record: the `window` reports that
/// preceded it for the same vehicle, oldest first, front zero-padded
/// when history is short. Uncovered history slots stay padded (masked);
/// uncovered records yield no target. Output is ordered by
/// (vehicle_id, t).
pub fn build_raw_cost_windows(
    records: &[InteractionRecord],
    window: usize,
    epoch_weekday: u8,
) -> Result<Vec<RawCostWindow>> {
    if window == 0 {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    let mut by_vehicle: BTreeMap<&str, Vec<&InteractionRecord>> = BTreeMap::new();
    for rec in records {
        by_vehicle.entry(&rec.vehicle_id).or_default().push(rec);
    }
    let mut out = Vec::new();
    for (_, mut recs) in by_vehicle {
        recs.sort_by_key(|r| r.t);
        for j in 0..recs.len() {
            let target = recs[j];
            if target.no_coverage {
                continue;
            }
            let mut steps = Vec::with_capacity(window);
            let mut mask = Vec::with_capacity(window);
            let hist_start = j.saturating_sub(window);
            for _ in 0..window - (j - hist_start) {
                steps.push(vec![0.0; COST_STEP_FEATURES]);
                mask.push(false);
            }
            for h in &recs[hist_start..j] {
                if h.no_coverage {
                    steps.push(vec![0.0; COST_STEP_FEATURES]);
                    mask.push(false);
                } else {
                    steps.push(cost_raw_step(h, epoch_weekday)?.to_vec());
                    mask.push(true);
                }
            }
            out.push(RawCostWindow {
                steps,
                mask,
                target_cost_ms: target.cost_ms.unwrap(),
                meta: WindowMeta {
                    vehicle_id: target.vehicle_id.clone(),
                    t: target.t,
                    pos: target.pos(),
                    cost_ms: target.cost_ms.unwrap(),
                },
            });
        }
    }
    Ok(out)
}

/// Applies a fitted scaler to raw windows. Padded steps stay all-zero;
/// the target is scaled with the cost column's statistics.
pub fn scale_cost_windows(raw: &[RawCostWindow], scaler: &FeatureScaler) -> Result<Vec<CostWindow>> {
    if scaler.width() != COST_STEP_FEATURES {
        return Err(Error::Shape {
            context: "cost window scaler",
            expected: COST_STEP_FEATURES,
            got: scaler.width(),
        });
    }
    raw.iter()
        .map(|w| {
            let steps = w
                .steps
                .iter()
                .zip(&w.mask)
                .map(|(s, &valid)| {
                    if valid {
                        scaler.transform(s)
                    } else {
                        Ok(vec![0.0; COST_STEP_FEATURES])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CostWindow {
                steps,
                mask: w.mask.clone(),
                target_scaled: scaler.scale_col(COST_COL, w.target_cost_ms),
                meta: w.meta.clone(),
            })
        })
        .collect()
}

/// Raw windows -> fitted-scaler windows in one call.
pub fn build_cost_windows(
    records: &[InteractionRecord],
    scaler: &FeatureScaler,
    window: usize,
    epoch_weekday: u8,
) -> Result<Vec<CostWindow>> {
    let raw = build_raw_cost_windows(records, window, epoch_weekday)?;
    scale_cost_windows(&raw, scaler)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.70, val: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput(format!("split ratios out of range: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder split sizes for n items; `rotation` breaks exact
/// remainder ties (train, val, test cycle) so leftovers don't always
/// land on the same split.
fn split_sizes(n: usize, ratios: &SplitRatios, rotation: usize) -> [usize; 3] {
    let targets = [ratios.train * n as f64, ratios.val * n as f64, ratios.test * n as f64];
    let mut sizes = [0usize; 3];
    let mut rems = [0f64; 3];
    for i in 0..3 {
        sizes[i] = targets[i].floor() as usize;
        rems[i] = targets[i] - sizes[i] as f64;
    }
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        rems[b]
            .partial_cmp(&rems[a])
            .unwrap()
            .then(((a + rotation) % 3).cmp(&((b + rotation) % 3)))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

/// Random index split with largest-remainder sizing: sizes are within
/// one item of exact proportions and the three parts partition 0..n.
pub fn split_indices(n: usize, ratios: &SplitRatios, seed: u64) -> Result<SplitIndices> {
    ratios.validate()?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let sizes = split_sizes(n, ratios, 0);
    let val_end = sizes[0] + sizes[1];
    let mut split = SplitIndices {
        train: idx[..sizes[0]].to_vec(),
        val: idx[sizes[0]..val_end].to_vec(),
        test: idx[val_end..].to_vec(),
    };
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified split: each class is split separately (largest remainder,
/// rotating tie-break), so per-class counts stay within one of exact
/// proportions in every part.
pub fn split_indices_stratified(
    labels: &[usize],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitIndices> {
    ratios.validate()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = seeded_rng(seed);
    let mut split = SplitIndices::default();
    for (rotation, (_, mut idx)) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        let sizes = split_sizes(idx.len(), ratios, rotation);
        let val_end = sizes[0] + sizes[1];
        split.train.extend_from_slice(&idx[..sizes[0]]);
        split.val.extend_from_slice(&idx[sizes[0]..val_end]);
        split.test.extend_from_slice(&idx[val_end..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Clones samples into (train, val, test) following [`split_indices`].
pub fn split_dataset<T: Clone>(samples: &[T], ratios: &SplitRatios, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let idx = split_indices(samples.len(), ratios, seed)?;
    let take = |ids: &[usize]| ids.iter().map(|&i| samples[i].clone()).collect();
    Ok((take(&idx.train), take(&idx.val), take(&idx.test)))
}
