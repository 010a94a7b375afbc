//! Metrics and baselines used to judge the learned predictors:
//! confusion/accuracy, MAE, Pearson correlation, brute-force KNN
//! comparisons, urban/suburban breakdowns, hourly profiles, and a
//! windowless feedforward baseline for the cost model.

use crate::error::{Error, Result};
use crate::features::{CostWindow, FogSample, SampleMeta, WindowMeta};
use crate::fogsim::RegionTag;
use crate::geo::{GeoArea, GeoPoint};
use crate::nncore::{
    mean_loss, train, Activation, DenseSample, Loss, Mlp, SeqRegressor, TrainConfig,
    TrainingHistory,
};
use crate::rng::seeded_rng;
use serde::Serialize;

/// Neighbor counts used for the KNN reference baselines.
pub const KNN_CLASSIFY_K: usize = 4;
pub const KNN_REGRESS_K: usize = 6;

/// Reference results published for a large-scale metropolitan taxi
/// deployment. Reported alongside desk-scale runs for orientation;
/// never used as pass/fail gates, since the corpora differ.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReferenceMetrics {
    pub classifier_accuracy: f64,
    pub knn4_accuracy: f64,
    pub seq_mae_scaled: f64,
    pub ff_mae_scaled: f64,
    pub knn6_mae_scaled: f64,
    pub urban_accuracy: f64,
    pub suburban_accuracy: f64,
    pub urban_mae_scaled: f64,
    pub suburban_mae_scaled: f64,
}

pub const REFERENCE: ReferenceMetrics = ReferenceMetrics {
    classifier_accuracy: 0.992,
    knn4_accuracy: 0.9842,
    seq_mae_scaled: 0.0346,
    ff_mae_scaled: 0.0518,
    knn6_mae_scaled: 0.0517,
    urban_accuracy: 0.9834,
    suburban_accuracy: 0.9965,
    urban_mae_scaled: 0.028,
    suburban_mae_scaled: 0.041,
};

/// Row-major class confusion counts: rows are actual classes, columns
/// predicted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { classes, counts: vec![0; classes * classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        assert!(actual < self.classes && predicted < self.classes);
        self.counts[actual * self.classes + predicted] += 1;
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|c| self.count(c, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Recall per actual class; None for classes never observed.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let row: u64 = (0..self.classes).map(|p| self.count(c, p)).sum();
                (row > 0).then(|| self.count(c, c) as f64 / row as f64)
            })
            .collect()
    }
}

pub fn accuracy_and_confusion(
    actual: &[usize],
    predicted: &[usize],
    classes: usize,
) -> Result<(f64, ConfusionMatrix)> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            context: "accuracy label vectors",
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= classes || p >= classes {
            return Err(Error::InvalidInput(format!(
                "class out of range: actual {a}, predicted {p}, classes {classes}"
            )));
        }
        cm.record(a, p);
    }
    Ok((cm.accuracy(), cm))
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape {
            context: "mae vectors",
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("mae over empty vectors".into()));
    }
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / predicted.len() as f64)
}

/// Pearson correlation; None when fewer than two points or either side
/// has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the k nearest training rows by Euclidean distance;
/// distance ties break toward the lower index.
fn knn_indices(train: &[Vec<f64>], query: &[f64], k: usize) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(Error::InvalidInput("knn needs k >= 1".into()));
    }
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != query.len() {
                return Err(Error::Shape {
                    context: "knn row",
                    expected: query.len(),
                    got: row.len(),
                });
            }
            Ok((sq_dist(row, query), i))
        })
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Majority vote over the k nearest neighbors (k capped at the training
/// size); vote ties resolve to the smallest class id.
pub fn knn_classify(
    train: &[Vec<f64>],
    labels: &[usize],
    query: &[f64],
    k: usize,
) -> Result<usize> {
    if train.len() != labels.len() {
        return Err(Error::Shape {
            context: "knn labels",
            expected: train.len(),
            got: labels.len(),
        });
    }
    let picked = knn_indices(train, query, k)?;
    let mut votes: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for i in picked {
        *votes.entry(labels[i]).or_default() += 1;
    }
    // BTreeMap iterates class ids ascending; strict > keeps the smallest
    // id among tied vote counts.
    let mut best = (usize::MAX, 0usize);
    for (class, n) in votes {
        if n > best.1 {
            best = (class, n);
        }
    }
    Ok(best.0)
}

/// Mean target over the k nearest neighbors (k capped at the training
/// size).
pub fn knn_regress(train: &[Vec<f64>], targets: &[f64], query: &[f64], k: usize) -> Result<f64> {
    if train.len() != targets.len() {
        return Err(Error::Shape {
            context: "knn targets",
            expected: train.len(),
            got: targets.len(),
        });
    }
    let picked = knn_indices(train, query, k)?;
    Ok(picked.iter().map(|&i| targets[i]).sum::<f64>() / picked.len() as f64)
}

/// KNN accuracy over scaled fog samples.
pub fn knn_fog_accuracy(train: &[FogSample], test: &[FogSample], k: usize) -> Result<f64> {
    let rows: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let labels: Vec<usize> = train.iter().map(|s| s.class).collect();
    let mut correct = 0usize;
    for s in test {
        if knn_classify(&rows, &labels, &s.features, k)? == s.class {
            correct += 1;
        }
    }
    if test.is_empty() {
        return Err(Error::InvalidInput("knn accuracy over empty test set".into()));
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Features the windowless baselines see: the most recent valid step of
/// a window, or all zeros when the whole window is padding.
pub fn last_valid_step(w: &CostWindow) -> Vec<f64> {
    match w.mask.iter().rposition(|&m| m) {
        Some(i) => w.steps[i].clone(),
        None => vec![0.0; w.steps[0].len()],
    }
}

/// KNN regression MAE over scaled cost windows (last-valid-step
/// features).
pub fn knn_window_mae(train: &[CostWindow], test: &[CostWindow], k: usize) -> Result<f64> {
    let rows: Vec<Vec<f64>> = train.iter().map(last_valid_step).collect();
    let targets: Vec<f64> = train.iter().map(|w| w.target_scaled).collect();
    let preds: Vec<f64> = test
        .iter()
        .map(|w| knn_regress(&rows, &targets, &last_valid_step(w), k))
        .collect::<Result<_>>()?;
    let actual: Vec<f64> = test.iter().map(|w| w.target_scaled).collect();
    mae(&preds, &actual)
}

fn ff_samples(windows: &[CostWindow]) -> Vec<DenseSample<f64>> {
    windows
        .iter()
        .map(|w| DenseSample { input: last_valid_step(w), target: vec![w.target_scaled] })
        .collect()
}

/// Trains the feedforward baseline: same per-step features, no history.
pub fn train_ff_baseline(
    train_w: &[CostWindow],
    val_w: &[CostWindow],
    hidden: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Mlp<f64>, TrainingHistory)> {
    if train_w.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let width = train_w[0].steps[0].len();
    let net = Mlp::new(
        &[width, hidden, 1],
        Activation::Linear,
        Loss::MeanAbsErr,
        &mut seeded_rng(seed),
    )?;
    train(net, &ff_samples(train_w), &ff_samples(val_w), cfg, seed.wrapping_add(1))
}

/// MAE of an MLP over windows (last-valid-step features). MAE loss on
/// scalar targets is exactly the mean absolute error.
pub fn mlp_window_mae(net: &Mlp<f64>, windows: &[CostWindow]) -> Result<f64> {
    mean_loss(net, &ff_samples(windows))
}

/// MAE of the sequence model over scaled windows.
pub fn seq_window_mae(net: &SeqRegressor<f64>, windows: &[CostWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("mae over empty window set".into()));
    }
    let mut total = 0.0;
    for w in windows {
        total += (net.forward(&w.steps, &w.mask)? - w.target_scaled).abs();
    }
    Ok(total / windows.len() as f64)
}

/// A point is urban when any of the given areas contains it.
pub fn region_of(pos: GeoPoint, urban_areas: &[GeoArea]) -> RegionTag {
    if urban_areas.iter().any(|a| a.contains(pos)) {
        RegionTag::Urban
    } else {
        RegionTag::Suburban
    }
}

/// One metric reported per region; None when that region has no
/// samples.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct RegionBreakdown {
    pub urban: Option<f64>,
    pub urban_count: usize,
    pub suburban: Option<f64>,
    pub suburban_count: usize,
}

/// Classification accuracy split by the region of each sample's
/// position.
pub fn accuracy_by_region(
    metas: &[SampleMeta],
    actual: &[usize],
    predicted: &[usize],
    urban_areas: &[GeoArea],
) -> Result<RegionBreakdown> {
    if metas.len() != actual.len() || metas.len() != predicted.len() {
        return Err(Error::Shape {
            context: "region accuracy inputs",
            expected: metas.len(),
            got: actual.len().min(predicted.len()),
        });
    }
    let mut hit = [0usize; 2];
    let mut n = [0usize; 2];
    for i in 0..metas.len() {
        let r = (region_of(metas[i].pos, urban_areas) == RegionTag::Suburban) as usize;
        n[r] += 1;
        hit[r] += (actual[i] == predicted[i]) as usize;
    }
    let frac = |h: usize, c: usize| (c > 0).then(|| h as f64 / c as f64);
    Ok(RegionBreakdown {
        urban: frac(hit[0], n[0]),
        urban_count: n[0],
        suburban: frac(hit[1], n[1]),
        suburban_count: n[1],
    })
}

/// Regression MAE split by the region of each window's target position.
pub fn mae_by_region(
    metas: &[WindowMeta],
    predicted: &[f64],
    actual: &[f64],
    urban_areas: &[GeoArea],
) -> Result<RegionBreakdown> {
    if metas.len() != actual.len() || metas.len() != predicted.len() {
        return Err(Error::Shape {
            context: "region mae inputs",
            expected: metas.len(),
            got: actual.len().min(predicted.len()),
        });
    }
    let mut err = [0f64; 2];
    let mut n = [0usize; 2];
    for i in 0..metas.len() {
        let r = (region_of(metas[i].pos, urban_areas) == RegionTag::Suburban) as usize;
        n[r] += 1;
        err[r] += (predicted[i] - actual[i]).abs();
    }
    let mean = |e: f64, c: usize| (c > 0).then(|| e / c as f64);
    Ok(RegionBreakdown {
        urban: mean(err[0], n[0]),
        urban_count: n[0],
        suburban: mean(err[1], n[1]),
        suburban_count: n[1],
    })
}

/// Mean value per hour of day; hours with no samples are omitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HourlyCurve {
    pub hours: Vec<u8>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn hourly_mean(ts: &[u64], values: &[f64]) -> Result<HourlyCurve> {
    if ts.len() != values.len() {
        return Err(Error::Shape {
            context: "hourly curve inputs",
            expected: ts.len(),
            got: values.len(),
        });
    }
    let mut sum = [0f64; 24];
    let mut n = [0usize; 24];
    for (&t, &v) in ts.iter().zip(values) {
        let h = ((t % 86_400) / 3_600) as usize;
        sum[h] += v;
        n[h] += 1;
    }
    let mut curve = HourlyCurve::default();
    for h in 0..24 {
        if n[h] > 0 {
            curve.hours.push(h as u8);
            curve.means.push(sum[h] / n[h] as f64);
            curve.counts.push(n[h]);
        }
    }
    Ok(curve)
}

/// Pearson correlation of two hourly curves over their common hours;
/// None with fewer than two shared hours or a flat curve.
pub fn curve_correlation(a: &HourlyCurve, b: &HourlyCurve) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, h) in a.hours.iter().enumerate() {
        if let Some(j) = b.hours.iter().position(|bh| bh == h) {
            xs.push(a.means[i]);
            ys.push(b.means[j]);
        }
    }
    pearson(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WindowMeta;

    #[test]
    fn confusion_counts_and_accuracy() {
        let (acc, cm) =
            accuracy_and_confusion(&[0, 0, 1, 2, 2, 2], &[0, 1, 1, 2, 2, 0], 3).unwrap();
        assert_eq!(cm.count(0, 0), 1);
        assert_eq!(cm.count(0, 1), 1);
        assert_eq!(cm.count(2, 0), 1);
        assert_eq!(cm.total(), 6);
        assert_eq!(cm.correct(), 4);
        assert!((acc - 4.0 / 6.0).abs() < 1e-15);
        let recall = cm.per_class_recall();
        assert_eq!(recall[0], Some(0.5));
        assert_eq!(recall[1], Some(1.0));
        assert!((recall[2].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(accuracy_and_confusion(&[3], &[0], 3).is_err());
        assert!(accuracy_and_confusion(&[0, 1], &[0], 3).is_err());
    }

    #[test]
    fn mae_and_pearson_oracles() {
        assert_eq!(mae(&[1.0, 2.0, 5.0], &[1.0, 4.0, 1.0]).unwrap(), 2.0);
        assert!(mae(&[], &[]).is_err());
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // hand-computed: cov 1, var 2 and 2 -> 0.5
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn knn_votes_and_ties() {
        let train = vec![
            vec![0.0, 0.0], // class 0
            vec![1.0, 0.0], // class 1
            vec![0.0, 1.0], // class 1
            vec![5.0, 5.0], // class 2
        ];
        let labels = vec![0, 1, 1, 2];
        // nearest 3 of origin-ish query: classes {0, 1, 1} -> 1
        assert_eq!(knn_classify(&train, &labels, &[0.1, 0.1], 3).unwrap(), 1);
        // k=2: classes {0, 1} tie -> smaller class id
        assert_eq!(knn_classify(&train, &labels, &[0.1, 0.1], 2).unwrap(), 0);
        // equidistant rows break toward the lower index
        let eq = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(knn_classify(&eq, &[7, 3], &[0.0, 0.0], 1).unwrap(), 7);
        // k larger than the training set uses everything
        assert_eq!(knn_classify(&train, &labels, &[9.0, 9.0], 10).unwrap(), 1);
        assert!(knn_classify(&[], &[], &[0.0], 1).is_err());

        let targets = vec![10.0, 20.0, 30.0, 40.0];
        assert_eq!(knn_regress(&train, &targets, &[0.4, 0.0], 2).unwrap(), 15.0);
    }

    fn window(mask: Vec<bool>, cost: f64, t: u64) -> CostWindow {
        let steps = mask
            .iter()
            .enumerate()
            .map(|(i, &m)| if m { vec![i as f64 + 1.0, 0.5] } else { vec![0.0, 0.0] })
            .collect();
        CostWindow {
            steps,
            mask,
            target_scaled: cost,
            meta: WindowMeta {
                vehicle_id: "v".into(),
                t,
                pos: GeoPoint { lat: 31.2, lon: 121.4 },
                cost_ms: cost * 100.0,
            },
        }
    }

    #[test]
    fn last_valid_step_selection() {
        let w = window(vec![true, false, true, false], 0.5, 0);
        assert_eq!(last_valid_step(&w), vec![3.0, 0.5]);
        let empty = window(vec![false, false], 0.5, 0);
        assert_eq!(last_valid_step(&empty), vec![0.0, 0.0]);
    }

    #[test]
    fn hourly_curves_align() {
        let ts = vec![0, 1800, 3600, 90_000]; // 0h, 0h, 1h, 1h next day
        let vals = vec![1.0, 3.0, 5.0, 7.0];
        let c = hourly_mean(&ts, &vals).unwrap();
        assert_eq!(c.hours, vec![0, 1]);
        assert_eq!(c.means, vec![2.0, 6.0]);
        assert_eq!(c.counts, vec![2, 2]);

        let d = hourly_mean(&[3600, 7200, 0], &[6.5, 9.0, 2.0]).unwrap();
        // common hours 0 and 1 only
        let r = curve_correlation(&c, &d).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        // single shared hour -> None
        let e = hourly_mean(&[0], &[1.0]).unwrap();
        assert_eq!(curve_correlation(&c, &e), None);
    }

    #[test]
    fn region_split_counts() {
        use crate::geo::GeoRect;
        let urban = vec![GeoArea::Rect(GeoRect::new(31.0, 121.0, 31.1, 121.1).unwrap())];
        let inside = GeoPoint { lat: 31.05, lon: 121.05 };
        let outside = GeoPoint { lat: 31.5, lon: 121.5 };
        assert_eq!(region_of(inside, &urban), RegionTag::Urban);
        assert_eq!(region_of(outside, &urban), RegionTag::Suburban);

        let metas = vec![
            SampleMeta { vehicle_id: "a".into(), t: 0, pos: inside },
            SampleMeta { vehicle_id: "a".into(), t: 1, pos: outside },
            SampleMeta { vehicle_id: "a".into(), t: 2, pos: outside },
        ];
        let b = accuracy_by_region(&metas, &[1, 1, 1], &[1, 1, 0], &urban).unwrap();
        assert_eq!(b.urban, Some(1.0));
        assert_eq!((b.urban_count, b.suburban_count), (1, 2));
        assert_eq!(b.suburban, Some(0.5));
        // no urban samples -> None
        let b = accuracy_by_region(&metas[1..], &[1, 1], &[1, 0], &urban).unwrap();
        assert_eq!(b.urban, None);

        let wm: Vec<WindowMeta> = metas
            .iter()
            .map(|m| WindowMeta { vehicle_id: m.vehicle_id.clone(), t: m.t, pos: m.pos, cost_ms: 1.0 })
            .collect();
        let r = mae_by_region(&wm, &[0.5, 0.25, 0.75], &[0.5, 0.5, 0.5], &urban).unwrap();
        assert_eq!(r.urban, Some(0.0));
        assert_eq!(r.suburban, Some(0.25));
    }

    #[test]
    fn ff_baseline_learns_identity_feature() {
        // target equals a coordinate of the last valid step; the
        // baseline should fit it far better than the mean.
        let mut rng = crate::rng::seeded_rng(11);
        use rand::Rng;
        let mut windows = Vec::new();
        for i in 0..200 {
            let v: f64 = rng.gen_range(0.0..1.0);
            let mask = vec![i % 7 != 0, true];
            let mut w = window(mask, v, i);
            let last = w.mask.iter().rposition(|&m| m).unwrap();
            w.steps[last] = vec![v, 0.5];
            windows.push(w);
        }
        let (train_w, rest) = windows.split_at(150);
        let cfg = TrainConfig {
            max_epochs: 200,
            batch_size: 32,
            patience: 200,
            adam: crate::nncore::AdamConfig { alpha: 1e-2, ..Default::default() },
        };
        let (net, hist) = train_ff_baseline(train_w, &rest[..25], 8, &cfg, 3).unwrap();
        assert!(!hist.epochs.is_empty());
        let err = mlp_window_mae(&net, &rest[25..]).unwrap();
        assert!(err < 0.15, "baseline failed to fit identity: mae {err}");
    }
}
