//! The two learned predictors and their disk format.
//!
//! A fog predictor maps (lat, lon, t) to a fog class, with class
//! `num_fogs` meaning "no coverage here". A cost predictor regresses
//! the next scaled service cost from a window of recent interactions.
//! Both carry their own feature scaler and the weekday labeling of
//! t = 0, so a loaded model is usable without the training corpus.
//!
//! Bundles are versioned JSON documents; weights travel as base64 of
//! the raw little-endian f64 tensor bytes, in the network's canonical
//! tensor order, so a save/load round trip is bit-exact.

use crate::error::{Error, Result};
use crate::eval::{accuracy_and_confusion, ConfusionMatrix};
use crate::features::{
    build_raw_cost_windows, fog_raw_row, fog_raw_rows, scale_cost_windows, split_indices,
    split_indices_stratified, cost_step_layout, fog_feature_layout, CostWindow, FeatureScaler,
    SampleMeta, SplitIndices, SplitRatios, COST_COL, COST_STEP_FEATURES, DEFAULT_WINDOW,
    FOG_FEATURES,
};
use crate::fogsim::FogNetwork;
use crate::geo::GeoPoint;
use crate::nncore::{
    train, Activation, AdamConfig, DenseSample, Loss, Mlp, Network, SeqRegressor, SeqSample,
    TrainConfig, TrainingHistory,
};
use crate::rng::{derive_seed, seeded_rng};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const BUNDLE_VERSION: u32 = 1;
const FOG_KIND: &str = "fog_classifier";
const COST_KIND: &str = "cost_regressor";

// Seed streams shared by both trainers (callers hand each trainer its
// own master seed).
const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// A fog node's identity and position, as much as the predictors need
/// to build features at planning time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogSite {
    pub fog_id: u32,
    pub lat: f64,
    pub lon: f64,
}

impl FogSite {
    pub fn pos(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FogModelConfig {
    pub hidden: Vec<usize>,
    /// Which weekday t = 0 falls on (0..6, caller's labeling).
    pub epoch_weekday: u8,
    pub split: SplitRatios,
    pub train: TrainConfig,
}

impl Default for FogModelConfig {
    fn default() -> Self {
        FogModelConfig {
            hidden: vec![100, 100, 100],
            epoch_weekday: 0,
            split: SplitRatios::default(),
            train: TrainConfig {
                max_epochs: 150,
                batch_size: 64,
                patience: 20,
                adam: AdamConfig::default(),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModelConfig {
    pub lstm_hidden: Vec<usize>,
    pub head_hidden: usize,
    pub window: usize,
    pub epoch_weekday: u8,
    pub split: SplitRatios,
    pub train: TrainConfig,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            lstm_hidden: vec![32, 32],
            head_hidden: 20,
            window: DEFAULT_WINDOW,
            epoch_weekday: 0,
            split: SplitRatios::default(),
            train: TrainConfig {
                max_epochs: 80,
                batch_size: 64,
                patience: 12,
                adam: AdamConfig::default(),
            },
        }
    }
}

/// Classifier over fog classes 0..num_fogs, plus the no-coverage class.
#[derive(Clone, Debug)]
pub struct FogPredictor {
    net: Mlp<f64>,
    scaler: FeatureScaler,
    num_fogs: usize,
    epoch_weekday: u8,
    fog_sites: Vec<FogSite>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FogPrediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

impl FogPredictor {
    pub fn predict(&self, lat: f64, lon: f64, t: u64) -> Result<FogPrediction> {
        GeoPoint::new(lat, lon)?;
        let row = fog_raw_row(lat, lon, t, self.epoch_weekday);
        let probs = self.net.forward(&self.scaler.transform(&row)?)?;
        Ok(FogPrediction { class: argmax(&probs), probs })
    }

    pub fn predict_class(&self, lat: f64, lon: f64, t: u64) -> Result<usize> {
        Ok(self.predict(lat, lon, t)?.class)
    }

    pub fn num_fogs(&self) -> usize {
        self.num_fogs
    }

    /// Class index that means "no fog covers this point".
    pub fn no_coverage_class(&self) -> usize {
        self.num_fogs
    }

    pub fn num_classes(&self) -> usize {
        self.num_fogs + 1
    }

    pub fn epoch_weekday(&self) -> u8 {
        self.epoch_weekday
    }

    pub fn fog_sites(&self) -> &[FogSite] {
        &self.fog_sites
    }

    pub fn site(&self, class: usize) -> Option<&FogSite> {
        self.fog_sites.get(class)
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }
}

/// What the fog trainer measured, alongside the model itself.
#[derive(Clone, Debug)]
pub struct FogReport {
    pub split: SplitIndices,
    pub history: TrainingHistory,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Metadata of test samples, index-aligned with `test_actual`.
    pub test_meta: Vec<SampleMeta>,
    pub test_actual: Vec<usize>,
    pub test_predicted: Vec<usize>,
}

/// Trains the fog classifier on interaction records against the fog
/// network they were recorded on. Stratified split; scaler fitted on
/// the training split only.
pub fn train_fog_predictor(
    records: &[crate::fogsim::InteractionRecord],
    fog_net: &FogNetwork,
    cfg: &FogModelConfig,
    seed: u64,
) -> Result<(FogPredictor, FogReport)> {
    let num_fogs = fog_net.len();
    let classes = num_fogs + 1;
    let (rows, labels, metas) = fog_raw_rows(records, num_fogs, cfg.epoch_weekday)?;
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    {
        let seen: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        if seen.len() < 2 {
            return Err(Error::InvalidInput(
                "training needs records from at least two outcome classes".into(),
            ));
        }
    }
    let split = split_indices_stratified(&labels, &cfg.split, derive_seed(seed, SPLIT_STREAM))?;
    let train_rows = split.train.iter().map(|&i| rows[i].as_slice());
    let scaler = FeatureScaler::fit(&fog_feature_layout(), train_rows)?;

    let sample = |i: usize| -> Result<DenseSample<f64>> {
        let mut target = vec![0.0; classes];
        target[labels[i]] = 1.0;
        Ok(DenseSample { input: scaler.transform(&rows[i])?, target })
    };
    let train_set: Vec<_> = split.train.iter().map(|&i| sample(i)).collect::<Result<_>>()?;
    let val_set: Vec<_> = split.val.iter().map(|&i| sample(i)).collect::<Result<_>>()?;

    let mut dims = vec![FOG_FEATURES];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(classes);
    let net = Mlp::new(
        &dims,
        Activation::Softmax,
        Loss::CrossEntropy,
        &mut seeded_rng(derive_seed(seed, INIT_STREAM)),
    )?;
    let (net, history) = train(
        net,
        &train_set,
        &val_set,
        &cfg.train,
        derive_seed(seed, SHUFFLE_STREAM),
    )?;

    let predictor = FogPredictor {
        net,
        scaler,
        num_fogs,
        epoch_weekday: cfg.epoch_weekday,
        fog_sites: fog_net
            .nodes()
            .iter()
            .map(|n| FogSite { fog_id: n.fog_id, lat: n.lat, lon: n.lon })
            .collect(),
    };

    let mut test_actual = Vec::with_capacity(split.test.len());
    let mut test_predicted = Vec::with_capacity(split.test.len());
    let mut test_meta = Vec::with_capacity(split.test.len());
    for &i in &split.test {
        test_actual.push(labels[i]);
        let probs = predictor.net.forward(&predictor.scaler.transform(&rows[i])?)?;
        test_predicted.push(argmax(&probs));
        test_meta.push(metas[i].clone());
    }
    let (test_accuracy, confusion) = accuracy_and_confusion(&test_actual, &test_predicted, classes)?;

    Ok((
        predictor,
        FogReport { split, history, test_accuracy, confusion, test_meta, test_actual, test_predicted },
    ))
}

/// Sequence regressor over scaled cost windows.
#[derive(Clone, Debug)]
pub struct CostPredictor {
    net: SeqRegressor<f64>,
    scaler: FeatureScaler,
    epoch_weekday: u8,
}

impl CostPredictor {
    /// Prediction in the scaled [0, 1] cost domain (the raw model
    /// output; slight excursions outside the range are possible).
    pub fn predict_scaled(&self, steps: &[Vec<f64>], mask: &[bool]) -> Result<f64> {
        self.net.forward(steps, mask)
    }

    pub fn predict_window(&self, w: &CostWindow) -> Result<f64> {
        self.predict_scaled(&w.steps, &w.mask)
    }

    /// Prediction mapped back to milliseconds via the cost column's
    /// training range.
    pub fn predict_ms(&self, w: &CostWindow) -> Result<f64> {
        Ok(self.scaler.unscale_col(COST_COL, self.predict_window(w)?))
    }

    pub fn window(&self) -> usize {
        self.net.window()
    }

    pub fn epoch_weekday(&self) -> u8 {
        self.epoch_weekday
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }
}

#[derive(Clone, Debug)]
pub struct CostReport {
    pub split: SplitIndices,
    pub history: TrainingHistory,
    pub test_mae_scaled: f64,
    pub test_mae_ms: f64,
    /// Scaled test windows with predictions, for downstream breakdowns.
    pub test_windows: Vec<CostWindow>,
    pub test_predicted_scaled: Vec<f64>,
}

/// Trains the cost regressor on interaction records. Windows are built
/// per vehicle; the scaler is fitted on the training split's valid
/// steps only.
pub fn train_cost_predictor(
    records: &[crate::fogsim::InteractionRecord],
    cfg: &CostModelConfig,
    seed: u64,
) -> Result<(CostPredictor, CostReport)> {
    let raw = build_raw_cost_windows(records, cfg.window, cfg.epoch_weekday)?;
    if raw.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let split = split_indices(raw.len(), &cfg.split, derive_seed(seed, SPLIT_STREAM))?;
    let train_step_rows = split
        .train
        .iter()
        .flat_map(|&i| raw[i].steps.iter().zip(&raw[i].mask))
        .filter_map(|(s, &m)| m.then_some(s.as_slice()));
    let scaler = FeatureScaler::fit(&cost_step_layout(), train_step_rows)?;
    let windows = scale_cost_windows(&raw, &scaler)?;

    let sample = |i: usize| SeqSample {
        steps: windows[i].steps.clone(),
        mask: windows[i].mask.clone(),
        target: windows[i].target_scaled,
    };
    let train_set: Vec<_> = split.train.iter().map(|&i| sample(i)).collect();
    let val_set: Vec<_> = split.val.iter().map(|&i| sample(i)).collect();

    let net = SeqRegressor::new(
        COST_STEP_FEATURES,
        &cfg.lstm_hidden,
        cfg.head_hidden,
        cfg.window,
        &mut seeded_rng(derive_seed(seed, INIT_STREAM)),
    )?;
    let (net, history) = train(
        net,
        &train_set,
        &val_set,
        &cfg.train,
        derive_seed(seed, SHUFFLE_STREAM),
    )?;

    let predictor = CostPredictor { net, scaler, epoch_weekday: cfg.epoch_weekday };

    let mut test_windows = Vec::with_capacity(split.test.len());
    let mut preds = Vec::with_capacity(split.test.len());
    let mut err_scaled = 0.0;
    let mut err_ms = 0.0;
    for &i in &split.test {
        let w = &windows[i];
        let p = predictor.predict_window(w)?;
        err_scaled += (p - w.target_scaled).abs();
        err_ms += (predictor.scaler.unscale_col(COST_COL, p) - w.meta.cost_ms).abs();
        preds.push(p);
        test_windows.push(w.clone());
    }
    let n = split.test.len().max(1) as f64;
    Ok((
        predictor,
        CostReport {
            split,
            history,
            test_mae_scaled: err_scaled / n,
            test_mae_ms: err_ms / n,
            test_windows,
            test_predicted_scaled: preds,
        },
    ))
}

fn encode_params(tensors: &[&[f64]]) -> String {
    let mut bytes = Vec::new();
    for t in tensors {
        for v in *t {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    B64.encode(bytes)
}

fn decode_params(b64: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(b64)
        .map_err(|e| Error::Bundle(format!("bad parameter encoding: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Bundle(format!(
            "parameter payload is {} bytes, not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn fill_params<N: Network<f64>>(net: &mut N, vals: &[f64]) -> Result<()> {
    let expected = net.param_count();
    if vals.len() != expected {
        return Err(Error::Bundle(format!(
            "bundle holds {} parameters, model needs {expected}",
            vals.len()
        )));
    }
    let mut off = 0;
    for t in net.tensors_mut() {
        t.copy_from_slice(&vals[off..off + t.len()]);
        off += t.len();
    }
    Ok(())
}

fn check_header(kind_found: &str, kind_want: &str, version: u32) -> Result<()> {
    if kind_found != kind_want {
        return Err(Error::Bundle(format!(
            "bundle kind is \"{kind_found}\", expected \"{kind_want}\""
        )));
    }
    if version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!(
            "bundle version {version} unsupported (current {BUNDLE_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FogBundleDoc {
    version: u32,
    kind: String,
    epoch_weekday: u8,
    num_fogs: usize,
    fog_sites: Vec<FogSite>,
    hidden: Vec<usize>,
    scaler: FeatureScaler,
    params_b64: String,
}

#[derive(Serialize, Deserialize)]
struct CostBundleDoc {
    version: u32,
    kind: String,
    epoch_weekday: u8,
    window: usize,
    lstm_hidden: Vec<usize>,
    head_hidden: usize,
    scaler: FeatureScaler,
    params_b64: String,
}

pub fn save_fog_bundle(p: &FogPredictor, path: &Path) -> Result<()> {
    let hidden: Vec<usize> = p.net.layers()[..p.net.layers().len() - 1]
        .iter()
        .map(|l| l.output_size())
        .collect();
    let doc = FogBundleDoc {
        version: BUNDLE_VERSION,
        kind: FOG_KIND.into(),
        epoch_weekday: p.epoch_weekday,
        num_fogs: p.num_fogs,
        fog_sites: p.fog_sites.clone(),
        hidden,
        scaler: p.scaler.clone(),
        params_b64: encode_params(&p.net.tensors()),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?).map_err(Error::file(path))?;
    Ok(())
}

pub fn load_fog_bundle(path: &Path) -> Result<FogPredictor> {
    let text = fs::read_to_string(path).map_err(Error::file(path))?;
    let doc: FogBundleDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Bundle(format!("unreadable fog bundle: {e}")))?;
    check_header(&doc.kind, FOG_KIND, doc.version)?;
    if doc.scaler.width() != FOG_FEATURES {
        return Err(Error::Bundle(format!(
            "fog bundle scaler covers {} columns, expected {FOG_FEATURES}",
            doc.scaler.width()
        )));
    }
    if doc.fog_sites.len() != doc.num_fogs {
        return Err(Error::Bundle(format!(
            "fog bundle lists {} sites for {} fogs",
            doc.fog_sites.len(),
            doc.num_fogs
        )));
    }
    let mut dims = vec![FOG_FEATURES];
    dims.extend_from_slice(&doc.hidden);
    dims.push(doc.num_fogs + 1);
    let mut net = Mlp::new(
        &dims,
        Activation::Softmax,
        Loss::CrossEntropy,
        &mut seeded_rng(0),
    )
    .map_err(|e| Error::Bundle(format!("fog bundle architecture: {e}")))?;
    fill_params(&mut net, &decode_params(&doc.params_b64)?)?;
    Ok(FogPredictor {
        net,
        scaler: doc.scaler,
        num_fogs: doc.num_fogs,
        epoch_weekday: doc.epoch_weekday,
        fog_sites: doc.fog_sites,
    })
}

pub fn save_cost_bundle(c: &CostPredictor, path: &Path) -> Result<()> {
    let lstm_hidden: Vec<usize> = c.net.lstm_layers().iter().map(|l| l.hidden_size()).collect();
    let doc = CostBundleDoc {
        version: BUNDLE_VERSION,
        kind: COST_KIND.into(),
        epoch_weekday: c.epoch_weekday,
        window: c.net.window(),
        lstm_hidden,
        head_hidden: c.net.head_layers()[0].output_size(),
        scaler: c.scaler.clone(),
        params_b64: encode_params(&c.net.tensors()),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?).map_err(Error::file(path))?;
    Ok(())
}

pub fn load_cost_bundle(path: &Path) -> Result<CostPredictor> {
    let text = fs::read_to_string(path).map_err(Error::file(path))?;
    let doc: CostBundleDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Bundle(format!("unreadable cost bundle: {e}")))?;
    check_header(&doc.kind, COST_KIND, doc.version)?;
    if doc.scaler.width() != COST_STEP_FEATURES {
        return Err(Error::Bundle(format!(
            "cost bundle scaler covers {} columns, expected {COST_STEP_FEATURES}",
            doc.scaler.width()
        )));
    }
    let mut net = SeqRegressor::new(
        COST_STEP_FEATURES,
        &doc.lstm_hidden,
        doc.head_hidden,
        doc.window,
        &mut seeded_rng(0),
    )
    .map_err(|e| Error::Bundle(format!("cost bundle architecture: {e}")))?;
    fill_params(&mut net, &decode_params(&doc.params_b64)?)?;
    Ok(CostPredictor {
        net,
        scaler: doc.scaler,
        epoch_weekday: doc.epoch_weekday,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fogsim::{FogNode, InteractionRecord, RegionTag};
    use rand::Rng;
    use tempfile::tempdir;

    fn two_fog_network() -> FogNetwork {
        FogNetwork::new(vec![
            FogNode {
                fog_id: 0,
                lat: 31.20,
                lon: 121.40,
                coverage_radius_m: 3000.0,
                base_cost_ms: 10.0,
                region: RegionTag::Urban,
            },
            FogNode {
                fog_id: 1,
                lat: 31.24,
                lon: 121.40,
                coverage_radius_m: 3000.0,
                base_cost_ms: 20.0,
                region: RegionTag::Suburban,
            },
        ])
        .unwrap()
    }

    fn record(vehicle: &str, t: u64, lat: f64, fog: Option<u32>, cost: f64) -> InteractionRecord {
        InteractionRecord {
            vehicle_id: vehicle.into(),
            t,
            vlat: lat,
            vlon: 121.40,
            fog_id: fog,
            flat: fog.map(|f| if f == 0 { 31.20 } else { 31.24 }),
            flon: fog.map(|_| 121.40),
            dist_m: fog.map(|_| 400.0),
            cost_ms: fog.map(|_| cost),
            no_coverage: fog.is_none(),
        }
    }

    /// Positions near fog 0 or fog 1, labels matching; learnable from
    /// the z coordinate alone.
    fn separable_records(n: usize) -> Vec<InteractionRecord> {
        let mut rng = seeded_rng(77);
        (0..n)
            .map(|i| {
                let fog = (i % 2) as u32;
                let lat = if fog == 0 { 31.20 } else { 31.24 } + rng.gen_range(-0.005..0.005);
                record(&format!("v{:03}", i % 7), i as u64, lat, Some(fog), 10.0)
            })
            .collect()
    }

    fn quick_fog_cfg() -> FogModelConfig {
        FogModelConfig {
            hidden: vec![12],
            train: TrainConfig {
                max_epochs: 120,
                batch_size: 32,
                patience: 120,
                adam: AdamConfig { alpha: 1e-2, ..Default::default() },
            },
            ..Default::default()
        }
    }

    #[test]
    fn fog_trainer_learns_separable_classes() {
        let records = separable_records(400);
        let (p, report) = train_fog_predictor(&records, &two_fog_network(), &quick_fog_cfg(), 5).unwrap();
        assert!(report.test_accuracy >= 0.95, "accuracy {}", report.test_accuracy);
        assert_eq!(report.confusion.classes(), 3);
        assert_eq!(
            report.split.train.len() + report.split.val.len() + report.split.test.len(),
            400
        );
        let pred = p.predict(31.2, 121.4, 0).unwrap();
        assert_eq!(pred.class, 0);
        assert_eq!(pred.probs.len(), 3);
        assert!((pred.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p.fog_sites().len(), 2);
        assert_eq!(p.no_coverage_class(), 2);
    }

    #[test]
    fn fog_trainer_rejects_degenerate_corpora() {
        let one_class: Vec<_> = (0..50)
            .map(|i| record("v0", i, 31.20, Some(0), 10.0))
            .collect();
        assert!(matches!(
            train_fog_predictor(&one_class, &two_fog_network(), &quick_fog_cfg(), 1),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            train_fog_predictor(&[], &two_fog_network(), &quick_fog_cfg(), 1),
            Err(Error::EmptyTrainingSet)
        ));
        // record naming a fog the network doesn't have
        let bad = vec![record("v0", 0, 31.2, Some(7), 1.0), record("v0", 1, 31.2, None, 1.0)];
        assert!(train_fog_predictor(&bad, &two_fog_network(), &quick_fog_cfg(), 1).is_err());
    }

    #[test]
    fn fog_bundle_round_trip_is_bit_exact() {
        let records = separable_records(150);
        let (p, _) = train_fog_predictor(&records, &two_fog_network(), &quick_fog_cfg(), 9).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("fog.json");
        save_fog_bundle(&p, &path).unwrap();
        let q = load_fog_bundle(&path).unwrap();
        assert_eq!(q.num_fogs(), p.num_fogs());
        assert_eq!(q.epoch_weekday(), p.epoch_weekday());
        assert_eq!(q.fog_sites(), p.fog_sites());
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let lat = rng.gen_range(31.19..31.25);
            let lon = rng.gen_range(121.39..121.41);
            let t = rng.gen_range(0..200_000u64);
            let a = p.predict(lat, lon, t).unwrap();
            let b = q.predict(lat, lon, t).unwrap();
            assert_eq!(a.class, b.class);
            for (x, y) in a.probs.iter().zip(&b.probs) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    /// Cost records where the cost tracks a slow per-vehicle ramp, so
    /// history genuinely helps.
    fn ramp_records(n: usize) -> Vec<InteractionRecord> {
        let mut out = Vec::new();
        for v in 0..4 {
            for i in 0..n / 4 {
                let t = i as u64;
                let cost = 10.0 + (v as f64) * 5.0 + (i as f64 % 40.0) * 0.5;
                out.push(record(&format!("r{v}"), t, 31.20, Some(0), cost));
            }
        }
        out
    }

    fn quick_cost_cfg() -> CostModelConfig {
        CostModelConfig {
            lstm_hidden: vec![8],
            head_hidden: 8,
            window: 5,
            train: TrainConfig {
                max_epochs: 30,
                batch_size: 32,
                patience: 30,
                adam: AdamConfig { alpha: 1e-2, ..Default::default() },
            },
            ..Default::default()
        }
    }

    #[test]
    fn cost_trainer_fits_a_ramp() {
        let records = ramp_records(400);
        let (p, report) = train_cost_predictor(&records, &quick_cost_cfg(), 4).unwrap();
        assert!(report.test_mae_scaled < 0.15, "mae {}", report.test_mae_scaled);
        assert_eq!(report.test_windows.len(), report.test_predicted_scaled.len());
        // ms error consistent with the scaled error and the fitted range
        let w = &report.test_windows[0];
        let ms = p.predict_ms(w).unwrap();
        assert!(ms.is_finite());
        assert_eq!(p.window(), 5);
    }

    #[test]
    fn cost_bundle_round_trip_is_bit_exact() {
        let records = ramp_records(200);
        let (p, report) = train_cost_predictor(&records, &quick_cost_cfg(), 8).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("cost.json");
        save_cost_bundle(&p, &path).unwrap();
        let q = load_cost_bundle(&path).unwrap();
        assert_eq!(q.window(), p.window());
        assert_eq!(q.scaler(), p.scaler());
        for w in &report.test_windows {
            let a = p.predict_window(w).unwrap();
            let b = q.predict_window(w).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bundle_error_paths() {
        let records = separable_records(150);
        let (p, _) = train_fog_predictor(&records, &two_fog_network(), &quick_fog_cfg(), 2).unwrap();
        let dir = tempdir().unwrap();
        let fog_path = dir.path().join("fog.json");
        save_fog_bundle(&p, &fog_path).unwrap();

        // wrong kind: a fog bundle is not a cost bundle
        let err = load_cost_bundle(&fog_path).unwrap_err();
        assert!(err.to_string().contains("kind") || err.to_string().contains("unreadable"), "{err}");

        // unsupported version
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&fog_path).unwrap()).unwrap();
        doc["version"] = serde_json::json!(99);
        let v99 = dir.path().join("v99.json");
        fs::write(&v99, serde_json::to_string(&doc).unwrap()).unwrap();
        let err = load_fog_bundle(&v99).unwrap_err();
        assert!(err.to_string().contains("version 99"), "{err}");

        // truncated parameters
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&fog_path).unwrap()).unwrap();
        let params = doc["params_b64"].as_str().unwrap();
        let cut = B64.encode(&B64.decode(params).unwrap()[..64]);
        doc["params_b64"] = serde_json::json!(cut);
        let trunc = dir.path().join("trunc.json");
        fs::write(&trunc, serde_json::to_string(&doc).unwrap()).unwrap();
        let err = load_fog_bundle(&trunc).unwrap_err();
        assert!(err.to_string().contains("parameters"), "{err}");

        // corrupt base64
        doc["params_b64"] = serde_json::json!("!!!not-base64!!!");
        let corrupt = dir.path().join("corrupt.json");
        fs::write(&corrupt, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(load_fog_bundle(&corrupt).is_err());

        // missing file
        assert!(load_fog_bundle(&dir.path().join("absent.json")).is_err());

        // junk json
        let junk = dir.path().join("junk.json");
        fs::write(&junk, "{\"hello\": 1}").unwrap();
        assert!(load_fog_bundle(&junk).is_err());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let records = separable_records(200);
        let net = two_fog_network();
        let (a, _) = train_fog_predictor(&records, &net, &quick_fog_cfg(), 42).unwrap();
        let (b, _) = train_fog_predictor(&records, &net, &quick_fog_cfg(), 42).unwrap();
        let pa = a.predict(31.22, 121.4, 50).unwrap();
        let pb = b.predict(31.22, 121.4, 50).unwrap();
        for (x, y) in pa.probs.iter().zip(&pb.probs) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let (c, _) = train_fog_predictor(&records, &net, &quick_fog_cfg(), 43).unwrap();
        let pc = c.predict(31.22, 121.4, 50).unwrap();
        assert!(pa.probs.iter().zip(&pc.probs).any(|(x, y)| x.to_bits() != y.to_bits()));
    }
}
