//! Command-line front end. One JSON config describes the whole lab
//! (map, fleet, fog network, model settings); every field has a
//! default, so `{}` runs the full desk-scale scenario. Commands write
//! their artifacts to explicit paths and print one line per artifact.
//!
//! All outputs are deterministic for a fixed (config, seed): reruns
//! produce byte-identical files. Progress and timing go to stderr only.

use crate::error::{Error, Result};
use crate::eval::{
    accuracy_by_region, knn_fog_accuracy, knn_window_mae, mae_by_region, ConfusionMatrix,
    RegionBreakdown, ReferenceMetrics, KNN_CLASSIFY_K, KNN_REGRESS_K, REFERENCE,
};
use crate::experiments::{
    run_obstacle_experiment, run_transition_experiment, temporal_profile,
    ObstacleExperimentConfig, TemporalResult, TransitionExperimentConfig,
};
use crate::features::{
    build_fog_dataset, build_cost_windows, split_indices, split_indices_stratified, FogSample,
    SampleMeta, WindowMeta,
};
use crate::fogsim::{
    read_records_path, simulate, write_records_path, CostParams, FogNetwork, FogNode,
    ObstacleRegion, RegionTag,
};
use crate::geo::{offset_m, GeoArea, GeoPoint, GeoRect};
use crate::models::{
    load_cost_bundle, load_fog_bundle, save_cost_bundle, save_fog_bundle, train_cost_predictor,
    train_fog_predictor, CostModelConfig, FogModelConfig,
};
use crate::rng::derive_seed;
use crate::routing::{plan_route, RouteConfig};
use crate::traces::{
    parse_traces_path, synthesize_traces, write_traces_path, StartProfile, TraceGenConfig,
};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

// Seed streams for the pipeline stages. Public so out-of-process runs
// (tests, notebooks) can reproduce a stage bit-for-bit.
pub const GEN_STREAM: u64 = 20;
pub const SIM_STREAM: u64 = 21;
pub const FOG_TRAIN_STREAM: u64 = 22;
pub const COST_TRAIN_STREAM: u64 = 23;
pub const EVAL_SPLIT_STREAM: u64 = 24;
pub const TRANSITION_STREAM: u64 = 25;
pub const OBSTACLE_STREAM: u64 = 26;

/// Everything one lab run needs. Defaults describe a ~6 km square
/// urban/suburban map with eight fog cells and a 20-taxi fleet.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub traces: TraceGenConfig,
    pub network: Vec<FogNode>,
    pub cost: CostParams,
    pub obstacles: Vec<ObstacleRegion>,
    /// Areas counted as urban in per-region breakdowns.
    pub urban_areas: Vec<GeoArea>,
    pub fog_model: FogModelConfig,
    pub cost_model: CostModelConfig,
    pub route: RouteConfig,
    pub transition_experiment: TransitionExperimentConfig,
    pub obstacle_experiment: ObstacleExperimentConfig,
}

fn rect_m(base: GeoPoint, e0: f64, n0: f64, e1: f64, n1: f64) -> GeoRect {
    let sw = offset_m(base, e0, n0);
    let ne = offset_m(base, e1, n1);
    GeoRect::new(sw.lat, sw.lon, ne.lat, ne.lon).expect("offsets form a valid rectangle")
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = GeoPoint { lat: 31.200, lon: 121.400 };
        let urban_square = GeoArea::Rect(rect_m(base, 1900.0, 1900.0, 4100.0, 4100.0));

        let mut network = Vec::new();
        let urban_sites = [
            (2400.0, 2400.0, 8.0),
            (3600.0, 2400.0, 9.0),
            (2400.0, 3600.0, 8.5),
            (3600.0, 3600.0, 9.5),
            (3000.0, 3000.0, 10.0),
        ];
        for (i, (e, n, cost)) in urban_sites.into_iter().enumerate() {
            let p = offset_m(base, e, n);
            network.push(FogNode {
                fog_id: i as u32,
                lat: p.lat,
                lon: p.lon,
                coverage_radius_m: 850.0,
                base_cost_ms: cost,
                region: RegionTag::Urban,
            });
        }
        let suburban_sites = [(900.0, 900.0, 18.0), (5100.0, 1200.0, 20.0), (3000.0, 5200.0, 22.0)];
        for (k, (e, n, cost)) in suburban_sites.into_iter().enumerate() {
            let p = offset_m(base, e, n);
            network.push(FogNode {
                fog_id: (urban_sites.len() + k) as u32,
                lat: p.lat,
                lon: p.lon,
                coverage_radius_m: 2600.0,
                base_cost_ms: cost,
                region: RegionTag::Suburban,
            });
        }

        RunConfig {
            seed: 1,
            traces: TraceGenConfig {
                urban: Some(urban_square.clone()),
                urban_bias: 0.65,
                start_profile: StartProfile::MiddayPeak,
                ..Default::default()
            },
            network,
            // capacity 4 keeps per-cell load visibly moving with the
            // fleet's rush-hour shape
            cost: CostParams { capacity: 4, ..Default::default() },
            obstacles: Vec::new(),
            urban_areas: vec![urban_square],
            fog_model: FogModelConfig::default(),
            cost_model: CostModelConfig::default(),
            route: RouteConfig::default(),
            transition_experiment: TransitionExperimentConfig::default(),
            obstacle_experiment: ObstacleExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::file(path))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn fog_network(&self) -> Result<FogNetwork> {
        FogNetwork::new(self.network.clone())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vfog",
    version,
    about = "Vehicular fog computing laboratory: synthetic fleets, service simulation, learned handover planning"
)]
pub struct Cli {
    /// JSON run configuration; every omitted field takes its default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize street-grid taxi traces (CSV).
    GenTraces {
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay traces against the fog network into interaction records
    /// (JSONL).
    Simulate {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both predictors; writes fog_bundle.json, cost_bundle.json
    /// and train_report.json into --out-dir.
    Train {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "artifacts")]
        out_dir: PathBuf,
    },
    /// Evaluate saved bundles on an interaction corpus (fresh split:
    /// train part feeds the KNN baselines, test part is scored).
    Eval {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        fog: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan service along a route (first trajectory of a trace CSV).
    Route {
        #[arg(long)]
        fog: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        route: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-contained validation experiments.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCmd,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExperimentCmd {
    /// Where does the learned handover happen versus the geometric
    /// bisector between two cells?
    Transition {
        #[arg(long)]
        out: PathBuf,
    },
    /// Does the classifier learn the footprint and schedule of a
    /// temporary blocked zone?
    Obstacle {
        #[arg(long)]
        out: PathBuf,
    },
    /// Hourly cost profile reproduction, urban vs suburban.
    Temporal {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::GenTraces { out } => {
            let path = cmd_gen_traces(&cfg, &out)?;
            println!("traces: {}", path.display());
        }
        Command::Simulate { traces, out } => {
            let path = cmd_simulate(&cfg, &traces, &out)?;
            println!("records: {}", path.display());
        }
        Command::Train { records, out_dir } => {
            let arts = cmd_train(&cfg, &records, &out_dir)?;
            println!("fog bundle: {}", arts.fog_bundle.display());
            println!("cost bundle: {}", arts.cost_bundle.display());
            println!("report: {}", arts.report.display());
        }
        Command::Eval { records, fog, cost, out } => {
            let path = cmd_eval(&cfg, &records, &fog, &cost, &out)?;
            println!("evaluation: {}", path.display());
        }
        Command::Route { fog, cost, route, out } => {
            let path = cmd_route(&cfg, &fog, &cost, &route, &out)?;
            println!("plan: {}", path.display());
        }
        Command::Experiment { which } => match which {
            ExperimentCmd::Transition { out } => {
                let path = cmd_experiment_transition(&cfg, &out)?;
                println!("transition experiment: {}", path.display());
            }
            ExperimentCmd::Obstacle { out } => {
                let path = cmd_experiment_obstacle(&cfg, &out)?;
                println!("obstacle experiment: {}", path.display());
            }
            ExperimentCmd::Temporal { records, cost, out } => {
                let path = cmd_experiment_temporal(&cfg, &records, &cost, &out)?;
                println!("temporal experiment: {}", path.display());
            }
        },
    }
    Ok(())
}

pub fn cmd_gen_traces(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let traces = synthesize_traces(&cfg.traces, derive_seed(cfg.seed, GEN_STREAM))?;
    write_traces_path(&traces, out)?;
    eprintln!(
        "generated {} trajectories, {} points",
        traces.len(),
        traces.iter().map(|t| t.points.len()).sum::<usize>()
    );
    Ok(out.to_path_buf())
}

pub fn cmd_simulate(cfg: &RunConfig, traces_path: &Path, out: &Path) -> Result<PathBuf> {
    let traces = parse_traces_path(traces_path)?;
    let network = cfg.fog_network()?;
    let records = simulate(
        &traces,
        &network,
        &cfg.cost,
        &cfg.obstacles,
        derive_seed(cfg.seed, SIM_STREAM),
    )?;
    write_records_path(&records, out)?;
    let uncovered = records.iter().filter(|r| r.no_coverage).count();
    eprintln!("{} interaction records ({uncovered} without coverage)", records.len());
    Ok(out.to_path_buf())
}

#[derive(Serialize)]
struct TrainReportDoc {
    fog: FogTrainSection,
    cost: CostTrainSection,
    /// Published results from a large-scale deployment corpus, for
    /// orientation only.
    reference: ReferenceMetrics,
}

#[derive(Serialize)]
struct FogTrainSection {
    records: usize,
    split_sizes: [usize; 3],
    epochs_run: usize,
    best_epoch: usize,
    best_val_loss: f64,
    stopped_early: bool,
    test_accuracy: f64,
    per_class_recall: Vec<Option<f64>>,
    confusion: ConfusionMatrix,
}

#[derive(Serialize)]
struct CostTrainSection {
    windows: usize,
    split_sizes: [usize; 3],
    epochs_run: usize,
    best_epoch: usize,
    best_val_loss: f64,
    stopped_early: bool,
    test_mae_scaled: f64,
    test_mae_ms: f64,
}

pub struct TrainArtifacts {
    pub fog_bundle: PathBuf,
    pub cost_bundle: PathBuf,
    pub report: PathBuf,
}

pub fn cmd_train(cfg: &RunConfig, records_path: &Path, out_dir: &Path) -> Result<TrainArtifacts> {
    let records = read_records_path(records_path)?;
    let network = cfg.fog_network()?;
    fs::create_dir_all(out_dir).map_err(Error::file(out_dir))?;

    let t0 = Instant::now();
    let (fog, fog_report) = train_fog_predictor(
        &records,
        &network,
        &cfg.fog_model,
        derive_seed(cfg.seed, FOG_TRAIN_STREAM),
    )?;
    eprintln!(
        "fog classifier: {} epochs, test accuracy {:.4} ({:.1}s)",
        fog_report.history.epochs.len(),
        fog_report.test_accuracy,
        t0.elapsed().as_secs_f64()
    );

    let t1 = Instant::now();
    let (cost, cost_report) = train_cost_predictor(
        &records,
        &cfg.cost_model,
        derive_seed(cfg.seed, COST_TRAIN_STREAM),
    )?;
    eprintln!(
        "cost regressor: {} epochs, test mae {:.4} scaled / {:.2} ms ({:.1}s)",
        cost_report.history.epochs.len(),
        cost_report.test_mae_scaled,
        cost_report.test_mae_ms,
        t1.elapsed().as_secs_f64()
    );

    let fog_bundle = out_dir.join("fog_bundle.json");
    let cost_bundle = out_dir.join("cost_bundle.json");
    save_fog_bundle(&fog, &fog_bundle)?;
    save_cost_bundle(&cost, &cost_bundle)?;

    let doc = TrainReportDoc {
        fog: FogTrainSection {
            records: records.len(),
            split_sizes: [
                fog_report.split.train.len(),
                fog_report.split.val.len(),
                fog_report.split.test.len(),
            ],
            epochs_run: fog_report.history.epochs.len(),
            best_epoch: fog_report.history.best_epoch,
            best_val_loss: fog_report.history.best_val_loss,
            stopped_early: fog_report.history.stopped_early,
            test_accuracy: fog_report.test_accuracy,
            per_class_recall: fog_report.confusion.per_class_recall(),
            confusion: fog_report.confusion,
        },
        cost: CostTrainSection {
            windows: cost_report.split.train.len()
                + cost_report.split.val.len()
                + cost_report.split.test.len(),
            split_sizes: [
                cost_report.split.train.len(),
                cost_report.split.val.len(),
                cost_report.split.test.len(),
            ],
            epochs_run: cost_report.history.epochs.len(),
            best_epoch: cost_report.history.best_epoch,
            best_val_loss: cost_report.history.best_val_loss,
            stopped_early: cost_report.history.stopped_early,
            test_mae_scaled: cost_report.test_mae_scaled,
            test_mae_ms: cost_report.test_mae_ms,
        },
        reference: REFERENCE,
    };
    let report = out_dir.join("train_report.json");
    fs::write(&report, serde_json::to_string_pretty(&doc)?).map_err(Error::file(&report))?;
    Ok(TrainArtifacts { fog_bundle, cost_bundle, report })
}

#[derive(Serialize)]
struct EvalReportDoc {
    records: usize,
    fog: FogEvalSection,
    cost: CostEvalSection,
    reference: ReferenceMetrics,
}

#[derive(Serialize)]
struct FogEvalSection {
    test_samples: usize,
    accuracy: f64,
    knn_accuracy: f64,
    knn_k: usize,
    by_region: RegionBreakdown,
    confusion: ConfusionMatrix,
}

#[derive(Serialize)]
struct CostEvalSection {
    test_windows: usize,
    mae_scaled: f64,
    mae_ms: f64,
    knn_mae_scaled: f64,
    knn_k: usize,
    by_region: RegionBreakdown,
    temporal: TemporalResult,
}

pub fn cmd_eval(
    cfg: &RunConfig,
    records_path: &Path,
    fog_path: &Path,
    cost_path: &Path,
    out: &Path,
) -> Result<PathBuf> {
    let records = read_records_path(records_path)?;
    let fog = load_fog_bundle(fog_path)?;
    let cost = load_cost_bundle(cost_path)?;
    let split_seed = derive_seed(cfg.seed, EVAL_SPLIT_STREAM);

    // Fog side: fresh stratified split; train part anchors the KNN
    // baseline, test part is scored.
    let samples = build_fog_dataset(&records, fog.scaler(), fog.num_fogs(), fog.epoch_weekday())?;
    let labels: Vec<usize> = samples.iter().map(|s| s.class).collect();
    let fsplit = split_indices_stratified(&labels, &cfg.fog_model.split, split_seed)?;
    let knn_train: Vec<FogSample> = fsplit.train.iter().map(|&i| samples[i].clone()).collect();
    let test: Vec<FogSample> = fsplit.test.iter().map(|&i| samples[i].clone()).collect();

    let t0 = Instant::now();
    let mut actual = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    let mut metas: Vec<SampleMeta> = Vec::with_capacity(test.len());
    for s in &test {
        actual.push(s.class);
        predicted.push(
            fog.predict(s.meta.pos.lat, s.meta.pos.lon, s.meta.t)?.class,
        );
        metas.push(s.meta.clone());
    }
    let (accuracy, confusion) =
        crate::eval::accuracy_and_confusion(&actual, &predicted, fog.num_classes())?;
    let by_region = accuracy_by_region(&metas, &actual, &predicted, &cfg.urban_areas)?;
    let knn_accuracy = knn_fog_accuracy(&knn_train, &test, KNN_CLASSIFY_K)?;
    eprintln!(
        "fog eval: accuracy {accuracy:.4}, knn{} {knn_accuracy:.4} ({:.1}s)",
        KNN_CLASSIFY_K,
        t0.elapsed().as_secs_f64()
    );

    // Cost side: plain split over windows built with the bundle's
    // scaler.
    let windows = build_cost_windows(&records, cost.scaler(), cost.window(), cost.epoch_weekday())?;
    let csplit = split_indices(windows.len(), &cfg.cost_model.split, split_seed)?;
    let knn_train_w: Vec<_> = csplit.train.iter().map(|&i| windows[i].clone()).collect();
    let test_w: Vec<_> = csplit.test.iter().map(|&i| windows[i].clone()).collect();

    let t1 = Instant::now();
    let mut preds = Vec::with_capacity(test_w.len());
    let mut actual_scaled = Vec::with_capacity(test_w.len());
    let mut wmetas: Vec<WindowMeta> = Vec::with_capacity(test_w.len());
    let mut err_ms = 0.0;
    for w in &test_w {
        let p = cost.predict_window(w)?;
        err_ms += (cost.scaler().unscale_col(crate::features::COST_COL, p) - w.meta.cost_ms).abs();
        preds.push(p);
        actual_scaled.push(w.target_scaled);
        wmetas.push(w.meta.clone());
    }
    let mae_scaled = crate::eval::mae(&preds, &actual_scaled)?;
    let mae_ms = err_ms / test_w.len().max(1) as f64;
    let knn_mae_scaled = knn_window_mae(&knn_train_w, &test_w, KNN_REGRESS_K)?;
    let cost_by_region = mae_by_region(&wmetas, &preds, &actual_scaled, &cfg.urban_areas)?;
    let temporal = temporal_profile(&test_w, &preds, &cfg.urban_areas)?;
    eprintln!(
        "cost eval: mae {mae_scaled:.4} scaled, knn{} {knn_mae_scaled:.4} ({:.1}s)",
        KNN_REGRESS_K,
        t1.elapsed().as_secs_f64()
    );

    let doc = EvalReportDoc {
        records: records.len(),
        fog: FogEvalSection {
            test_samples: test.len(),
            accuracy,
            knn_accuracy,
            knn_k: KNN_CLASSIFY_K,
            by_region,
            confusion,
        },
        cost: CostEvalSection {
            test_windows: test_w.len(),
            mae_scaled,
            mae_ms,
            knn_mae_scaled,
            knn_k: KNN_REGRESS_K,
            by_region: cost_by_region,
            temporal,
        },
        reference: REFERENCE,
    };
    fs::write(out, serde_json::to_string_pretty(&doc)?).map_err(Error::file(out))?;
    Ok(out.to_path_buf())
}

pub fn cmd_route(
    cfg: &RunConfig,
    fog_path: &Path,
    cost_path: &Path,
    route_path: &Path,
    out: &Path,
) -> Result<PathBuf> {
    let fog = load_fog_bundle(fog_path)?;
    let cost = load_cost_bundle(cost_path)?;
    let trajectories = parse_traces_path(route_path)?;
    let Some(first) = trajectories.first() else {
        return Err(Error::InvalidInput(format!(
            "{}: no trajectories",
            route_path.display()
        )));
    };
    if trajectories.len() > 1 {
        eprintln!(
            "note: {} trajectories in {}; planning the first ({})",
            trajectories.len(),
            route_path.display(),
            first.vehicle_id
        );
    }
    let plan = plan_route(&fog, &cost, &first.points, &cfg.route)?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "route: {} points, {} handovers, {} low-coverage intervals",
        plan.points.len(),
        plan.transitions.len(),
        plan.low_coverage.len()
    );
    fs::write(out, serde_json::to_string_pretty(&plan)?).map_err(Error::file(out))?;
    Ok(out.to_path_buf())
}

pub fn cmd_experiment_transition(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let t0 = Instant::now();
    let result = run_transition_experiment(
        &cfg.transition_experiment,
        derive_seed(cfg.seed, TRANSITION_STREAM),
    )?;
    eprintln!(
        "transition: {} handover(s), offsets {:?} samples, within tolerance: {} ({:.1}s)",
        result.transitions.len(),
        result.offsets_samples,
        result.within_tolerance,
        t0.elapsed().as_secs_f64()
    );
    fs::write(out, serde_json::to_string_pretty(&result)?).map_err(Error::file(out))?;
    Ok(out.to_path_buf())
}

pub fn cmd_experiment_obstacle(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let t0 = Instant::now();
    let result = run_obstacle_experiment(
        &cfg.obstacle_experiment,
        derive_seed(cfg.seed, OBSTACLE_STREAM),
    )?;
    eprintln!(
        "obstacle: interior recall {:.3}, overshoot {:.2} steps ({:.1}s)",
        result.interior_recall,
        result.overshoot_steps,
        t0.elapsed().as_secs_f64()
    );
    fs::write(out, serde_json::to_string_pretty(&result)?).map_err(Error::file(out))?;
    Ok(out.to_path_buf())
}

#[derive(Serialize)]
struct TemporalReportDoc {
    windows: usize,
    profile: TemporalResult,
}

pub fn cmd_experiment_temporal(
    cfg: &RunConfig,
    records_path: &Path,
    cost_path: &Path,
    out: &Path,
) -> Result<PathBuf> {
    let records = read_records_path(records_path)?;
    let cost = load_cost_bundle(cost_path)?;
    let windows = build_cost_windows(&records, cost.scaler(), cost.window(), cost.epoch_weekday())?;
    let mut preds = Vec::with_capacity(windows.len());
    for w in &windows {
        preds.push(cost.predict_window(w)?);
    }
    let profile = temporal_profile(&windows, &preds, &cfg.urban_areas)?;
    let fmt = |c: &Option<crate::experiments::CurvePair>| match c {
        Some(p) => match p.correlation {
            Some(r) => format!("{r:.3}"),
            None => "flat".into(),
        },
        None => "no samples".into(),
    };
    eprintln!(
        "temporal: urban r {}, suburban r {}",
        fmt(&profile.urban),
        fmt(&profile.suburban)
    );
    let doc = TemporalReportDoc { windows: windows.len(), profile };
    fs::write(out, serde_json::to_string_pretty(&doc)?).map_err(Error::file(out))?;
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_coherent() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.network.len(), 8);
        cfg.fog_network().unwrap();
        cfg.traces.validate().unwrap();
        cfg.cost.validate().unwrap();
        cfg.route.validate().unwrap();
        assert_eq!(cfg.urban_areas.len(), 1);
        // urban fogs sit inside the urban square, suburban outside
        for node in &cfg.network {
            let inside = cfg.urban_areas[0].contains(node.pos());
            assert_eq!(inside, node.region == RegionTag::Urban, "fog {}", node.fog_id);
        }
        // round-trips through json with every field present
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.network.len(), 8);
        assert_eq!(back.seed, cfg.seed);
    }

    #[test]
    fn empty_config_file_means_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.seed, RunConfig::default().seed);
        assert_eq!(cfg.network.len(), 8);
    }

    #[test]
    fn cli_parses_typical_invocations() {
        use clap::Parser;
        let cli = Cli::parse_from(["vfog", "gen-traces", "--out", "t.csv"]);
        assert!(matches!(cli.command, Command::GenTraces { .. }));
        let cli = Cli::parse_from([
            "vfog",
            "--seed",
            "7",
            "simulate",
            "--traces",
            "t.csv",
            "--out",
            "r.jsonl",
        ]);
        assert_eq!(cli.seed, Some(7));
        let cli = Cli::parse_from([
            "vfog",
            "experiment",
            "temporal",
            "--records",
            "r.jsonl",
            "--cost",
            "c.json",
            "--out",
            "t.json",
        ]);
        assert!(matches!(
            cli.command,
            Command::Experiment { which: ExperimentCmd::Temporal { .. } }
        ));
    }
}
