//! Command implementations behind the `affordance` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::dataset::{generate, read_jsonl, size_histogram, split_by_episode, write_jsonl};
use crate::encoder::{train_autoencoder, training_images, AutoencoderReport, Encoder, FeatureBank};
use crate::error::{Error, Result};
use crate::geometry::{catalog_nonlinear, catalog_standard, ObjectSpec};
use crate::mogan::{evaluate_baseline, evaluate_mogan, prepare_samples, train_baseline, train_mogan, Sample, SizeMetrics};
use crate::planner::{run_trials, sample_feasible_inventories, OptimumCache, Task, TaskKind, TrialResult};
use crate::predictor::{baseline_path, encoder_path, evaluate_records, mogan_path, PredictorContext, Registry};
use crate::report::{
    loss_csv, metrics_chart, metrics_csv, read_metrics_csv, read_success_csv, read_verification_csv, success_chart, success_csv, success_table,
    verification_csv, write_text, MetricRow,
};
use crate::simulator::{InteractionRecord, Mode};

pub fn catalog(mode: Mode) -> Vec<ObjectSpec> {
    match mode {
        Mode::Linear => catalog_standard(),
        Mode::Nonlinear => catalog_nonlinear(),
    }
}

/// Defaults, then the config file, then `overrides` (flag values) in order.
pub fn resolve(config_file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match config_file {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub path: PathBuf,
    pub records: usize,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<GenSummary> {
    let records = generate(&catalog(cfg.mode), &cfg.gen_config());
    let path = cfg.dataset_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_jsonl(&path, &records)?;
    Ok(GenSummary { path, records: records.len(), histogram: size_histogram(&records) })
}

pub fn cmd_train_encoder(cfg: &RunConfig) -> Result<AutoencoderReport> {
    let ae_cfg = cfg.autoencoder_config();
    let (train, val) = training_images(&catalog(cfg.mode), &ae_cfg);
    let (ae, report) = train_autoencoder(&train, &val, &ae_cfg)?;
    std::fs::create_dir_all(cfg.model_dir())?;
    ae.encoder().save(&encoder_path(&cfg.model_dir(), cfg.mode))?;
    let mut csv = String::from("epoch,train_mse,val_mse\n");
    for (i, (t, v)) in report.train_mse.iter().zip(&report.val_mse).enumerate() {
        csv.push_str(&format!("{},{t:.8},{v:.8}\n", i + 1));
    }
    write_text(&cfg.report_dir().join(format!("encoder-{}-loss.csv", cfg.mode.name())), &csv)?;
    Ok(report)
}

pub fn load_encoder(cfg: &RunConfig) -> Result<Encoder> {
    let path = encoder_path(&cfg.model_dir(), cfg.mode);
    if !path.exists() {
        return Err(Error::ModelNotLoaded);
    }
    Encoder::load(&path)
}

/// Training and validation records, split by episode.
pub fn load_split(cfg: &RunConfig) -> Result<(Vec<InteractionRecord>, Vec<InteractionRecord>)> {
    let records = read_jsonl(&cfg.dataset_path())?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(split_by_episode(&records, cfg.val_fraction, cfg.seed))
}

pub fn load_samples(cfg: &RunConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let (train, val) = load_split(cfg)?;
    let mut bank = FeatureBank::new(load_encoder(cfg)?, cfg.mode);
    Ok((prepare_samples(&train, &mut bank, cfg.mode)?, prepare_samples(&val, &mut bank, cfg.mode)?))
}

fn write_validation(cfg: &RunConfig, name: &str, metrics: &[SizeMetrics]) -> Result<()> {
    let rows: Vec<MetricRow> = metrics.iter().map(|m| MetricRow::from_metrics(name, m)).collect();
    write_text(&cfg.report_dir().join(format!("{name}-{}-val.csv", cfg.mode.name())), &metrics_csv(&rows)?)
}

pub fn cmd_train_mogan(cfg: &RunConfig) -> Result<Vec<SizeMetrics>> {
    let (train, val) = load_samples(cfg)?;
    let (model, log) = train_mogan(&train, &val, cfg.mode, &cfg.train_config())?;
    std::fs::create_dir_all(cfg.model_dir())?;
    model.save(&mogan_path(&cfg.model_dir(), cfg.mode))?;
    write_text(&cfg.report_dir().join(format!("mogan-{}-loss.csv", cfg.mode.name())), &loss_csv(&log)?)?;
    let metrics = evaluate_mogan(&model, &val)?;
    write_validation(cfg, "mogan", &metrics)?;
    Ok(metrics)
}

pub fn cmd_train_baseline(cfg: &RunConfig) -> Result<Vec<SizeMetrics>> {
    let (train, val) = load_samples(cfg)?;
    let (model, log) = train_baseline(&train, &val, cfg.mode, &cfg.train_config())?;
    std::fs::create_dir_all(cfg.model_dir())?;
    model.save(&baseline_path(&cfg.model_dir(), cfg.mode))?;
    write_text(&cfg.report_dir().join(format!("baseline-{}-loss.csv", cfg.mode.name())), &loss_csv(&log)?)?;
    let metrics = evaluate_baseline(&model, &val)?;
    write_validation(cfg, "baseline", &metrics)?;
    Ok(metrics)
}

fn context(cfg: &RunConfig) -> PredictorContext {
    PredictorContext { mode: cfg.mode, model_dir: cfg.model_dir() }
}

/// Validation errors of every predictor whose snapshot is available.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<MetricRow>> {
    let (_, val) = load_split(cfg)?;
    let cat = catalog(cfg.mode);
    let registry = Registry::standard();
    let mut rows = Vec::new();
    for name in registry.names() {
        let predictor = match registry.create(name, &context(cfg)) {
            Ok(p) => p,
            Err(Error::ModelNotLoaded) => continue,
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(e),
        };
        for m in evaluate_records(predictor.as_ref(), &val, &cat)? {
            rows.push(MetricRow::from_metrics(name, &m));
        }
    }
    let text = metrics_csv(&rows)?;
    // the table must load back through the same parser
    read_metrics_csv(&text)?;
    write_text(&cfg.report_dir().join(format!("eval-{}.csv", cfg.mode.name())), &text)?;
    Ok(rows)
}

pub fn plan_stem(cfg: &RunConfig) -> String {
    format!("plan-{}-{}-{}", cfg.mode.name(), cfg.task.replace(':', "_"), cfg.predictor)
}

/// Samples inventories per size, plans, verifies and writes plans, the
/// verification table, the success table and its chart.
pub fn cmd_plan(cfg: &RunConfig) -> Result<Vec<TrialResult>> {
    let kind: TaskKind = cfg.task.parse()?;
    let task = Task::new(kind, cfg.mode)?;
    let predictor = Registry::standard().create(&cfg.predictor, &context(cfg))?;
    let cat = catalog(cfg.mode);
    let cache = OptimumCache::default();
    let mut trials = Vec::new();
    for &size in &cfg.sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (size as u64).wrapping_mul(0x9e37_79b9));
        let inventories = sample_feasible_inventories(&cat, size, cfg.samples, &task, &mut rng, &cache);
        trials.extend(run_trials(&inventories, &task, predictor.as_ref(), &cfg.search_config(), &cache)?);
    }
    let dir = cfg.report_dir();
    let stem = plan_stem(cfg);
    write_text(&dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(&trials)?)?;
    let text = verification_csv(&trials)?;
    let rows = read_verification_csv(&text)?;
    write_text(&dir.join(format!("{stem}-verify.csv")), &text)?;
    let table = success_table(&rows);
    write_text(&dir.join(format!("{stem}-success.csv")), &success_csv(&table)?)?;
    write_text(&dir.join(format!("{stem}-success.svg")), &success_chart(&table))?;
    Ok(trials)
}

/// Rebuilds the charts from every table in the report directory.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.report_dir();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    let mut metrics = Vec::new();
    let mut success = Vec::new();
    for p in &entries {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let text = || std::fs::read_to_string(p);
        if name.starts_with("eval-") && name.ends_with(".csv") {
            metrics.extend(read_metrics_csv(&text()?)?);
        } else if name.ends_with("-success.csv") {
            success.extend(read_success_csv(&text()?)?);
        }
    }
    let mut written = Vec::new();
    if !metrics.is_empty() {
        let p = dir.join("report-effect1.svg");
        write_text(&p, &metrics_chart(&metrics))?;
        written.push(p);
    }
    if !success.is_empty() {
        let p = dir.join("report-success.csv");
        write_text(&p, &success_csv(&success)?)?;
        written.push(p);
        let p = dir.join("report-success.svg");
        write_text(&p, &success_chart(&success))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "seed = 7\nepochs = 3\nmode = nonlinear\n").unwrap();
        let cfg = resolve(Some(&file), &[("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.mode, Mode::Nonlinear);
        assert_eq!(cfg.samples, RunConfig::default().samples);
        for key in RunConfig::KEYS {
            let base = RunConfig::default();
            let mut from_file = base.clone();
            let value = base.to_text().lines().find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string)).unwrap();
            from_file.set(key, &value).unwrap();
            assert_eq!(from_file, base, "{key}");
        }
    }

    #[test]
    fn gen_data_writes_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig { out_dir: dir.path().to_path_buf(), records: 50, ..RunConfig::default() };
        let s = cmd_gen_data(&cfg).unwrap();
        assert!(s.records >= 50);
        assert_eq!(s.histogram.values().sum::<usize>(), s.records);
        cfg.max_episodes = 0;
        assert_eq!(cmd_gen_data(&cfg).unwrap().records, 0);
        assert!(matches!(load_split(&cfg), Err(Error::EmptyDataset)));
    }
}
