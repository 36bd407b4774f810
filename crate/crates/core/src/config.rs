//! Run configuration: defaults, a flat `key = value` file, then flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::GenConfig;
use crate::encoder::AutoencoderConfig;
use crate::error::{Error, Result};
use crate::mogan::{LrUnit, TrainConfig};
use crate::planner::SearchConfig;
use crate::simulator::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    pub records: usize,
    pub max_episodes: usize,
    pub min_inventory: usize,
    pub max_inventory: usize,
    pub val_fraction: f64,
    pub out_dir: PathBuf,
    /// Explicit paths; empty means "derive from `out_dir`".
    pub dataset: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub epochs: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lr_step: u64,
    pub lr_unit: LrUnit,
    pub sign_weight: f64,
    pub workers: usize,
    pub ae_max_epochs: usize,
    pub ae_patience: usize,
    pub budget: usize,
    pub cutoff: f64,
    pub predictor: String,
    pub task: String,
    pub sizes: Vec<usize>,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gen = GenConfig::default();
        let train = TrainConfig::default();
        let ae = AutoencoderConfig::default();
        let search = SearchConfig::default();
        RunConfig {
            seed: 42,
            mode: Mode::Linear,
            records: gen.target_records,
            max_episodes: gen.max_episodes,
            min_inventory: gen.min_inventory,
            max_inventory: gen.max_inventory,
            val_fraction: 0.1,
            out_dir: PathBuf::from("out"),
            dataset: None,
            model_dir: None,
            report_dir: None,
            epochs: train.epochs,
            lr: train.lr,
            gamma: train.gamma,
            lr_step: train.lr_step,
            lr_unit: train.lr_unit,
            sign_weight: train.sign_weight,
            workers: train.workers,
            ae_max_epochs: ae.max_epochs,
            ae_patience: ae.patience,
            budget: search.budget,
            cutoff: search.cutoff,
            predictor: "mogan".into(),
            task: "tallest".into(),
            sizes: vec![2, 3, 4, 5],
            samples: 10,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// `2..5`, `2,3,4` or a single size.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (parse("sizes", a.trim())?, parse("sizes", b.trim().trim_start_matches('='))?);
        if a > b {
            return Err(Error::Config(format!("empty size range `{s}`")));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| parse("sizes", x.trim())).collect()
}

impl RunConfig {
    pub const KEYS: [&'static str; 26] = [
        "seed", "mode", "records", "max_episodes", "min_inventory", "max_inventory", "val_fraction", "out_dir", "dataset", "model_dir",
        "report_dir", "epochs", "lr", "gamma", "lr_step", "lr_unit", "sign_weight", "workers", "ae_max_epochs", "ae_patience", "budget", "cutoff",
        "predictor", "task", "sizes", "samples",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "records" => self.records = parse(key, value)?,
            "max_episodes" => self.max_episodes = parse(key, value)?,
            "min_inventory" => self.min_inventory = parse(key, value)?,
            "max_inventory" => self.max_inventory = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "dataset" => self.dataset = path(value),
            "model_dir" => self.model_dir = path(value),
            "report_dir" => self.report_dir = path(value),
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "lr_step" => self.lr_step = parse(key, value)?,
            "lr_unit" => {
                self.lr_unit = match value {
                    "step" => LrUnit::Step,
                    "epoch" => LrUnit::Epoch,
                    _ => return Err(Error::Config(format!("bad value `{value}` for `lr_unit`"))),
                }
            }
            "sign_weight" => self.sign_weight = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "ae_max_epochs" => self.ae_max_epochs = parse(key, value)?,
            "ae_patience" => self.ae_patience = parse(key, value)?,
            "budget" => self.budget = parse(key, value)?,
            "cutoff" => self.cutoff = parse(key, value)?,
            "predictor" => self.predictor = value.to_string(),
            "task" => self.task = value.to_string(),
            "sizes" => self.sizes = parse_sizes(value)?,
            "samples" => self.samples = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let unit = match self.lr_unit {
            LrUnit::Step => "step",
            LrUnit::Epoch => "epoch",
        };
        let sizes: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        let values = [
            self.seed.to_string(),
            self.mode.name().to_string(),
            self.records.to_string(),
            self.max_episodes.to_string(),
            self.min_inventory.to_string(),
            self.max_inventory.to_string(),
            format!("{:?}", self.val_fraction),
            self.out_dir.display().to_string(),
            p(&self.dataset),
            p(&self.model_dir),
            p(&self.report_dir),
            self.epochs.to_string(),
            format!("{:?}", self.lr),
            format!("{:?}", self.gamma),
            self.lr_step.to_string(),
            unit.to_string(),
            format!("{:?}", self.sign_weight),
            self.workers.to_string(),
            self.ae_max_epochs.to_string(),
            self.ae_patience.to_string(),
            self.budget.to_string(),
            format!("{:?}", self.cutoff),
            self.predictor.clone(),
            self.task.clone(),
            sizes.join(","),
            self.samples.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out_dir.join(format!("dataset-{}.jsonl", self.mode.name())))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.out_dir.join("models"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.report_dir.clone().unwrap_or_else(|| self.out_dir.join("reports"))
    }

    pub fn validate(&self) -> Result<()> {
        let paths = [self.dataset_path(), self.model_dir(), self.report_dir()];
        if paths[0] == paths[1] || paths[0] == paths[2] || paths[1] == paths[2] {
            return Err(Error::Config("dataset, model and report paths must differ".into()));
        }
        let positive = [("lr", self.lr), ("gamma", self.gamma), ("sign_weight", self.sign_weight), ("cutoff", self.cutoff)];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if self.epochs == 0 || self.lr_step == 0 || self.budget == 0 || self.workers == 0 {
            return Err(Error::Config("epochs, lr_step, budget and workers must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
        }
        if self.min_inventory == 0 || self.min_inventory > self.max_inventory {
            return Err(Error::Config("inventory range is empty".into()));
        }
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            seed: self.seed,
            mode: self.mode,
            target_records: self.records,
            max_episodes: self.max_episodes,
            min_inventory: self.min_inventory,
            max_inventory: self.max_inventory,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            epochs: self.epochs,
            lr: self.lr,
            gamma: self.gamma,
            lr_step: self.lr_step,
            lr_unit: self.lr_unit,
            sign_weight: self.sign_weight,
            workers: self.workers,
        }
    }

    pub fn autoencoder_config(&self) -> AutoencoderConfig {
        AutoencoderConfig { seed: self.seed, max_epochs: self.ae_max_epochs, patience: self.ae_patience, ..AutoencoderConfig::default() }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig { budget: self.budget, cutoff: self.cutoff }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.set("mode", "nonlinear").unwrap();
        c.set("sizes", "2..4").unwrap();
        c.set("dataset", "/tmp/d.jsonl").unwrap();
        c.set("lr", "0.00025").unwrap();
        let text = c.to_text();
        let mut back = RunConfig::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.sizes, vec![2, 3, 4]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("seed", "-1").is_err());
        assert!(c.apply_text("seed 4").is_err());
        assert!(parse_sizes("5..2").is_err());
        c.set("lr", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("dataset", "out/models").unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
