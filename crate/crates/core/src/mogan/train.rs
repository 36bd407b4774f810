//! Per-sample training of the effect networks and the baseline, plus the
//! per-tower-size validation table.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::{padded_targets, BaselineConfig, BaselineModel};
use super::graph::{build_graph, CompoundGraph, NodeInfo};
use super::model::{CandidatePrediction, FeatureScaler, Head, HeadNet, MoganConfig, MoganModel};
use crate::encoder::{FeatureBank, LatentFeature};
use crate::error::{Error, Result};
use crate::nn::{Adam, ParamSet, StepLr, Tape, Tensor, Var};
use crate::simulator::{InteractionRecord, Mode};

/// What one scheduler step counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrUnit {
    Step,
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lr_step: u64,
    pub lr_unit: LrUnit,
    /// Weight of the sign loss next to the squared error.
    pub sign_weight: f64,
    /// Heads trained concurrently; 1 trains them one after another.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { seed: 42, epochs: 100, lr: 1e-3, gamma: 0.95, lr_step: 10, lr_unit: LrUnit::Epoch, sign_weight: 1.0, workers: 3 }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> StepLr {
        StepLr { base: self.lr, gamma: self.gamma, step: self.lr_step }
    }
}

/// One record prepared for the networks.
#[derive(Debug, Clone)]
pub struct Sample {
    pub nodes: Vec<NodeInfo>,
    pub graph: Option<CompoundGraph>,
    pub new_feat: Vec<f64>,
    pub slot: Option<usize>,
    pub e1: Vec<[f64; 2]>,
    pub e2: Vec<[f64; 4]>,
    pub e3: f64,
}

impl Sample {
    pub fn tower_size(&self) -> usize {
        self.nodes.len()
    }
}

pub fn prepare_samples(records: &[InteractionRecord], bank: &mut FeatureBank, mode: Mode) -> Result<Vec<Sample>> {
    records
        .iter()
        .map(|r| {
            let nodes = r
                .compound
                .iter()
                .map(|v| Ok(NodeInfo::from_view(v, bank.view_feature(v)?)))
                .collect::<Result<Vec<_>>>()?;
            let graph = if nodes.is_empty() { None } else { Some(build_graph(&nodes, mode)?) };
            Ok(Sample {
                nodes,
                graph,
                new_feat: bank.view_feature(&r.new_object)?.to_vec(),
                slot: (mode == Mode::Nonlinear).then_some(r.slot),
                e1: r.e1.clone(),
                e2: r.e2.clone(),
                e3: f64::from(r.e3),
            })
        })
        .collect()
}

/// Standardization over every object feature seen in training.
pub fn fit_scaler(samples: &[Sample], dim: usize) -> FeatureScaler {
    let feats = samples
        .iter()
        .flat_map(|s| s.graph.iter().flat_map(|g| (0..g.len()).map(move |r| &g.node_features.row_slice(r)[..dim])).chain(std::iter::once(&s.new_feat[..dim])));
    FeatureScaler::fit(feats, dim)
}

fn rows_tensor<const N: usize>(rows: &[[f64; N]]) -> Tensor {
    Tensor::from_vec(rows.len(), N, rows.iter().flatten().copied().collect())
}

/// Training loss of one head on one sample; `None` when the head has no
/// target for it (pairwise heads on an empty compound).
pub fn head_loss(net: &HeadNet, params: &ParamSet, tape: &mut Tape, s: &Sample, sign_weight: f64) -> Result<Option<Var>> {
    let k = s.tower_size();
    match net.head {
        Head::E1 | Head::E2 => {
            if k == 0 {
                return Ok(None);
            }
            let queries: Vec<usize> = (0..k).collect();
            let pred = net.forward_with(params, tape, s.graph.as_ref(), &s.new_feat, &queries, s.slot)?;
            let target = if net.head == Head::E1 { rows_tensor(&s.e1) } else { rows_tensor(&s.e2) };
            let mse = tape.mse(pred, target.clone())?;
            let sign = tape.sign_loss(pred, target)?;
            let sign = tape.scale(sign, sign_weight);
            Ok(Some(tape.add(mse, sign)?))
        }
        Head::E3 => {
            let queries: Vec<usize> = if k == 0 { Vec::new() } else { vec![k - 1] };
            let pred = net.forward_with(params, tape, s.graph.as_ref(), &s.new_feat, &queries, s.slot)?;
            Ok(Some(tape.mse(pred, Tensor::scalar(s.e3))?))
        }
    }
}

pub fn baseline_loss(model: &BaselineModel, params: &ParamSet, tape: &mut Tape, s: &Sample, sign_weight: f64) -> Result<Var> {
    let input = model.input_vector(&s.nodes, &s.new_feat, s.slot)?;
    let (effects, collapse) = model.forward_with(params, tape, input)?;
    let target = padded_targets(&s.e1, &s.e2);
    let mse = tape.mse(effects, target.clone())?;
    let sign = tape.sign_loss(effects, target)?;
    let sign = tape.scale(sign, sign_weight);
    let c = tape.mse(collapse, Tensor::scalar(s.e3))?;
    let l = tape.add(mse, sign)?;
    tape.add(l, c)
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub network: String,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Shared per-sample Adam loop. `loss` returns `None` to skip a sample.
fn fit(
    params: &mut ParamSet,
    name: &str,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
    loss: impl Fn(&ParamSet, &mut Tape, &Sample) -> Result<Option<Var>>,
) -> Result<Vec<EpochLoss>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::default();
    let schedule = cfg.schedule();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for &i in &order {
            let mut tape = Tape::new();
            let Some(l) = loss(params, &mut tape, &train[i])? else { continue };
            let lv = tape.value(l).data[0];
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            total += lv;
            count += 1;
            params.zero_grad();
            tape.backward(l);
            tape.accumulate(params);
            let t = match cfg.lr_unit {
                LrUnit::Step => step,
                LrUnit::Epoch => epoch as u64,
            };
            adam.step(params, schedule.lr(t));
            step += 1;
        }
        let (mut vt, mut vc) = (0.0, 0usize);
        for s in val {
            let mut tape = Tape::new();
            if let Some(l) = loss(params, &mut tape, s)? {
                vt += tape.value(l).data[0];
                vc += 1;
            }
        }
        log.push(EpochLoss {
            epoch: epoch + 1,
            network: name.to_string(),
            train_loss: total / count.max(1) as f64,
            val_loss: vt / vc.max(1) as f64,
        });
    }
    Ok(log)
}

fn train_head(net: &mut HeadNet, train: &[Sample], val: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<Vec<EpochLoss>> {
    // the clone carries the layer layout; values come from `params`
    let layout = net.clone();
    let name = format!("mogan_{}", net.head.name());
    fit(&mut net.params, &name, train, val, cfg, seed, |params, tape, s| head_loss(&layout, params, tape, s, cfg.sign_weight))
}

/// Trains the three heads independently, up to `workers` at a time. Each
/// head's run is sequential and seeded, so results do not depend on the
/// worker count.
pub fn train_mogan(train: &[Sample], val: &[Sample], mode: Mode, cfg: &TrainConfig) -> Result<(MoganModel, Vec<EpochLoss>)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = MoganModel::new(MoganConfig::for_mode(mode), cfg.seed);
    model.set_scaler(fit_scaler(train, model.config.new_feature_dim()));
    let seed = |i: usize| cfg.seed.wrapping_add(100 + i as u64);
    let mut logs: Vec<Result<Vec<EpochLoss>>> = Vec::new();
    for (c, chunk) in model.heads.chunks_mut(cfg.workers.max(1)).enumerate() {
        let base = c * cfg.workers.max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                chunk.iter_mut().enumerate().map(|(i, net)| scope.spawn(move || train_head(net, train, val, cfg, seed(base + i)))).collect();
            logs.extend(handles.into_iter().map(|h| h.join().expect("training thread panicked")));
        });
    }
    let mut all = Vec::new();
    for l in logs {
        all.extend(l?);
    }
    Ok((model, all))
}

pub fn train_baseline(train: &[Sample], val: &[Sample], mode: Mode, cfg: &TrainConfig) -> Result<(BaselineModel, Vec<EpochLoss>)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = BaselineModel::new(BaselineConfig::for_mode(mode), cfg.seed.wrapping_add(7));
    model.scaler = fit_scaler(train, LatentFeature::dim(mode));
    let layout = model.clone();
    let log = fit(&mut model.params, "baseline", train, val, cfg, cfg.seed.wrapping_add(200), |params, tape, s| {
        baseline_loss(&layout, params, tape, s, cfg.sign_weight).map(Some)
    })?;
    Ok((model, log))
}

/// Validation errors for one tower size; lengths in decimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeMetrics {
    pub tower_size: usize,
    pub records: usize,
    pub e1_mae: f64,
    pub e2_mae: f64,
    /// Fraction of records whose collapse verdict (cutoff 0.5) is wrong.
    pub e3_error: f64,
}

#[derive(Debug, Default, Clone)]
pub struct MetricsAccumulator {
    by_size: BTreeMap<usize, [f64; 6]>,
}

impl MetricsAccumulator {
    pub fn add(&mut self, tower_size: usize, e1: &[[f64; 2]], e2: &[[f64; 4]], e3: f64, pred: &CandidatePrediction) {
        let acc = self.by_size.entry(tower_size).or_insert([0.0; 6]);
        for (t, p) in e1.iter().zip(&pred.e1) {
            for c in 0..2 {
                acc[0] += (t[c] - p[c]).abs();
                acc[1] += 1.0;
            }
        }
        for (t, p) in e2.iter().zip(&pred.e2) {
            for c in 0..4 {
                acc[2] += (t[c] - p[c]).abs();
                acc[3] += 1.0;
            }
        }
        let verdict = if pred.collapse >= 0.5 { 1.0 } else { 0.0 };
        acc[4] += (verdict - e3).abs();
        acc[5] += 1.0;
    }

    pub fn finish(&self) -> Vec<SizeMetrics> {
        self.by_size
            .iter()
            .map(|(&tower_size, a)| SizeMetrics {
                tower_size,
                records: a[5] as usize,
                e1_mae: if a[1] > 0.0 { a[0] / a[1] } else { 0.0 },
                e2_mae: if a[3] > 0.0 { a[2] / a[3] } else { 0.0 },
                e3_error: a[4] / a[5].max(1.0),
            })
            .collect()
    }
}

pub fn evaluate_samples(samples: &[Sample], predict: impl Fn(&Sample) -> Result<CandidatePrediction>) -> Result<Vec<SizeMetrics>> {
    let mut acc = MetricsAccumulator::default();
    for s in samples {
        acc.add(s.tower_size(), &s.e1, &s.e2, s.e3, &predict(s)?);
    }
    Ok(acc.finish())
}

pub fn evaluate_mogan(model: &MoganModel, samples: &[Sample]) -> Result<Vec<SizeMetrics>> {
    evaluate_samples(samples, |s| model.predict_candidate(s.graph.as_ref(), &s.new_feat, s.slot))
}

pub fn evaluate_baseline(model: &BaselineModel, samples: &[Sample]) -> Result<Vec<SizeMetrics>> {
    evaluate_samples(samples, |s| model.predict_candidate(&s.nodes, &s.new_feat, s.slot))
}
