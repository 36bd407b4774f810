//! Graph-free feed-forward baseline over zero-padded concatenated features.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{node_dim, node_vector, slot_one_hot, NodeInfo, SLOTS};
use super::model::{sidecar_path, CandidatePrediction, FeatureScaler};
use crate::encoder::LatentFeature;
use crate::error::{Error, Result};
use crate::nn::{load_params, save_params, Mlp, ParamSet, Tape, Tensor, Var};
use crate::simulator::Mode;

pub const MAX_OBJECTS: usize = 14;
pub const BASELINE_PARAM_TARGET: usize = 50178;
/// Per member: e1 (2) then e2 (4).
pub const PER_SLOT: usize = 6;
pub const OUTPUT_DIM: usize = MAX_OBJECTS * PER_SLOT + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub mode: Mode,
    /// Encoder-decoder widths `[a, a/2, a]`.
    pub hidden: [usize; 3],
}

impl BaselineConfig {
    pub fn for_mode(mode: Mode) -> Self {
        (8..=512)
            .map(|a| BaselineConfig { mode, hidden: [a, a / 2, a] })
            .min_by_key(|c| c.scalar_count().abs_diff(BASELINE_PARAM_TARGET))
            .expect("nonempty range")
    }

    pub fn input_dim(&self) -> usize {
        let slots = match self.mode {
            Mode::Linear => 0,
            Mode::Nonlinear => SLOTS,
        };
        node_dim(self.mode) * MAX_OBJECTS + LatentFeature::dim(self.mode) + slots
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.hidden);
        w.push(OUTPUT_DIM);
        w
    }

    pub fn scalar_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub params: ParamSet,
    pub scaler: FeatureScaler,
    mlp: Mlp,
}

impl BaselineModel {
    pub fn new(config: BaselineConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        let mlp = Mlp::new(&mut params, "baseline", &config.widths(), &mut rng);
        let scaler = FeatureScaler::identity(LatentFeature::dim(config.mode));
        BaselineModel { config, params, scaler, mlp }
    }

    /// Members in placement order, zero-padded, then the new object (and its slot).
    pub fn input_vector(&self, members: &[NodeInfo], new_feat: &[f64], slot: Option<usize>) -> Result<Vec<f64>> {
        if members.len() > MAX_OBJECTS {
            return Err(Error::CompoundTooLarge(members.len()));
        }
        let mode = self.config.mode;
        let mut v = vec![0.0; self.config.input_dim()];
        let f = node_dim(mode);
        let k = members.len();
        for (i, m) in members.iter().enumerate() {
            let mut node = node_vector(m, mode, k - 1 - i);
            self.scaler.apply(&mut node);
            v[i * f..(i + 1) * f].copy_from_slice(&node);
        }
        let start = f * MAX_OBJECTS;
        v[start..start + new_feat.len()].copy_from_slice(new_feat);
        self.scaler.apply(&mut v[start..start + new_feat.len()]);
        if mode == Mode::Nonlinear {
            let s = start + new_feat.len();
            v[s..s + SLOTS].copy_from_slice(&slot_one_hot(slot.unwrap_or(crate::simulator::CENTER_SLOT)));
        }
        Ok(v)
    }

    /// Raw output row: the last column passes through a sigmoid.
    pub fn forward(&self, tape: &mut Tape, input: Vec<f64>) -> Result<(Var, Var)> {
        self.forward_with(&self.params, tape, input)
    }

    pub fn forward_with(&self, params: &ParamSet, tape: &mut Tape, input: Vec<f64>) -> Result<(Var, Var)> {
        let x = tape.constant(Tensor::row(input));
        let out = self.mlp.forward(tape, params, x)?;
        let effects = tape.slice_cols(out, 0, MAX_OBJECTS * PER_SLOT);
        let logit = tape.slice_cols(out, MAX_OBJECTS * PER_SLOT, OUTPUT_DIM);
        let collapse = tape.sigmoid(logit);
        Ok((effects, collapse))
    }

    pub fn predict_candidate(&self, members: &[NodeInfo], new_feat: &[f64], slot: Option<usize>) -> Result<CandidatePrediction> {
        let input = self.input_vector(members, new_feat, slot)?;
        let mut tape = Tape::new();
        let (effects, collapse) = self.forward(&mut tape, input)?;
        let e = tape.value(effects);
        let mut pred = CandidatePrediction { e1: Vec::new(), e2: Vec::new(), collapse: tape.value(collapse).data[0] };
        for i in 0..members.len() {
            let r = &e.data[i * PER_SLOT..(i + 1) * PER_SLOT];
            pred.e1.push([r[0], r[1]]);
            pred.e2.push([r[2], r[3], r[4], r[5]]);
        }
        Ok(pred)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_params(path, &self.params)?;
        let meta = BaselineMeta { config: self.config, scaler: self.scaler.clone() };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: BaselineMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let mut model = BaselineModel::new(meta.config, 0);
        model.scaler = meta.scaler;
        load_params(path, &mut model.params)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BaselineMeta {
    config: BaselineConfig,
    scaler: FeatureScaler,
}

/// Zero-padded `e1 ‖ e2` targets for every slot.
pub fn padded_targets(e1: &[[f64; 2]], e2: &[[f64; 4]]) -> Tensor {
    let mut t = vec![0.0; MAX_OBJECTS * PER_SLOT];
    for (i, (a, b)) in e1.iter().zip(e2).enumerate().take(MAX_OBJECTS) {
        t[i * PER_SLOT..i * PER_SLOT + 2].copy_from_slice(a);
        t[i * PER_SLOT + 2..(i + 1) * PER_SLOT].copy_from_slice(b);
    }
    Tensor::row(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    fn member(v: f64) -> NodeInfo {
        NodeInfo {
            feature: LatentFeature { z: [v; 4], d_min: 0.9, d_max: 1.0, orientation_flag: None },
            slot: 1,
            aabb: Aabb { x_min: 0.0, x_max: 0.1, y_min: 0.0, y_max: 0.1, z_min: 0.0, z_max: 0.1 },
            supports: Vec::new(),
        }
    }

    #[test]
    fn budget_and_dimensions() {
        for mode in [Mode::Linear, Mode::Nonlinear] {
            let cfg = BaselineConfig::for_mode(mode);
            let model = BaselineModel::new(cfg, 0);
            assert_eq!(model.params.scalar_count(), cfg.scalar_count());
            let dev = (cfg.scalar_count() as f64 - BASELINE_PARAM_TARGET as f64).abs() / BASELINE_PARAM_TARGET as f64;
            assert!(dev <= 0.05, "{}", cfg.scalar_count());
        }
        let cfg = BaselineConfig::for_mode(Mode::Linear);
        assert_eq!(cfg.input_dim(), 7 * 14 + 6);
    }

    #[test]
    fn padding_is_exact_zero() {
        let model = BaselineModel::new(BaselineConfig::for_mode(Mode::Linear), 0);
        let new = member(0.7).feature.to_vec();
        let v = model.input_vector(&[member(0.1), member(0.2)], &new, None).unwrap();
        assert!(v[14..98].iter().all(|&x| x == 0.0 && x.is_sign_positive()));
        assert_eq!(&v[98..], new.as_slice());
        let too_many = vec![member(0.1); 15];
        assert!(matches!(model.input_vector(&too_many, &new, None), Err(Error::CompoundTooLarge(15))));
        let p = model.predict_candidate(&[member(0.1), member(0.2)], &new, None).unwrap();
        assert_eq!(p.e1.len(), 2);
    }

    #[test]
    fn targets_pad_with_zeros() {
        let t = padded_targets(&[[1.0, 2.0]], &[[3.0, 4.0, 5.0, 6.0]]);
        assert_eq!(&t.data[..6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(t.data[6..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn snapshot_round_trip() {
        let model = BaselineModel::new(BaselineConfig::for_mode(Mode::Linear), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("baseline.bin");
        model.save(&path).unwrap();
        let back = BaselineModel::load(&path).unwrap();
        let new = member(0.3).feature.to_vec();
        assert_eq!(
            model.predict_candidate(&[member(0.5)], &new, None).unwrap(),
            back.predict_candidate(&[member(0.5)], &new, None).unwrap()
        );
    }
}
