use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{node_dim, slot_one_hot, CompoundGraph, SLOTS};
use crate::encoder::LatentFeature;
use crate::error::{Error, Result};
use crate::nn::{read_params, write_params, GraphConv, Mlp, ParamSet, Tape, Tensor, Var};
use crate::simulator::Mode;

/// Trainable-scalar budget shared by the three heads.
pub const MOGAN_PARAM_TARGET: usize = 46786;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Head {
    E1,
    E2,
    E3,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::E1, Head::E2, Head::E3];

    pub fn out_dim(self) -> usize {
        match self {
            Head::E1 => 2,
            Head::E2 => 4,
            Head::E3 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::E1 => "e1",
            Head::E2 => "e2",
            Head::E3 => "e3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoganConfig {
    pub mode: Mode,
    pub graph_hidden: usize,
    pub embed: usize,
    pub decoder_hidden: [usize; 2],
}

impl MoganConfig {
    /// Standard widths with the decoder sized to land on the parameter budget.
    pub fn for_mode(mode: Mode) -> Self {
        let base = MoganConfig { mode, graph_hidden: 32, embed: 32, decoder_hidden: [64, 32] };
        (8..=256)
            .map(|d1| MoganConfig { decoder_hidden: [d1, d1 / 2], ..base })
            .min_by_key(|c| c.scalar_count().abs_diff(MOGAN_PARAM_TARGET))
            .expect("nonempty range")
    }

    pub fn new_feature_dim(&self) -> usize {
        LatentFeature::dim(self.mode)
    }

    pub fn slot_dim(&self) -> usize {
        match self.mode {
            Mode::Linear => 0,
            Mode::Nonlinear => SLOTS,
        }
    }

    pub fn decoder_input(&self) -> usize {
        self.new_feature_dim() + 2 * self.embed + self.embed + node_dim(self.mode) + self.slot_dim()
    }

    pub fn head_scalar_count(&self, head: Head) -> usize {
        let f = node_dim(self.mode);
        let gc = f * self.graph_hidden + self.graph_hidden + self.graph_hidden * self.embed + self.embed;
        let [d1, d2] = self.decoder_hidden;
        let dec = self.decoder_input() * d1 + d1 + d1 * d2 + d2 + d2 * head.out_dim() + head.out_dim();
        gc + dec
    }

    pub fn scalar_count(&self) -> usize {
        Head::ALL.iter().map(|h| self.head_scalar_count(*h)).sum()
    }
}

/// Per-dimension standardization of object features, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        FeatureScaler { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Constant dimensions keep unit scale.
    pub fn fit<'a>(features: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = features.collect();
        if rows.is_empty() {
            return Self::identity(dim);
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|d| {
                let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-9 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        FeatureScaler { mean, scale }
    }

    /// Scales the leading feature dimensions of `v` in place.
    pub fn apply(&self, v: &mut [f64]) {
        for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }
}

/// One effect network: two graph convolutions, mean+max pooling and a
/// query-conditioned three-layer decoder.
#[derive(Debug, Clone)]
pub struct HeadNet {
    pub head: Head,
    pub config: MoganConfig,
    pub params: ParamSet,
    pub scaler: FeatureScaler,
    gc1: GraphConv,
    gc2: GraphConv,
    decoder: Mlp,
}

impl HeadNet {
    pub fn new(head: Head, config: MoganConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        let f = node_dim(config.mode);
        let gc1 = GraphConv::new(&mut params, "gc1", f, config.graph_hidden, &mut rng);
        let gc2 = GraphConv::new(&mut params, "gc2", config.graph_hidden, config.embed, &mut rng);
        let [d1, d2] = config.decoder_hidden;
        let decoder = Mlp::new(&mut params, "decoder", &[config.decoder_input(), d1, d2, head.out_dim()], &mut rng);
        let scaler = FeatureScaler::identity(config.new_feature_dim());
        HeadNet { head, config, params, scaler, gc1, gc2, decoder }
    }

    /// Predictions for each query index, one row per query. Without a graph
    /// the pooled and query embeddings are zero and a single row is produced.
    pub fn forward(
        &self,
        tape: &mut Tape,
        graph: Option<&CompoundGraph>,
        new_feat: &[f64],
        queries: &[usize],
        slot: Option<usize>,
    ) -> Result<Var> {
        self.forward_with(&self.params, tape, graph, new_feat, queries, slot)
    }

    /// Same as `forward` with parameter values taken from `params`.
    pub fn forward_with(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        graph: Option<&CompoundGraph>,
        new_feat: &[f64],
        queries: &[usize],
        slot: Option<usize>,
    ) -> Result<Var> {
        let fdim = self.config.new_feature_dim();
        if new_feat.len() != fdim {
            return Err(Error::ShapeMismatch(format!("new feature has {} values, expected {fdim}", new_feat.len())));
        }
        let e = self.config.embed;
        let (rows, pooled, embedded) = match graph {
            Some(g) => {
                let k = g.len();
                if let Some(&bad) = queries.iter().find(|&&q| q >= k) {
                    return Err(Error::BadQueryIndex { index: bad, size: k });
                }
                let q = queries.len();
                let mut nodes = g.node_features.clone();
                let f = nodes.cols();
                for r in 0..k {
                    self.scaler.apply(&mut nodes.data[r * f..(r + 1) * f]);
                }
                let x = tape.constant(nodes);
                let a = tape.constant(g.adjacency.matrix.clone());
                let h = self.gc1.forward(tape, params, x, a)?;
                let h = tape.leaky_relu(h);
                let h = self.gc2.forward(tape, params, h, a)?;
                let h = tape.leaky_relu(h);
                let agg = tape.mean_max(h)?;
                let ones = tape.constant(Tensor::from_vec(q, 1, vec![1.0; q]));
                let pooled = tape.matmul(ones, agg)?;
                let mut sel = Tensor::zeros(q, k);
                for (r, &qi) in queries.iter().enumerate() {
                    sel.data[r * k + qi] = 1.0;
                }
                let sel = tape.constant(sel);
                // the queried node's own input features ride along with its embedding
                let embedded = tape.matmul(sel, h)?;
                let raw = tape.matmul(sel, x)?;
                let embedded = tape.concat(&[embedded, raw])?;
                (q, pooled, embedded)
            }
            None => {
                let pooled = tape.constant(Tensor::zeros(1, 2 * e));
                let embedded = tape.constant(Tensor::zeros(1, e + node_dim(self.config.mode)));
                (1, pooled, embedded)
            }
        };
        let mut own = Vec::with_capacity(rows * (fdim + self.config.slot_dim()));
        let mut scaled = new_feat.to_vec();
        self.scaler.apply(&mut scaled);
        for _ in 0..rows {
            own.extend_from_slice(&scaled);
        }
        let own = tape.constant(Tensor::from_vec(rows, fdim, own));
        let mut parts = vec![own, pooled, embedded];
        if self.config.slot_dim() > 0 {
            let hot = slot_one_hot(slot.unwrap_or(crate::simulator::CENTER_SLOT));
            let data = (0..rows).flat_map(|_| hot).collect();
            parts.push(tape.constant(Tensor::from_vec(rows, SLOTS, data)));
        }
        let input = tape.concat(&parts)?;
        let out = self.decoder.forward(tape, params, input)?;
        Ok(match self.head {
            Head::E3 => tape.sigmoid(out),
            _ => out,
        })
    }

    /// Inference helper returning plain rows.
    pub fn predict(&self, graph: Option<&CompoundGraph>, new_feat: &[f64], queries: &[usize], slot: Option<usize>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let v = self.forward(&mut tape, graph, new_feat, queries, slot)?;
        Ok(tape.value(v).clone())
    }
}

/// The three effect networks, kept fully separate.
#[derive(Debug, Clone)]
pub struct MoganModel {
    pub config: MoganConfig,
    pub heads: [HeadNet; 3],
}

/// Effects predicted for one candidate placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePrediction {
    pub e1: Vec<[f64; 2]>,
    pub e2: Vec<[f64; 4]>,
    pub collapse: f64,
}

impl MoganModel {
    pub fn new(config: MoganConfig, seed: u64) -> Self {
        let heads = [
            HeadNet::new(Head::E1, config, seed.wrapping_mul(3)),
            HeadNet::new(Head::E2, config, seed.wrapping_mul(3).wrapping_add(1)),
            HeadNet::new(Head::E3, config, seed.wrapping_mul(3).wrapping_add(2)),
        ];
        MoganModel { config, heads }
    }

    pub fn set_scaler(&mut self, scaler: FeatureScaler) {
        for h in &mut self.heads {
            h.scaler = scaler.clone();
        }
    }

    pub fn head(&self, h: Head) -> &HeadNet {
        &self.heads[h as usize]
    }

    pub fn scalar_count(&self) -> usize {
        self.heads.iter().map(|h| h.params.scalar_count()).sum()
    }

    /// Queries every member for e1/e2 and the top member for e3.
    pub fn predict_candidate(&self, graph: Option<&CompoundGraph>, new_feat: &[f64], slot: Option<usize>) -> Result<CandidatePrediction> {
        let k = graph.map_or(0, CompoundGraph::len);
        let queries: Vec<usize> = (0..k).collect();
        let (e1, e2) = if k == 0 {
            (Vec::new(), Vec::new())
        } else {
            let a = self.head(Head::E1).predict(graph, new_feat, &queries, slot)?;
            let b = self.head(Head::E2).predict(graph, new_feat, &queries, slot)?;
            (
                (0..k).map(|r| [a.get(r, 0), a.get(r, 1)]).collect(),
                (0..k).map(|r| [b.get(r, 0), b.get(r, 1), b.get(r, 2), b.get(r, 3)]).collect(),
            )
        };
        let top: Vec<usize> = if k == 0 { Vec::new() } else { vec![k - 1] };
        let c = self.head(Head::E3).predict(graph, new_feat, &top, slot)?;
        Ok(CandidatePrediction { e1, e2, collapse: c.data[0] })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for h in &self.heads {
            write_params(&mut w, &h.params)?;
        }
        w.flush()?;
        let meta = MoganMeta { config: self.config, scaler: self.heads[0].scaler.clone() };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: MoganMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let mut model = MoganModel::new(meta.config, 0);
        model.set_scaler(meta.scaler);
        let mut r = BufReader::new(std::fs::File::open(path)?);
        for h in &mut model.heads {
            read_params(&mut r, &mut h.params)?;
        }
        Ok(model)
    }
}

/// Architecture and input scaling stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoganMeta {
    pub config: MoganConfig,
    pub scaler: FeatureScaler,
}

/// `model.bin` -> `model.bin.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mogan::graph::{build_graph, NodeInfo};
    use crate::geometry::Aabb;

    fn node(z: f64, top: f64) -> NodeInfo {
        NodeInfo {
            feature: LatentFeature { z: [z, -z, 0.5 * z, 1.0], d_min: 1.0 - top, d_max: 1.0, orientation_flag: None },
            slot: 1,
            aabb: Aabb { x_min: -0.05, x_max: 0.05, y_min: -0.05, y_max: 0.05, z_min: 0.0, z_max: top },
            supports: Vec::new(),
        }
    }

    #[test]
    fn parameter_budget() {
        for mode in [Mode::Linear, Mode::Nonlinear] {
            let cfg = MoganConfig::for_mode(mode);
            let model = MoganModel::new(cfg, 1);
            assert_eq!(model.scalar_count(), cfg.scalar_count());
            let dev = (model.scalar_count() as f64 - MOGAN_PARAM_TARGET as f64).abs() / MOGAN_PARAM_TARGET as f64;
            assert!(dev <= 0.05, "{mode:?}: {}", model.scalar_count());
        }
    }

    #[test]
    fn output_shapes_and_empty_path() {
        let model = MoganModel::new(MoganConfig::for_mode(Mode::Linear), 3);
        let nodes = vec![node(0.1, 0.1), node(0.2, 0.2), node(-0.3, 0.05)];
        let g = build_graph(&nodes, Mode::Linear).unwrap();
        let feat = node(0.4, 0.1).feature.to_vec();
        let p = model.predict_candidate(Some(&g), &feat, None).unwrap();
        assert_eq!(p.e1.len(), 3);
        assert_eq!(p.e2.len(), 3);
        assert!(p.collapse > 0.0 && p.collapse < 1.0);
        let empty = model.predict_candidate(None, &feat, None).unwrap();
        assert!(empty.e1.is_empty());
        assert!(empty.collapse > 0.0 && empty.collapse < 1.0);
        assert_eq!(model.predict_candidate(None, &feat, None).unwrap(), empty);
        let err = model.head(Head::E1).predict(Some(&g), &feat, &[3], None);
        assert!(matches!(err, Err(Error::BadQueryIndex { index: 3, size: 3 })));
    }

    #[test]
    fn relabeling_nodes_preserves_outputs() {
        let model = MoganModel::new(MoganConfig::for_mode(Mode::Linear), 9);
        let nodes = vec![node(0.1, 0.1), node(0.2, 0.2), node(-0.3, 0.05)];
        let g = build_graph(&nodes, Mode::Linear).unwrap();
        // reversed labels: feature rows and edges remapped together
        let perm = [2usize, 1, 0];
        let mut pg = g.clone();
        let f = g.node_features.cols();
        for (old, &new) in perm.iter().enumerate() {
            pg.node_features.data[new * f..(new + 1) * f].copy_from_slice(g.node_features.row_slice(old));
        }
        pg.edges = g.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        pg.adjacency = crate::nn::AdjacencyNorm::new(3, &pg.edges);
        let feat = node(0.4, 0.1).feature.to_vec();
        for q in 0..3 {
            for h in Head::ALL {
                let a = model.head(h).predict(Some(&g), &feat, &[q], None).unwrap();
                let b = model.head(h).predict(Some(&pg), &feat, &[perm[q]], None).unwrap();
                for (x, y) in a.data.iter().zip(&b.data) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let mut model = MoganModel::new(MoganConfig::for_mode(Mode::Nonlinear), 4);
        model.set_scaler(FeatureScaler { mean: vec![0.1; 7], scale: vec![2.0; 7] });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mogan.bin");
        model.save(&path).unwrap();
        let back = MoganModel::load(&path).unwrap();
        let mut n = node(0.1, 0.1);
        n.feature.orientation_flag = Some(1.0);
        let g = build_graph(&[n.clone()], Mode::Nonlinear).unwrap();
        let feat = n.feature.to_vec();
        assert_eq!(model.predict_candidate(Some(&g), &feat, Some(0)).unwrap(), back.predict_candidate(Some(&g), &feat, Some(0)).unwrap());
    }
}
