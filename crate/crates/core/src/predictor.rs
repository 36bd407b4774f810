//! Effect predictors behind a common trait, created by name from a registry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::effects::effect_row;
use crate::encoder::{Encoder, FeatureBank};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ObjectSpec, Orientation};
use crate::mogan::{build_graph, BaselineModel, CandidatePrediction, MetricsAccumulator, MoganModel, NodeInfo, SizeMetrics};
use crate::simulator::{place, simulate_sequence, InteractionRecord, Mode};

/// One release: which object, where, and which way up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub spec: ObjectSpec,
    pub slot: usize,
    pub orientation: Orientation,
}

impl Action {
    pub fn new(spec: ObjectSpec, slot: usize, orientation: Orientation) -> Self {
        Action { spec, slot, orientation }
    }

    pub fn tuple(&self) -> (ObjectSpec, usize, Orientation) {
        (self.spec, self.slot, self.orientation)
    }
}

/// Where a member sits, either measured or believed.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberGeometry {
    pub aabb: Aabb,
    pub supports: Vec<usize>,
}

/// A compound as seen by a predictor: the actions that built it and the
/// geometry used for graph edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub actions: Vec<Action>,
    pub members: Vec<MemberGeometry>,
}

impl Scene {
    /// Replays `actions` and records the settled geometry.
    pub fn simulated(actions: Vec<Action>) -> Self {
        let tuples: Vec<_> = actions.iter().map(Action::tuple).collect();
        let (compound, _) = simulate_sequence(&tuples);
        let members = compound.placements.iter().map(|p| MemberGeometry { aabb: p.aabb(), supports: p.supports.clone() }).collect();
        Scene { actions, members }
    }

    /// The compound before a recorded placement plus that placement.
    pub fn from_record(record: &InteractionRecord, catalog: &[ObjectSpec]) -> Result<(Scene, Action)> {
        let spec = |id: u32| {
            catalog.iter().find(|s| s.id == id).copied().ok_or(Error::Unknown { kind: "object id", name: id.to_string() })
        };
        let mut scene = Scene::default();
        for v in &record.compound {
            scene.actions.push(Action::new(spec(v.id)?, v.slot, v.orientation));
            scene.members.push(MemberGeometry { aabb: v.aabb, supports: v.supports.clone() });
        }
        Ok((scene, Action::new(spec(record.new_object.id)?, record.slot, record.orientation)))
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

pub trait EffectPredictor: Send + Sync {
    fn name(&self) -> &str;

    /// Per-member `e1`/`e2` rows and the collapse probability of placing
    /// `candidate` onto `scene`.
    fn predict(&self, scene: &Scene, candidate: &Action) -> Result<CandidatePrediction>;
}

/// Simulator ground truth presented as a predictor.
#[derive(Debug, Default, Clone, Copy)]
pub struct OraclePredictor;

impl EffectPredictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, scene: &Scene, candidate: &Action) -> Result<CandidatePrediction> {
        let tuples: Vec<_> = scene.actions.iter().map(Action::tuple).collect();
        let (compound, _) = simulate_sequence(&tuples);
        if compound.collapsed || compound.len() < scene.len() {
            let k = scene.len();
            return Ok(CandidatePrediction { e1: vec![[0.0; 2]; k], e2: vec![[0.0; 4]; k], collapse: 1.0 });
        }
        let (after, _) = place(&compound, &candidate.spec, candidate.slot, candidate.orientation)?;
        let new = after.placements.last().expect("just placed");
        let row = effect_row(&after, new);
        Ok(CandidatePrediction { e1: row.e1, e2: row.e2, collapse: f64::from(row.e3) })
    }
}

fn scene_nodes(bank: &Mutex<FeatureBank>, scene: &Scene) -> Result<Vec<NodeInfo>> {
    if scene.members.len() != scene.actions.len() {
        return Err(Error::ShapeMismatch(format!("{} members for {} actions", scene.members.len(), scene.actions.len())));
    }
    let mut bank = bank.lock().expect("feature bank poisoned");
    scene
        .actions
        .iter()
        .zip(&scene.members)
        .map(|(a, m)| Ok(NodeInfo { feature: bank.feature(&a.spec, a.orientation)?, slot: a.slot, aabb: m.aabb, supports: m.supports.clone() }))
        .collect()
}

fn candidate_inputs(bank: &Mutex<FeatureBank>, mode: Mode, candidate: &Action) -> Result<(Vec<f64>, Option<usize>)> {
    let f = bank.lock().expect("feature bank poisoned").feature(&candidate.spec, candidate.orientation)?;
    Ok((f.to_vec(), (mode == Mode::Nonlinear).then_some(candidate.slot)))
}

pub struct MoganPredictor {
    pub model: MoganModel,
    bank: Mutex<FeatureBank>,
}

impl MoganPredictor {
    pub fn new(model: MoganModel, encoder: Encoder) -> Self {
        let bank = FeatureBank::new(encoder, model.config.mode);
        MoganPredictor { model, bank: Mutex::new(bank) }
    }
}

impl EffectPredictor for MoganPredictor {
    fn name(&self) -> &str {
        "mogan"
    }

    fn predict(&self, scene: &Scene, candidate: &Action) -> Result<CandidatePrediction> {
        let mode = self.model.config.mode;
        let nodes = scene_nodes(&self.bank, scene)?;
        let graph = if nodes.is_empty() { None } else { Some(build_graph(&nodes, mode)?) };
        let (feat, slot) = candidate_inputs(&self.bank, mode, candidate)?;
        self.model.predict_candidate(graph.as_ref(), &feat, slot)
    }
}

pub struct BaselinePredictor {
    pub model: BaselineModel,
    bank: Mutex<FeatureBank>,
}

impl BaselinePredictor {
    pub fn new(model: BaselineModel, encoder: Encoder) -> Self {
        let bank = FeatureBank::new(encoder, model.config.mode);
        BaselinePredictor { model, bank: Mutex::new(bank) }
    }
}

impl EffectPredictor for BaselinePredictor {
    fn name(&self) -> &str {
        "baseline"
    }

    fn predict(&self, scene: &Scene, candidate: &Action) -> Result<CandidatePrediction> {
        let nodes = scene_nodes(&self.bank, scene)?;
        let (feat, slot) = candidate_inputs(&self.bank, self.model.config.mode, candidate)?;
        self.model.predict_candidate(&nodes, &feat, slot)
    }
}

/// Snapshot file names inside a model directory.
pub fn encoder_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("encoder-{}.bin", mode.name()))
}

pub fn mogan_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("mogan-{}.bin", mode.name()))
}

pub fn baseline_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("baseline-{}.bin", mode.name()))
}

/// What a factory needs to build a predictor.
#[derive(Debug, Clone)]
pub struct PredictorContext {
    pub mode: Mode,
    pub model_dir: PathBuf,
}

pub type PredictorFactory = fn(&PredictorContext) -> Result<Box<dyn EffectPredictor>>;

fn load_encoder(ctx: &PredictorContext) -> Result<Encoder> {
    let path = encoder_path(&ctx.model_dir, ctx.mode);
    if !path.exists() {
        return Err(Error::ModelNotLoaded);
    }
    Encoder::load(&path)
}

fn mogan_factory(ctx: &PredictorContext) -> Result<Box<dyn EffectPredictor>> {
    let model = MoganModel::load(&mogan_path(&ctx.model_dir, ctx.mode))?;
    Ok(Box::new(MoganPredictor::new(model, load_encoder(ctx)?)))
}

fn baseline_factory(ctx: &PredictorContext) -> Result<Box<dyn EffectPredictor>> {
    let model = BaselineModel::load(&baseline_path(&ctx.model_dir, ctx.mode))?;
    Ok(Box::new(BaselinePredictor::new(model, load_encoder(ctx)?)))
}

fn oracle_factory(_: &PredictorContext) -> Result<Box<dyn EffectPredictor>> {
    Ok(Box::new(OraclePredictor))
}

/// Predictor factories keyed by name.
#[derive(Clone, Default)]
pub struct Registry {
    factories: BTreeMap<String, PredictorFactory>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `mogan`, `baseline` and `oracle`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register("mogan", mogan_factory);
        r.register("baseline", baseline_factory);
        r.register("oracle", oracle_factory);
        r
    }

    pub fn register(&mut self, name: &str, factory: PredictorFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, ctx: &PredictorContext) -> Result<Box<dyn EffectPredictor>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::Unknown { kind: "predictor", name: name.to_string() })?;
        factory(ctx)
    }
}

/// Per-tower-size errors of `predictor` against recorded effects.
pub fn evaluate_records(predictor: &dyn EffectPredictor, records: &[InteractionRecord], catalog: &[ObjectSpec]) -> Result<Vec<SizeMetrics>> {
    let mut acc = MetricsAccumulator::default();
    for r in records {
        let (scene, candidate) = Scene::from_record(r, catalog)?;
        let pred = predictor.predict(&scene, &candidate)?;
        acc.add(r.tower_size(), &r.e1, &r.e2, f64::from(r.e3), &pred);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, GenConfig};
    use crate::geometry::catalog_standard;
    use crate::simulator::CENTER_SLOT;

    #[test]
    fn registry_names_and_unknown() {
        let reg = Registry::standard();
        assert_eq!(reg.names(), vec!["baseline", "mogan", "oracle"]);
        let ctx = PredictorContext { mode: Mode::Linear, model_dir: PathBuf::from("/nonexistent") };
        assert!(matches!(reg.create("gnn", &ctx), Err(Error::Unknown { .. })));
        assert_eq!(reg.create("oracle", &ctx).unwrap().name(), "oracle");
        assert!(reg.create("mogan", &ctx).is_err());
    }

    #[test]
    fn oracle_reproduces_recorded_effects() {
        let cat = catalog_standard();
        let records = generate(&cat, &GenConfig { target_records: 120, ..GenConfig::default() });
        for m in evaluate_records(&OraclePredictor, &records, &cat).unwrap() {
            assert_eq!((m.e1_mae, m.e2_mae, m.e3_error), (0.0, 0.0, 0.0), "size {}", m.tower_size);
        }
    }

    #[test]
    fn simulated_scene_matches_replay() {
        let cat = catalog_standard();
        let scene = Scene::simulated(vec![Action::new(cat[0], CENTER_SLOT, Orientation::Upright)]);
        assert_eq!(scene.members.len(), 1);
        let p = OraclePredictor.predict(&scene, &Action::new(cat[7], CENTER_SLOT, Orientation::Upright)).unwrap();
        assert_eq!(p.e1.len(), 1);
        // ring slides down the pole: its top is below the pole tip
        assert!(p.e1[0][0] < 0.0);
        assert_eq!(p.collapse, 0.0);
    }
}
