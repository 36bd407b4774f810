//! Tree search over placement sequences driven by an effect predictor, with
//! collapse pruning and simulator verification.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::effects::{compute_e1, compute_e2, DECIMETERS_PER_METER};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ObjectSpec, Orientation};
use crate::mogan::CandidatePrediction;
use crate::predictor::{Action, EffectPredictor, MemberGeometry, Scene};
use crate::simulator::{place, simulate_sequence, CompoundState, Mode, SLOT_X};

/// Lateral offsets smaller than this do not count toward enclosure, dm.
pub const ENCLOSURE_MIN_DM: f64 = 0.05;
pub const DEFAULT_CUTOFF: f64 = 0.5;
pub const DEFAULT_BUDGET: usize = 50_000;
/// Vertical gap under which believed members count as touching, meters.
const CONTACT_GAP: f64 = 0.005;
const METRIC_TOL: f64 = 1e-6;
/// Weight of a completed bridge against leg imbalance, dm.
const BRIDGE_BONUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Tallest,
    Shortest,
    /// Placed objects end up inside earlier ones.
    Occluded,
    /// Placed objects surround earlier ones.
    Occluding,
    /// Target height in decimeters.
    SpecificHeight(f64),
    /// Relative vertical distance between two object ids.
    PairConstraint { a: u32, b: u32, objective: Objective },
    /// A member resting on legs at both outer slots.
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub kind: TaskKind,
    pub mode: Mode,
}

impl Task {
    pub fn new(kind: TaskKind, mode: Mode) -> Result<Self> {
        match kind {
            TaskKind::SpecificHeight(t) if !(t > 0.0) => Err(Error::Config(format!("target height must be positive, got {t}"))),
            TaskKind::PairConstraint { a, b, .. } if a == b => Err(Error::Config("pair constraint needs two different objects".into())),
            _ => Ok(Task { kind, mode }),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            TaskKind::Tallest => "tallest".into(),
            TaskKind::Shortest => "shortest".into(),
            TaskKind::Occluded => "occluded".into(),
            TaskKind::Occluding => "occluding".into(),
            TaskKind::SpecificHeight(t) => format!("height:{t}"),
            TaskKind::PairConstraint { a, b, objective } => {
                let o = if objective == Objective::Minimize { "min" } else { "max" };
                format!("pair:{a}:{b}:{o}")
            }
            TaskKind::Bridge => "bridge".into(),
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    /// `tallest`, `shortest`, `occluded`, `occluding`, `bridge`,
    /// `height:<dm>` or `pair:<a>:<b>:<min|max>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Unknown { kind: "task", name: s.to_string() };
        let parts: Vec<&str> = s.split(':').collect();
        Ok(match parts.as_slice() {
            ["tallest"] => TaskKind::Tallest,
            ["shortest"] => TaskKind::Shortest,
            ["occluded"] => TaskKind::Occluded,
            ["occluding"] => TaskKind::Occluding,
            ["bridge"] => TaskKind::Bridge,
            ["height", t] => TaskKind::SpecificHeight(t.parse().map_err(|_| bad())?),
            ["pair", a, b, o] => TaskKind::PairConstraint {
                a: a.parse().map_err(|_| bad())?,
                b: b.parse().map_err(|_| bad())?,
                objective: match *o {
                    "min" => Objective::Minimize,
                    "max" => Objective::Maximize,
                    _ => return Err(bad()),
                },
            },
            _ => return Err(bad()),
        })
    }
}

/// A partial plan with the predictor's view of the compound it builds.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub actions: Vec<Action>,
    pub remaining: Vec<ObjectSpec>,
    pub scene: Scene,
    /// One prediction per action, in order.
    pub predictions: Vec<CandidatePrediction>,
    /// Predicted compound height, dm.
    pub height: f64,
    pub pruned: bool,
    pub score: f64,
}

impl PlanNode {
    pub fn root(inventory: &[ObjectSpec]) -> Self {
        let mut remaining = inventory.to_vec();
        remaining.sort_by_key(|s| s.id);
        PlanNode { actions: Vec::new(), remaining, scene: Scene::default(), predictions: Vec::new(), height: 0.0, pruned: false, score: 0.0 }
    }

    pub fn is_leaf(&self) -> bool {
        self.remaining.is_empty()
    }

    fn key(&self) -> Vec<(u32, usize, u8)> {
        self.actions.iter().map(action_key).collect()
    }
}

fn action_key(a: &Action) -> (u32, usize, u8) {
    (a.spec.id, a.slot, u8::from(a.orientation == Orientation::Inverted))
}

fn believed_box(spec: &ObjectSpec, slot: usize, bottom: f64, top: f64) -> Aabb {
    let x = SLOT_X[slot];
    Aabb {
        x_min: x - spec.outer_width / 2.0,
        x_max: x + spec.outer_width / 2.0,
        y_min: -spec.outer_depth / 2.0,
        y_max: spec.outer_depth / 2.0,
        z_min: bottom,
        z_max: top,
    }
}

fn x_overlap(a: &Aabb, b: &Aabb) -> bool {
    a.x_min < b.x_max && b.x_min < a.x_max
}

/// The value `compute_e1` would report for one face pair, given heights.
fn signed_face(new_face: f64, queried_face: f64, queried_center: f64, half: f64) -> f64 {
    let v = (queried_face - new_face).abs();
    if (new_face - queried_center).abs() < half - 1e-9 {
        -v
    } else {
        v
    }
}

/// Where the candidate is believed to settle. Each predicted face difference
/// allows two heights; the top height that best explains the predictions
/// against every member wins, which also resolves objects landing below an
/// elevated member.
fn believe(scene: &Scene, candidate: &Action, pred: &CandidatePrediction) -> MemberGeometry {
    let h = candidate.spec.height;
    let members = &scene.members[..pred.e1.len().min(scene.members.len())];
    let mut options = vec![h];
    for (m, e) in members.iter().zip(&pred.e1) {
        let (t, b) = (e[0].abs() / DECIMETERS_PER_METER, e[1].abs() / DECIMETERS_PER_METER);
        options.extend([m.aabb.z_max + t, m.aabb.z_max - t, m.aabb.z_min + b + h, m.aabb.z_min - b + h]);
    }
    let misfit = |top: f64| -> f64 {
        members
            .iter()
            .zip(&pred.e1)
            .map(|(m, e)| {
                let (c, half) = (0.5 * (m.aabb.z_min + m.aabb.z_max), 0.5 * (m.aabb.z_max - m.aabb.z_min));
                let top_dm = signed_face(top, m.aabb.z_max, c, half) * DECIMETERS_PER_METER;
                let bottom_dm = signed_face(top - h, m.aabb.z_min, c, half) * DECIMETERS_PER_METER;
                (top_dm - e[0]).abs() + (bottom_dm - e[1]).abs()
            })
            .sum()
    };
    let mut top = h;
    let mut best = f64::INFINITY;
    for t in options.into_iter().map(|t| t.max(h)) {
        let err = misfit(t);
        if err < best - 1e-12 {
            best = err;
            top = t;
        }
    }
    let bottom = (top - candidate.spec.height).max(0.0);
    let aabb = believed_box(&candidate.spec, candidate.slot, bottom, top);
    let supports = scene
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| x_overlap(&m.aabb, &aabb) && (m.aabb.z_max - bottom).abs() < CONTACT_GAP)
        .map(|(i, _)| i)
        .collect();
    MemberGeometry { aabb, supports }
}

/// Leg heights at the two outer slots and whether some member rests on both.
fn bridge_state(slots: &[usize], tops: &[f64], supports: &[Vec<usize>]) -> (f64, f64, bool) {
    let leg = |s: usize| slots.iter().zip(tops).filter(|(&sl, _)| sl == s).map(|(_, &t)| t).fold(0.0, f64::max);
    let bridged = supports.iter().any(|sup| sup.iter().any(|&i| slots[i] == 0) && sup.iter().any(|&i| slots[i] == SLOT_X.len() - 1));
    (leg(0), leg(SLOT_X.len() - 1), bridged)
}

fn bridge_score(slots: &[usize], tops: &[f64], supports: &[Vec<usize>]) -> f64 {
    let (l, r, bridged) = bridge_state(slots, tops, supports);
    let imbalance = (l - r).abs() * DECIMETERS_PER_METER;
    if bridged {
        BRIDGE_BONUS - imbalance
    } else {
        -imbalance
    }
}

fn enclosure_counts(e2_rows: impl Iterator<Item = [f64; 4]>) -> (usize, usize) {
    let mut inside = 0;
    let mut around = 0;
    for r in e2_rows {
        if r.iter().all(|&v| v <= -ENCLOSURE_MIN_DM) {
            inside += 1;
        }
        if r.iter().all(|&v| v >= ENCLOSURE_MIN_DM) {
            around += 1;
        }
    }
    (inside, around)
}

/// Predicted |e1 top| between the later and the earlier of the pair.
fn pair_distance(ids: &[u32], e1: &[Vec<[f64; 2]>], a: u32, b: u32) -> Option<f64> {
    let ia = ids.iter().position(|&i| i == a)?;
    let ib = ids.iter().position(|&i| i == b)?;
    let (early, late) = if ia < ib { (ia, ib) } else { (ib, ia) };
    e1.get(late)?.get(early).map(|r| r[0].abs())
}

/// Task score from predicted effects; larger is better.
pub fn score(node: &PlanNode, task: &Task) -> f64 {
    match task.kind {
        TaskKind::Tallest => node.height,
        TaskKind::Shortest => -node.height,
        TaskKind::SpecificHeight(t) => -(node.height - t).abs(),
        TaskKind::Occluded | TaskKind::Occluding => {
            let (inside, around) = enclosure_counts(node.predictions.iter().flat_map(|p| p.e2.iter().copied()));
            if task.kind == TaskKind::Occluded {
                inside as f64
            } else {
                around as f64
            }
        }
        TaskKind::PairConstraint { a, b, objective } => {
            let ids: Vec<u32> = node.actions.iter().map(|x| x.spec.id).collect();
            let e1: Vec<Vec<[f64; 2]>> = node.predictions.iter().map(|p| p.e1.clone()).collect();
            match (pair_distance(&ids, &e1, a, b), objective) {
                (Some(d), Objective::Minimize) => -d,
                (Some(d), Objective::Maximize) => d,
                (None, _) => 0.0,
            }
        }
        TaskKind::Bridge => {
            let slots: Vec<usize> = node.actions.iter().map(|x| x.slot).collect();
            let tops: Vec<f64> = node.scene.members.iter().map(|m| m.aabb.z_max).collect();
            let sup: Vec<Vec<usize>> = node.scene.members.iter().map(|m| m.supports.clone()).collect();
            bridge_score(&slots, &tops, &sup)
        }
    }
}

/// A finished leaf must reach the goal shape when the task has one.
fn goal_reached(node: &PlanNode, task: &Task) -> bool {
    match task.kind {
        TaskKind::Bridge => {
            let slots: Vec<usize> = node.actions.iter().map(|x| x.slot).collect();
            let sup: Vec<Vec<usize>> = node.scene.members.iter().map(|m| m.supports.clone()).collect();
            bridge_state(&slots, &vec![0.0; slots.len()], &sup).2
        }
        _ => true,
    }
}

/// One child per remaining object and action, in lexicographic action
/// order; children whose collapse probability reaches `cutoff` are pruned.
pub fn expand(node: &PlanNode, predictor: &dyn EffectPredictor, task: &Task, cutoff: f64) -> Result<Vec<PlanNode>> {
    if node.pruned {
        return Ok(Vec::new());
    }
    let mut children = Vec::new();
    for (i, spec) in node.remaining.iter().enumerate() {
        if node.remaining[..i].iter().any(|s| s.id == spec.id) {
            continue;
        }
        for (slot, orientation) in task.mode.actions() {
            let action = Action::new(*spec, slot, orientation);
            let pred = predictor.predict(&node.scene, &action)?;
            let geometry = believe(&node.scene, &action, &pred);
            let mut child = node.clone();
            child.remaining.remove(i);
            child.actions.push(action);
            child.scene.actions.push(action);
            child.height = child.height.max(geometry.aabb.z_max * DECIMETERS_PER_METER);
            child.scene.members.push(geometry);
            child.pruned = pred.collapse >= cutoff;
            child.predictions.push(pred);
            child.score = score(&child, task);
            children.push(child);
        }
    }
    Ok(children)
}

/// Nodes in the full action tree below an inventory of `n` objects.
pub fn tree_size(n: usize, actions_per_object: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for d in 0..n {
        level = level.saturating_mul((n - d) * actions_per_object);
        total = total.saturating_add(level);
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStep {
    pub id: u32,
    pub slot: usize,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verification {
    pub success: bool,
    pub collapsed: bool,
    /// Ground-truth task metric of the executed plan.
    pub metric: f64,
    /// Best metric over every ordering, from the simulator.
    pub optimum: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plan {
    pub task: Task,
    pub predictor: String,
    pub steps: Vec<PlanStep>,
    pub predicted_score: f64,
    /// Predicted final height, dm.
    pub predicted_height: f64,
    pub expanded: usize,
    pub verified: Option<Verification>,
    #[serde(skip)]
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: usize,
    pub cutoff: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: DEFAULT_BUDGET, cutoff: DEFAULT_CUTOFF }
    }
}

/// Higher score wins; ties go to the lexicographically smaller action list.
fn better(a: &PlanNode, b: &PlanNode) -> bool {
    match a.score.total_cmp(&b.score) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.key() < b.key(),
    }
}

struct Frontier(PlanNode);

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.score.total_cmp(&other.0.score).then_with(|| other.0.key().cmp(&self.0.key()))
    }
}

/// Depth-first over the whole tree when it fits the budget, best-first on
/// partial scores otherwise.
pub fn search(inventory: &[ObjectSpec], task: &Task, predictor: &dyn EffectPredictor, config: &SearchConfig) -> Result<Plan> {
    if inventory.is_empty() {
        return Err(Error::NoFeasiblePlan);
    }
    let root = PlanNode::root(inventory);
    let mut best: Option<PlanNode> = None;
    let mut created = 0usize;
    let offer = |leaf: PlanNode, best: &mut Option<PlanNode>| {
        if !leaf.pruned && goal_reached(&leaf, task) && best.as_ref().is_none_or(|b| better(&leaf, b)) {
            *best = Some(leaf);
        }
    };
    if tree_size(inventory.len(), task.mode.actions().len()) <= config.budget {
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            let mut children = expand(&node, predictor, task, config.cutoff)?;
            created += children.len();
            children.reverse();
            for c in children {
                if c.pruned {
                    continue;
                }
                if c.is_leaf() {
                    offer(c, &mut best);
                } else {
                    stack.push(c);
                }
            }
        }
    } else {
        let mut heap = BinaryHeap::new();
        heap.push(Frontier(root));
        while let Some(Frontier(node)) = heap.pop() {
            if created >= config.budget {
                break;
            }
            let children = expand(&node, predictor, task, config.cutoff)?;
            created += children.len();
            for c in children {
                if c.pruned {
                    continue;
                }
                if c.is_leaf() {
                    offer(c, &mut best);
                } else {
                    heap.push(Frontier(c));
                }
            }
        }
    }
    let best = best.ok_or(Error::NoFeasiblePlan)?;
    Ok(Plan {
        task: *task,
        predictor: predictor.name().to_string(),
        steps: best.actions.iter().map(|a| PlanStep { id: a.spec.id, slot: a.slot, orientation: a.orientation }).collect(),
        predicted_score: best.score,
        predicted_height: best.height,
        expanded: created,
        verified: None,
        actions: best.actions,
    })
}

/// Ground-truth task metric of a settled compound built by `actions`;
/// larger is better, matching `score`.
pub fn true_metric(compound: &CompoundState, actions: &[Action], task: &Task) -> f64 {
    let height = compound.height() * DECIMETERS_PER_METER;
    let p = &compound.placements;
    match task.kind {
        TaskKind::Tallest => height,
        TaskKind::Shortest => -height,
        TaskKind::SpecificHeight(t) => -(height - t).abs(),
        TaskKind::Occluded | TaskKind::Occluding => {
            let rows = (1..p.len()).flat_map(|j| (0..j).map(move |i| compute_e2(&p[j], &p[i])));
            let (inside, around) = enclosure_counts(rows);
            if task.kind == TaskKind::Occluded {
                inside as f64
            } else {
                around as f64
            }
        }
        TaskKind::PairConstraint { a, b, objective } => {
            let ids: Vec<u32> = actions.iter().map(|x| x.spec.id).collect();
            let e1: Vec<Vec<[f64; 2]>> = (0..p.len()).map(|j| (0..j).map(|i| compute_e1(&p[j], &p[i])).collect()).collect();
            match (pair_distance(&ids, &e1, a, b), objective) {
                (Some(d), Objective::Minimize) => -d,
                (Some(d), Objective::Maximize) => d,
                (None, _) => 0.0,
            }
        }
        TaskKind::Bridge => {
            let slots: Vec<usize> = p.iter().map(|x| x.slot).collect();
            let tops: Vec<f64> = p.iter().map(|x| x.aabb().z_max).collect();
            let sup: Vec<Vec<usize>> = p.iter().map(|x| x.supports.clone()).collect();
            bridge_score(&slots, &tops, &sup)
        }
    }
}

fn bridge_built(compound: &CompoundState) -> bool {
    let p = &compound.placements;
    let slots: Vec<usize> = p.iter().map(|x| x.slot).collect();
    let sup: Vec<Vec<usize>> = p.iter().map(|x| x.supports.clone()).collect();
    bridge_state(&slots, &vec![0.0; p.len()], &sup).2
}

/// Best true metric over every non-collapsing full sequence, by
/// enumeration through the simulator. `None` when nothing stands.
pub fn brute_force_optimum(inventory: &[ObjectSpec], task: &Task) -> Option<f64> {
    fn walk(compound: &CompoundState, actions: &mut Vec<Action>, remaining: &mut Vec<ObjectSpec>, task: &Task, best: &mut Option<f64>) {
        if remaining.is_empty() {
            if task.kind != TaskKind::Bridge || bridge_built(compound) {
                let m = true_metric(compound, actions, task);
                *best = Some(best.map_or(m, |b: f64| b.max(m)));
            }
            return;
        }
        for i in 0..remaining.len() {
            let spec = remaining.remove(i);
            for (slot, o) in task.mode.actions() {
                let (next, _) = place(compound, &spec, slot, o).expect("walk never extends a collapsed compound");
                if !next.collapsed {
                    actions.push(Action::new(spec, slot, o));
                    walk(&next, actions, remaining, task, best);
                    actions.pop();
                }
            }
            remaining.insert(i, spec);
        }
    }
    let mut best = None;
    let mut remaining = inventory.to_vec();
    walk(&CompoundState::new(), &mut Vec::new(), &mut remaining, task, &mut best);
    best
}

/// Memoized brute-force optima keyed by task and inventory ids.
#[derive(Debug, Default)]
pub struct OptimumCache {
    map: Mutex<HashMap<(String, String, Vec<u32>), Option<f64>>>,
}

impl OptimumCache {
    pub fn get(&self, inventory: &[ObjectSpec], task: &Task) -> Option<f64> {
        let mut ids: Vec<u32> = inventory.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        let key = (task.name(), task.mode.name().to_string(), ids);
        if let Some(v) = self.map.lock().expect("cache poisoned").get(&key) {
            return *v;
        }
        let v = brute_force_optimum(inventory, task);
        self.map.lock().expect("cache poisoned").insert(key, v);
        v
    }
}

/// Runs the plan in the simulator and compares its true metric with the
/// brute-force optimum over the same inventory.
pub fn execute_and_verify(plan: &Plan, inventory: &[ObjectSpec], cache: &OptimumCache) -> Verification {
    let tuples: Vec<_> = plan.actions.iter().map(Action::tuple).collect();
    let (compound, _) = simulate_sequence(&tuples);
    let metric = true_metric(&compound, &plan.actions, &plan.task);
    if compound.collapsed {
        return Verification { success: false, collapsed: true, metric, optimum: None, failure: Some("CollapseDuringExecution".into()) };
    }
    if plan.task.kind == TaskKind::Bridge {
        let ok = bridge_built(&compound);
        return Verification { success: ok, collapsed: false, metric, optimum: None, failure: (!ok).then(|| "NoBridge".into()) };
    }
    let optimum = cache.get(inventory, &plan.task);
    let success = optimum.is_some_and(|o| metric >= o - METRIC_TOL);
    Verification { success, collapsed: false, metric, optimum, failure: (!success).then(|| "Suboptimal".into()) }
}

/// Random inventories of `size` distinct catalog objects.
pub fn sample_inventories(catalog: &[ObjectSpec], size: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<ObjectSpec>> {
    (0..count)
        .map(|_| {
            let mut inv: Vec<ObjectSpec> = catalog.choose_multiple(rng, size.min(catalog.len())).copied().collect();
            inv.sort_by_key(|s| s.id);
            inv
        })
        .collect()
}

/// Like `sample_inventories`, keeping only inventories for which some
/// ordering stands in the simulator.
pub fn sample_feasible_inventories(
    catalog: &[ObjectSpec],
    size: usize,
    count: usize,
    task: &Task,
    rng: &mut ChaCha8Rng,
    cache: &OptimumCache,
) -> Vec<Vec<ObjectSpec>> {
    let mut out = Vec::new();
    for _ in 0..count * 50 {
        if out.len() == count {
            break;
        }
        let inv = sample_inventories(catalog, size, 1, rng).remove(0);
        let feasible = match task.kind {
            TaskKind::Bridge => true,
            _ => cache.get(&inv, task).is_some(),
        };
        if feasible {
            out.push(inv);
        }
    }
    out
}

/// One verification row: task, size, inventory and outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub task: String,
    pub predictor: String,
    pub size: usize,
    pub sample: usize,
    pub inventory: Vec<u32>,
    pub plan: Option<Plan>,
    pub success: bool,
    pub failure: Option<String>,
}

/// Plans and verifies every inventory.
pub fn run_trials(
    inventories: &[Vec<ObjectSpec>],
    task: &Task,
    predictor: &dyn EffectPredictor,
    config: &SearchConfig,
    cache: &OptimumCache,
) -> Result<Vec<TrialResult>> {
    let mut out = Vec::new();
    for (k, inv) in inventories.iter().enumerate() {
        let ids = inv.iter().map(|s| s.id).collect();
        let row = match search(inv, task, predictor, config) {
            Ok(mut plan) => {
                let v = execute_and_verify(&plan, inv, cache);
                let (success, failure) = (v.success, v.failure.clone());
                plan.verified = Some(v);
                TrialResult { task: task.name(), predictor: predictor.name().into(), size: inv.len(), sample: k, inventory: ids, plan: Some(plan), success, failure }
            }
            Err(Error::NoFeasiblePlan) => TrialResult {
                task: task.name(),
                predictor: predictor.name().into(),
                size: inv.len(),
                sample: k,
                inventory: ids,
                plan: None,
                success: false,
                failure: Some("NoFeasiblePlan".into()),
            },
            Err(e) => return Err(e),
        };
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog_nonlinear, catalog_standard};
    use crate::predictor::OraclePredictor;

    fn linear(kind: TaskKind) -> Task {
        Task::new(kind, Mode::Linear).unwrap()
    }

    #[test]
    fn task_parsing_and_validation() {
        assert_eq!("tallest".parse::<TaskKind>().unwrap(), TaskKind::Tallest);
        assert_eq!("height:1.5".parse::<TaskKind>().unwrap(), TaskKind::SpecificHeight(1.5));
        assert_eq!(
            "pair:12:13:max".parse::<TaskKind>().unwrap(),
            TaskKind::PairConstraint { a: 12, b: 13, objective: Objective::Maximize }
        );
        assert!("pair:1:2:most".parse::<TaskKind>().is_err());
        assert!(Task::new(TaskKind::SpecificHeight(0.0), Mode::Linear).is_err());
        assert!(Task::new(TaskKind::PairConstraint { a: 3, b: 3, objective: Objective::Minimize }, Mode::Linear).is_err());
    }

    #[test]
    fn expansion_counts() {
        let cat = catalog_standard();
        let root = PlanNode::root(&[cat[0], cat[7], cat[8]]);
        assert_eq!(root.height, 0.0);
        let kids = expand(&root, &OraclePredictor, &linear(TaskKind::Tallest), DEFAULT_CUTOFF).unwrap();
        assert_eq!(kids.len(), 3);
        let nl = Task::new(TaskKind::Tallest, Mode::Nonlinear).unwrap();
        let kids = expand(&PlanNode::root(&[catalog_nonlinear()[0]]), &OraclePredictor, &nl, DEFAULT_CUTOFF).unwrap();
        assert_eq!(kids.len(), 6);
        assert_eq!(tree_size(3, 1), 3 + 6 + 6);
    }

    #[test]
    fn pole_and_rings() {
        let cat = catalog_standard();
        let inv = [cat[0], cat[7], cat[8]];
        let cache = OptimumCache::default();
        let short = search(&inv, &linear(TaskKind::Shortest), &OraclePredictor, &SearchConfig::default()).unwrap();
        assert_eq!(short.steps[0].id, 0);
        assert!((short.predicted_height - 1.7).abs() < 1e-9, "{}", short.predicted_height);
        assert!(execute_and_verify(&short, &inv, &cache).success);
        let tall = search(&inv, &linear(TaskKind::Tallest), &OraclePredictor, &SearchConfig::default()).unwrap();
        assert_eq!(tall.steps.last().unwrap().id, 0);
        let v = execute_and_verify(&tall, &inv, &cache);
        assert!(v.success, "{v:?}");
        assert!((tall.predicted_height - v.metric).abs() < 1e-9);
    }

    #[test]
    fn single_cube_specific_height() {
        let cube = catalog_standard()[6];
        let plan = search(&[cube], &linear(TaskKind::SpecificHeight(1.0)), &OraclePredictor, &SearchConfig::default()).unwrap();
        assert_eq!(plan.steps.len(), 1);
        assert!(plan.predicted_score.abs() < 1e-9);
    }

    #[test]
    fn all_collapsing_gives_no_plan() {
        // two balls: the second always rolls off the first
        let cat = catalog_standard();
        let err = search(&[cat[1], cat[2]], &linear(TaskKind::Tallest), &OraclePredictor, &SearchConfig::default());
        assert!(matches!(err, Err(Error::NoFeasiblePlan)));
    }
}
