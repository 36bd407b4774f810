//! Deterministic settle model: drops an object onto a compound and decides
//! whether it stacks, slides over a pole, drops into a cavity, rests on a rim
//! or topples.
//!
//! Objects fall straight down from their release point. The rest height is the
//! highest contact between any primitive of the falling object and any
//! primitive already in the scene; stability is a center-of-mass test against
//! the convex hull of the sampled contact patch.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::effects;
use crate::error::{Error, Result};
use crate::geometry::{
    footprint_contains_disk, Aabb, footprint_distance, footprints_overlap, posed_solids, ray_hits, Footprint, ObjectKind,
    ObjectSpec, Orientation, Pose, Primitive, Ray, Shape,
};
use crate::renderer::{normalize, render_object, NormalizedImage};

/// Release x coordinates of the three slots.
pub const SLOT_X: [f64; 3] = [-0.08, 0.0, 0.08];
/// Slot used by linear (single column) compounds.
pub const CENTER_SLOT: usize = 1;
pub const RELEASE_OFFSET: f64 = 0.15;
pub const COLLAPSE_DISTANCE: f64 = 0.20;
pub const COLLAPSE_ANGLE_DEG: f64 = 60.0;
pub const TOPPLE_DISTANCE: f64 = 0.30;
/// Erosion of the support patch before the center-of-mass test.
pub const SUPPORT_EROSION: f64 = 0.01;

const CONTACT_TOL: f64 = 1e-9;
const HULL_DIRECTIONS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Nonlinear,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::Nonlinear => "nonlinear",
        }
    }

    /// All (slot, orientation) actions available for one object.
    pub fn actions(self) -> Vec<(usize, Orientation)> {
        match self {
            Mode::Linear => vec![(CENTER_SLOT, Orientation::Upright)],
            Mode::Nonlinear => (0..3).flat_map(|s| Orientation::ALL.map(|o| (s, o))).collect(),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Mode::Linear),
            "nonlinear" => Ok(Mode::Nonlinear),
            other => Err(Error::Unknown { kind: "mode", name: other.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SettleKind {
    StackedOnTop,
    InsertedInCavity,
    PassedOverPole,
    RestsOnRim,
    ToppledOff,
    CompoundCollapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleOutcome {
    pub kind: SettleKind,
    pub final_pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub spec: ObjectSpec,
    pub pose: Pose,
    /// Release order, 1-based.
    pub step: usize,
    pub slot: usize,
    pub release: [f64; 2],
    pub release_z: f64,
    /// Orientation change since release, degrees.
    pub tilt_deg: f64,
    /// Indices of the placements this one rests on; empty means the table.
    pub supports: Vec<usize>,
    /// Sampled support contact points (x, y).
    pub contact: Vec<[f64; 2]>,
    /// Sphere resting on a flat face that fully covers it.
    pub anchored: bool,
    pub outcome: SettleKind,
}

impl Placement {
    pub fn aabb(&self) -> Aabb {
        crate::geometry::bounding_box(&self.spec, &self.pose)
    }

    pub fn solids(&self) -> Vec<Primitive> {
        posed_solids(&self.spec, &self.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompoundState {
    pub placements: Vec<Placement>,
    pub base_pose: Option<Pose>,
    pub collapsed: bool,
    /// Table-frame offset of the slot row.
    pub origin: [f64; 2],
}

impl CompoundState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_origin(x: f64, y: f64) -> Self {
        CompoundState { origin: [x, y], ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn slot_point(&self, slot: usize) -> [f64; 2] {
        [self.origin[0] + SLOT_X[slot], self.origin[1]]
    }

    /// Highest point of the settled compound (0 for an empty table).
    pub fn height(&self) -> f64 {
        self.placements.iter().map(|p| p.pose.z + p.spec.height).fold(0.0, f64::max)
    }
}

/// Height of the highest upward-facing surface in a slot's column.
pub fn support_top(compound: &CompoundState, slot: usize) -> f64 {
    let [x, y] = compound.slot_point(slot);
    let solids: Vec<Primitive> = compound.placements.iter().flat_map(Placement::solids).collect();
    let ray = Ray { origin: [x, y, 10.0], direction: [0.0, 0.0, -1.0] };
    ray_hits(&solids, &ray).first().map_or(0.0, |t| (10.0 - t).max(0.0))
}

pub fn check_collapse(compound: &CompoundState) -> bool {
    compound.placements.iter().any(|p| {
        let moved = (p.pose.x - p.release[0]).hypot(p.pose.y - p.release[1]);
        moved >= COLLAPSE_DISTANCE || p.tilt_deg >= COLLAPSE_ANGLE_DEG
    })
}

/// Origin height at which falling primitive `f` (already at its final x-y,
/// local z) first touches support `s`, if their footprints meet.
fn contact_height(f: &Primitive, s: &Primitive) -> Option<f64> {
    let dx = f.center[0] - s.center[0];
    let dy = f.center[1] - s.center[1];
    match (f.shape, s.shape) {
        (Shape::Prism(ff), Shape::Prism(sf)) => {
            footprints_overlap(&ff, f.center, &sf, s.center, CONTACT_TOL).then_some(s.z1 - f.z0)
        }
        (Shape::Sphere { r }, Shape::Prism(sf)) => {
            let rho = footprint_distance(&sf, dx, dy);
            (rho < r - 1e-12).then(|| s.z1 - (f.zc() - (r * r - rho * rho).sqrt()))
        }
        (Shape::Prism(ff), Shape::Sphere { r }) => {
            let rho = footprint_distance(&ff, -dx, -dy);
            (rho < r - 1e-12).then(|| s.zc() + (r * r - rho * rho).sqrt() - f.z0)
        }
        (Shape::Sphere { r: rf }, Shape::Sphere { r: rs }) => {
            let d = dx.hypot(dy);
            let reach = rf + rs;
            (d < reach - 1e-12).then(|| s.zc() + (reach * reach - d * d).sqrt() - f.zc())
        }
    }
}

fn grid_points(a: &Footprint, ca: [f64; 2], b: Option<(&Footprint, [f64; 2])>) -> Vec<[f64; 2]> {
    let bounds = |fp: &Footprint, c: [f64; 2]| match *fp {
        Footprint::Radial { r_out, .. } => [c[0] - r_out, c[0] + r_out, c[1] - r_out, c[1] + r_out],
        Footprint::Square { hx, hy } => [c[0] - hx, c[0] + hx, c[1] - hy, c[1] + hy],
    };
    let mut bb = bounds(a, ca);
    if let Some((fb, cb)) = b {
        let o = bounds(fb, cb);
        bb = [bb[0].max(o[0]), bb[1].min(o[1]), bb[2].max(o[2]), bb[3].min(o[3])];
    }
    let extent = (bb[1] - bb[0]).min(bb[3] - bb[2]);
    if extent <= 0.0 {
        return Vec::new();
    }
    let step = 0.002f64.min(extent / 8.0);
    let nx = ((bb[1] - bb[0]) / step).ceil() as usize;
    let ny = ((bb[3] - bb[2]) / step).ceil() as usize;
    let mut pts = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let p = [bb[0] + (i as f64 + 0.5) * step, bb[2] + (j as f64 + 0.5) * step];
            let in_a = footprint_distance(a, p[0] - ca[0], p[1] - ca[1]) <= 0.0;
            let in_b = b.is_none_or(|(fb, cb)| footprint_distance(fb, p[0] - cb[0], p[1] - cb[1]) <= 0.0);
            if in_a && in_b {
                pts.push(p);
            }
        }
    }
    pts
}

fn circle_points(center: [f64; 2], radius: f64, keep: impl Fn([f64; 2]) -> bool) -> Vec<[f64; 2]> {
    (0..64)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / 64.0;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .filter(|&p| keep(p))
        .collect()
}

struct Patch {
    points: Vec<[f64; 2]>,
    anchored: bool,
}

/// Contact sample points between falling primitive `f` and support `s`.
fn contact_patch(f: &Primitive, s: &Primitive) -> Patch {
    let none = Patch { points: Vec::new(), anchored: false };
    match (f.shape, s.shape) {
        (Shape::Prism(ff), Shape::Prism(sf)) => Patch { points: grid_points(&ff, f.center, Some((&sf, s.center))), anchored: false },
        (Shape::Sphere { r }, Shape::Prism(sf)) => {
            let rho = footprint_distance(&sf, f.center[0] - s.center[0], f.center[1] - s.center[1]);
            if rho <= 1e-12 {
                Patch { points: vec![f.center], anchored: footprint_contains_disk(&sf, s.center, f.center, r) }
            } else {
                let pts = circle_points(f.center, rho, |p| footprint_distance(&sf, p[0] - s.center[0], p[1] - s.center[1]) <= 1e-6);
                Patch { points: pts, anchored: false }
            }
        }
        (Shape::Prism(ff), Shape::Sphere { .. }) => {
            let rho = footprint_distance(&ff, s.center[0] - f.center[0], s.center[1] - f.center[1]);
            if rho <= 1e-12 {
                Patch { points: vec![s.center], anchored: false }
            } else {
                let pts = circle_points(s.center, rho, |p| footprint_distance(&ff, p[0] - f.center[0], p[1] - f.center[1]) <= 1e-6);
                Patch { points: pts, anchored: false }
            }
        }
        (Shape::Sphere { r: rf }, Shape::Sphere { r: rs }) => {
            let w = rs / (rf + rs);
            let p = [s.center[0] + (f.center[0] - s.center[0]) * w, s.center[1] + (f.center[1] - s.center[1]) * w];
            Patch { points: vec![p], ..none }
        }
    }
}

/// Center-of-mass test: `com` must lie inside the contact hull shrunk by `erosion`.
pub fn com_supported(points: &[[f64; 2]], com: [f64; 2], erosion: f64) -> bool {
    if points.is_empty() {
        return false;
    }
    (0..HULL_DIRECTIONS).all(|i| {
        let a = 2.0 * PI * i as f64 / HULL_DIRECTIONS as f64;
        let (s, c) = a.sin_cos();
        let reach = points
            .iter()
            .map(|p| (p[0] - com[0]) * c + (p[1] - com[1]) * s)
            .fold(f64::NEG_INFINITY, f64::max);
        reach >= erosion - 1e-12
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic fall direction for a toppled object.
fn topple_direction(step: usize, id: u32, slot: usize) -> [f64; 2] {
    let h = splitmix((step as u64) << 40 ^ (id as u64) << 8 ^ slot as u64);
    let a = 2.0 * PI * (h >> 11) as f64 / (1u64 << 53) as f64;
    [a.cos(), a.sin()]
}

fn knock_over(p: &mut Placement, dir: [f64; 2]) {
    p.pose.x = p.release[0] + TOPPLE_DISTANCE * dir[0];
    p.pose.y = p.release[1] + TOPPLE_DISTANCE * dir[1];
    p.pose.z = 0.0;
    p.tilt_deg = 90.0;
    p.supports.clear();
    p.contact.clear();
}

/// All placements resting (transitively) on `base`, including `base`.
fn load_set(placements: &[Placement], base: usize) -> Vec<usize> {
    let mut set = vec![base];
    let mut changed = true;
    while changed {
        changed = false;
        for (i, p) in placements.iter().enumerate() {
            if !set.contains(&i) && p.supports.iter().any(|s| set.contains(s)) {
                set.push(i);
                changed = true;
            }
        }
    }
    set.sort_unstable();
    set
}

fn support_closure(placements: &[Placement], top: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut stack = placements[top].supports.clone();
    while let Some(j) = stack.pop() {
        if !out.contains(&j) {
            out.push(j);
            stack.extend(placements[j].supports.iter().copied());
        }
    }
    out.sort_unstable();
    out
}

fn classify(compound: &CompoundState, spec: &ObjectSpec, center: [f64; 2], rest_z: f64, rim_contact: bool) -> SettleKind {
    for p in &compound.placements {
        let d = (center[0] - p.pose.x).hypot(center[1] - p.pose.y);
        if p.spec.kind == ObjectKind::Pole
            && spec.has_hole()
            && p.spec.hole_radius + d < spec.hole_radius
            && p.pose.z + p.spec.height > rest_z + 1e-9
        {
            return SettleKind::PassedOverPole;
        }
    }
    for p in &compound.placements {
        let d = (center[0] - p.pose.x).hypot(center[1] - p.pose.y);
        if p.spec.kind == ObjectKind::Cup
            && p.pose.orientation == Orientation::Upright
            && spec.footprint_radius() + d <= p.spec.cavity_radius + 1e-12
            && rest_z < p.pose.z + p.spec.height - 1e-9
        {
            return SettleKind::InsertedInCavity;
        }
    }
    if rim_contact {
        SettleKind::RestsOnRim
    } else {
        SettleKind::StackedOnTop
    }
}

/// Releases `spec` over `slot` and settles it.
pub fn place(
    compound: &CompoundState,
    spec: &ObjectSpec,
    slot: usize,
    orientation: Orientation,
) -> Result<(CompoundState, SettleOutcome)> {
    if compound.collapsed {
        return Err(Error::PlacementOnCollapsed);
    }
    let center = compound.slot_point(slot);
    let release_z = support_top(compound, slot) + RELEASE_OFFSET;
    let local: Vec<Primitive> = posed_solids(spec, &Pose::new(center[0], center[1], 0.0, orientation));

    let mut rest = 0.0f64;
    let mut candidates: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (j, p) in compound.placements.iter().enumerate() {
        for (si, s) in p.solids().iter().enumerate() {
            for (fi, f) in local.iter().enumerate() {
                if let Some(z) = contact_height(f, s) {
                    candidates.push((j, si, fi, z));
                    rest = rest.max(z);
                }
            }
        }
    }
    let falling: Vec<Primitive> = local.iter().map(|f| Primitive { z0: f.z0 + rest, z1: f.z1 + rest, ..*f }).collect();

    let mut points = Vec::new();
    let mut anchored = false;
    let mut supports = Vec::new();
    let mut rim_contact = false;
    if rest <= CONTACT_TOL {
        rest = 0.0;
        for f in falling.iter().filter(|f| f.z0.abs() <= CONTACT_TOL) {
            match f.shape {
                Shape::Prism(fp) => points.extend(grid_points(&fp, f.center, None)),
                Shape::Sphere { .. } => {
                    points.push(f.center);
                    anchored = true;
                }
            }
        }
    }
    for &(j, si, fi, z) in &candidates {
        if z < rest - CONTACT_TOL {
            continue;
        }
        let support = &compound.placements[j];
        let s = support.solids()[si];
        let patch = contact_patch(&falling[fi], &s);
        points.extend(patch.points);
        anchored |= patch.anchored;
        if !supports.contains(&j) {
            supports.push(j);
        }
        if support.spec.kind == ObjectKind::Cup && support.pose.orientation == Orientation::Upright && si == 1 {
            rim_contact = true;
        }
    }
    supports.sort_unstable();

    let step = compound.len() + 1;
    let mut placement = Placement {
        spec: *spec,
        pose: Pose::new(center[0], center[1], rest, orientation),
        step,
        slot,
        release: center,
        release_z,
        tilt_deg: 0.0,
        supports,
        contact: points,
        anchored,
        outcome: SettleKind::StackedOnTop,
    };
    let mut next = compound.clone();
    if next.base_pose.is_none() {
        next.base_pose = Some(placement.pose);
    }

    let stable = placement.anchored || com_supported(&placement.contact, center, SUPPORT_EROSION);
    let dir = topple_direction(step, spec.id, slot);
    if !stable {
        placement.outcome = SettleKind::ToppledOff;
        knock_over(&mut placement, dir);
        let outcome = SettleOutcome { kind: SettleKind::ToppledOff, final_pose: placement.pose };
        next.placements.push(placement);
        next.collapsed = true;
        return Ok((next, outcome));
    }

    placement.outcome = classify(compound, spec, center, rest, rim_contact);
    next.placements.push(placement);
    let top = next.len() - 1;

    // a stable placement can still overload something underneath
    for j in support_closure(&next.placements, top) {
        let base = &next.placements[j];
        if base.anchored {
            continue;
        }
        let load = load_set(&next.placements, j);
        let (mut m, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for &i in &load {
            let p = &next.placements[i];
            let v = p.spec.volume();
            m += v;
            cx += v * p.pose.x;
            cy += v * p.pose.y;
        }
        if !com_supported(&base.contact, [cx / m, cy / m], SUPPORT_EROSION) {
            for &i in &load {
                knock_over(&mut next.placements[i], dir);
            }
            next.placements[top].outcome = SettleKind::CompoundCollapsed;
            next.collapsed = true;
            let outcome = SettleOutcome { kind: SettleKind::CompoundCollapsed, final_pose: next.placements[top].pose };
            return Ok((next, outcome));
        }
    }

    let outcome = SettleOutcome { kind: next.placements[top].outcome, final_pose: next.placements[top].pose };
    next.collapsed = check_collapse(&next);
    Ok((next, outcome))
}

/// Normalized render plus raw depth range, as carried in dataset records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: u32,
    pub orientation: Orientation,
    pub slot: usize,
    pub pose: Pose,
    #[serde(serialize_with = "serialize_rounded")]
    pub image: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
    pub aabb: Aabb,
    /// Indices of the compound members this object rests on.
    pub supports: Vec<usize>,
}

fn serialize_rounded<S: serde::Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for v in values {
        seq.serialize_element(&((v * 1e6).round() / 1e6))?;
    }
    seq.end()
}

impl ObjectView {
    pub fn from_placement(p: &Placement) -> Self {
        let img = view_image(&p.spec, p.pose.orientation);
        ObjectView {
            id: p.spec.id,
            orientation: p.pose.orientation,
            slot: p.slot,
            pose: p.pose,
            image: img.values.clone(),
            d_min: img.d_min,
            d_max: img.d_max,
            aabb: p.aabb(),
            supports: p.supports.clone(),
        }
    }
}

fn view_image(spec: &ObjectSpec, orientation: Orientation) -> std::sync::Arc<NormalizedImage> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    type Key = (u32, Orientation, [u64; 6]);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<NormalizedImage>>>> = OnceLock::new();
    let key = (
        spec.id,
        orientation,
        [spec.height, spec.outer_width, spec.outer_depth, spec.hole_radius, spec.cavity_radius, spec.wall_thickness].map(f64::to_bits),
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(img) = cache.lock().unwrap().get(&key) {
        return img.clone();
    }
    let img = Arc::new(normalize(&render_object(spec, orientation)));
    cache.lock().unwrap().insert(key, img.clone());
    img
}

/// One placement observed during exploration: the compound before the
/// action, the released object and the effects measured afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub episode: u64,
    pub step: usize,
    pub compound: Vec<ObjectView>,
    pub new_object: ObjectView,
    pub slot: usize,
    pub orientation: Orientation,
    /// Per compound member `[top, bottom]`, decimeters.
    pub e1: Vec<[f64; 2]>,
    /// Per compound member `[x+, x-, y+, y-]`, decimeters.
    pub e2: Vec<[f64; 4]>,
    pub e3: u8,
    pub collapsed: bool,
    pub outcome: SettleKind,
}

impl InteractionRecord {
    pub fn tower_size(&self) -> usize {
        self.compound.len()
    }
}

/// Runs one exploration episode: random objects (and actions in nonlinear
/// mode) are placed until the inventory is used up or something falls.
pub fn run_episode(seed: u64, inventory: &[ObjectSpec], mode: Mode) -> Vec<InteractionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<ObjectSpec> = inventory.to_vec();
    order.shuffle(&mut rng);
    let actions = mode.actions();
    let mut compound = CompoundState::new();
    let mut records = Vec::new();
    for (i, spec) in order.iter().enumerate() {
        let (slot, orientation) = actions[rng.gen_range(0..actions.len())];
        let before = compound.clone();
        let (after, outcome) = place(&before, spec, slot, orientation).expect("episode stops at collapse");
        let new = after.placements.last().expect("just placed").clone();
        let rows = effects::effect_row(&after, &new);
        records.push(InteractionRecord {
            episode: seed,
            step: i + 1,
            compound: before
                .placements
                .iter()
                .map(ObjectView::from_placement)
                .collect(),
            new_object: ObjectView::from_placement(&new),
            slot,
            orientation,
            e1: rows.e1,
            e2: rows.e2,
            e3: rows.e3,
            collapsed: after.collapsed,
            outcome: outcome.kind,
        });
        if after.collapsed {
            break;
        }
        compound = after;
    }
    records
}

/// Replays a sequence of actions from an empty table.
pub fn simulate_sequence(actions: &[(ObjectSpec, usize, Orientation)]) -> (CompoundState, Vec<SettleOutcome>) {
    let mut compound = CompoundState::new();
    let mut outcomes = Vec::new();
    for (spec, slot, o) in actions {
        if compound.collapsed {
            break;
        }
        let (next, out) = place(&compound, spec, *slot, *o).expect("not collapsed");
        compound = next;
        outcomes.push(out);
    }
    (compound, outcomes)
}
