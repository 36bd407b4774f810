//! Object catalog, poses, bounding boxes and analytic ray casting.
//!
//! Every object is modeled as a small union of vertical primitives (solid or
//! annular cylinders, boxes and spheres) expressed in a local frame whose
//! origin is the bottom-center of the object.

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

/// Base disk height of the pole.
pub const POLE_BASE_HEIGHT: f64 = 0.02;
/// Wall thickness shared by all cups.
pub const CUP_WALL: f64 = 0.01;

/// Chords shorter than this count as tangent (no intersection).
const INTERVAL_EPS: f64 = 1e-7;

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Pole,
    Ball,
    Cube,
    Ring,
    Cup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Upright,
    Inverted,
}

impl Orientation {
    pub const ALL: [Orientation; 2] = [Orientation::Upright, Orientation::Inverted];

    pub fn flag(self) -> f64 {
        match self {
            Orientation::Upright => 0.0,
            Orientation::Inverted => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Upright => "upright",
            Orientation::Inverted => "inverted",
        }
    }
}

/// Parametric description of one toy. Lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub kind: ObjectKind,
    pub height: f64,
    pub outer_width: f64,
    pub outer_depth: f64,
    /// Ring inner radius, pole shaft radius, 0 otherwise.
    pub hole_radius: f64,
    pub cavity_radius: f64,
    pub cavity_depth: f64,
    pub wall_thickness: f64,
}

impl ObjectSpec {
    fn new(id: u32, kind: ObjectKind, height: f64, width: f64) -> Self {
        ObjectSpec {
            id,
            kind,
            height,
            outer_width: width,
            outer_depth: width,
            hole_radius: 0.0,
            cavity_radius: 0.0,
            cavity_depth: 0.0,
            wall_thickness: 0.0,
        }
    }

    pub fn pole(id: u32, height: f64, width: f64, shaft_radius: f64) -> Self {
        ObjectSpec {
            hole_radius: shaft_radius,
            ..Self::new(id, ObjectKind::Pole, height, width)
        }
    }

    pub fn ball(id: u32, diameter: f64) -> Self {
        Self::new(id, ObjectKind::Ball, diameter, diameter)
    }

    pub fn cube(id: u32, side: f64) -> Self {
        Self::new(id, ObjectKind::Cube, side, side)
    }

    pub fn ring(id: u32, height: f64, width: f64, hole_radius: f64) -> Self {
        ObjectSpec {
            hole_radius,
            wall_thickness: width / 2.0 - hole_radius,
            ..Self::new(id, ObjectKind::Ring, height, width)
        }
    }

    pub fn cup(id: u32, height: f64, width: f64, wall: f64) -> Self {
        ObjectSpec {
            cavity_radius: width / 2.0 - wall,
            cavity_depth: height - wall,
            wall_thickness: wall,
            ..Self::new(id, ObjectKind::Cup, height, width)
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_width / 2.0
    }

    /// True when the object has a through-hole a shaft can pass.
    pub fn has_hole(&self) -> bool {
        self.kind == ObjectKind::Ring
    }

    /// Circumscribed radius of the footprint.
    pub fn footprint_radius(&self) -> f64 {
        match self.kind {
            ObjectKind::Cube => 0.5 * self.outer_width.hypot(self.outer_depth),
            _ => self.outer_radius(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let half = self.outer_width / 2.0;
        let ok = self.height > 0.0
            && self.outer_width > 0.0
            && self.hole_radius < half
            && self.cavity_radius < half
            && self.cavity_depth < self.height;
        match self.kind {
            ObjectKind::Cup => ok && (self.cavity_depth - (self.height - self.wall_thickness)).abs() < 1e-12,
            _ => ok,
        }
    }

    /// The object's solid as primitives in its local frame.
    pub fn solids(&self, orientation: Orientation) -> Vec<Primitive> {
        let r = self.outer_radius();
        let h = self.height;
        let upright = match self.kind {
            ObjectKind::Pole => vec![
                Primitive::disk(0.0, r, 0.0, POLE_BASE_HEIGHT),
                Primitive::disk(0.0, self.hole_radius, POLE_BASE_HEIGHT, h),
            ],
            ObjectKind::Ball => vec![Primitive::sphere(r, r)],
            ObjectKind::Cube => vec![Primitive::square(self.outer_width / 2.0, self.outer_depth / 2.0, 0.0, h)],
            ObjectKind::Ring => vec![Primitive::disk(self.hole_radius, r, 0.0, h)],
            ObjectKind::Cup => vec![
                Primitive::disk(0.0, r, 0.0, self.wall_thickness),
                Primitive::disk(self.cavity_radius, r, self.wall_thickness, h),
            ],
        };
        match orientation {
            Orientation::Upright => upright,
            Orientation::Inverted => upright.into_iter().map(|p| p.flipped(h)).collect(),
        }
    }

    /// Solid volume in cubic meters.
    pub fn volume(&self) -> f64 {
        self.solids(Orientation::Upright).iter().map(Primitive::volume).sum()
    }
}

/// Pose of an object frame origin (bottom-center).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub orientation: Orientation,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, orientation: Orientation) -> Self {
        Pose { x, y, z, orientation }
    }

    pub fn origin() -> Self {
        Pose::new(0.0, 0.0, 0.0, Orientation::Upright)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Aabb {
    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            0.5 * (self.z_min + self.z_max),
        ]
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        p[0] >= self.x_min - tol
            && p[0] <= self.x_max + tol
            && p[1] >= self.y_min - tol
            && p[1] <= self.y_max + tol
            && p[2] >= self.z_min - tol
            && p[2] <= self.z_max + tol
    }

    /// Closed-box intersection test after growing both boxes by `inflate`.
    pub fn intersects(&self, other: &Aabb, inflate: f64) -> bool {
        self.x_min - inflate <= other.x_max + inflate
            && other.x_min - inflate <= self.x_max + inflate
            && self.y_min - inflate <= other.y_max + inflate
            && other.y_min - inflate <= self.y_max + inflate
            && self.z_min - inflate <= other.z_max + inflate
            && other.z_min - inflate <= self.z_max + inflate
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Aabb {
        Aabb {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            y_min: self.y_min + dy,
            y_max: self.y_max + dy,
            z_min: self.z_min + dz,
            z_max: self.z_max + dz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing the direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        let n = norm(direction);
        Ray { origin, direction: scale(direction, 1.0 / n) }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        add(self.origin, scale(self.direction, t))
    }
}

/// Horizontal cross-section of a vertical primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    /// Disk (`r_in == 0`) or annulus.
    Radial { r_in: f64, r_out: f64 },
    Square { hx: f64, hy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Extruded footprint over `[z0, z1]`.
    Prism(Footprint),
    /// Sphere centered at the middle of `[z0, z1]`.
    Sphere { r: f64 },
}

/// One convex-ish building block of an object, positioned in some frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub center: [f64; 2],
    pub z0: f64,
    pub z1: f64,
}

impl Primitive {
    pub fn disk(r_in: f64, r_out: f64, z0: f64, z1: f64) -> Self {
        Primitive { shape: Shape::Prism(Footprint::Radial { r_in, r_out }), center: [0.0, 0.0], z0, z1 }
    }

    pub fn square(hx: f64, hy: f64, z0: f64, z1: f64) -> Self {
        Primitive { shape: Shape::Prism(Footprint::Square { hx, hy }), center: [0.0, 0.0], z0, z1 }
    }

    pub fn sphere(r: f64, zc: f64) -> Self {
        Primitive { shape: Shape::Sphere { r }, center: [0.0, 0.0], z0: zc - r, z1: zc + r }
    }

    fn flipped(self, height: f64) -> Self {
        Primitive { z0: height - self.z1, z1: height - self.z0, ..self }
    }

    pub fn placed(&self, pose: &Pose) -> Self {
        Primitive {
            center: [self.center[0] + pose.x, self.center[1] + pose.y],
            z0: self.z0 + pose.z,
            z1: self.z1 + pose.z,
            ..*self
        }
    }

    /// Footprint used for vertical contact; a sphere projects to its disk.
    pub fn footprint(&self) -> Footprint {
        match self.shape {
            Shape::Prism(f) => f,
            Shape::Sphere { r } => Footprint::Radial { r_in: 0.0, r_out: r },
        }
    }

    pub fn zc(&self) -> f64 {
        0.5 * (self.z0 + self.z1)
    }

    pub fn volume(&self) -> f64 {
        let h = self.z1 - self.z0;
        match self.shape {
            Shape::Prism(Footprint::Radial { r_in, r_out }) => std::f64::consts::PI * (r_out * r_out - r_in * r_in) * h,
            Shape::Prism(Footprint::Square { hx, hy }) => 4.0 * hx * hy * h,
            Shape::Sphere { r } => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        }
    }

    /// Point-membership test for the closed solid.
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        match self.shape {
            Shape::Sphere { r } => {
                let dz = p[2] - self.zc();
                dx * dx + dy * dy + dz * dz <= (r + tol) * (r + tol)
            }
            Shape::Prism(fp) => {
                p[2] >= self.z0 - tol && p[2] <= self.z1 + tol && footprint_distance(&fp, dx, dy) <= tol
            }
        }
    }

    /// Parameter intervals along `ray` (unclipped) inside this solid.
    pub fn ray_intervals(&self, ray: &Ray) -> Vec<(f64, f64)> {
        let o = ray.origin;
        let d = ray.direction;
        let ox = o[0] - self.center[0];
        let oy = o[1] - self.center[1];
        match self.shape {
            Shape::Sphere { r } => {
                let oz = o[2] - self.zc();
                let b = ox * d[0] + oy * d[1] + oz * d[2];
                let c = ox * ox + oy * oy + oz * oz - r * r;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return Vec::new();
                }
                let s = disc.sqrt();
                if 2.0 * s <= INTERVAL_EPS {
                    return Vec::new();
                }
                vec![(-b - s, -b + s)]
            }
            Shape::Prism(fp) => {
                let Some(slab) = slab_interval(o[2], d[2], self.z0, self.z1) else {
                    return Vec::new();
                };
                let lateral: Vec<(f64, f64)> = match fp {
                    Footprint::Square { hx, hy } => {
                        let Some(sx) = slab_interval(ox, d[0], -hx, hx) else { return Vec::new() };
                        let Some(sy) = slab_interval(oy, d[1], -hy, hy) else { return Vec::new() };
                        vec![(sx.0.max(sy.0), sx.1.min(sy.1))]
                    }
                    Footprint::Radial { r_in, r_out } => {
                        let Some(outer) = circle_interval(ox, oy, d[0], d[1], r_out) else {
                            return Vec::new();
                        };
                        match (r_in > 0.0).then(|| circle_interval(ox, oy, d[0], d[1], r_in)).flatten() {
                            None => vec![outer],
                            Some(inner) => subtract_interval(outer, inner),
                        }
                    }
                };
                lateral
                    .into_iter()
                    .map(|(a, b)| (a.max(slab.0), b.min(slab.1)))
                    .filter(|(a, b)| b - a > INTERVAL_EPS)
                    .collect()
            }
        }
    }
}

/// Open interval of `t` with `lo < o + t*d < hi`, or `None` when empty.
fn slab_interval(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d.abs() < 1e-15 {
        return (o > lo && o < hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let t0 = (lo - o) / d;
    let t1 = (hi - o) / d;
    let (a, b) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
    (b - a > INTERVAL_EPS).then_some((a, b))
}

fn circle_interval(ox: f64, oy: f64, dx: f64, dy: f64, r: f64) -> Option<(f64, f64)> {
    let a = dx * dx + dy * dy;
    let c = ox * ox + oy * oy - r * r;
    if a < 1e-24 {
        return (c < 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let b = ox * dx + oy * dy;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / a, (-b + s) / a))
}

fn subtract_interval(outer: (f64, f64), inner: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2);
    if inner.0 > outer.0 {
        out.push((outer.0, inner.0.min(outer.1)));
    }
    if inner.1 < outer.1 {
        out.push((inner.1.max(outer.0), outer.1));
    }
    out.retain(|(a, b)| b - a > INTERVAL_EPS);
    out
}

/// Distance from a point (relative to the footprint center) to the closed footprint.
pub fn footprint_distance(fp: &Footprint, dx: f64, dy: f64) -> f64 {
    match *fp {
        Footprint::Radial { r_in, r_out } => {
            let rho = dx.hypot(dy);
            if rho < r_in {
                r_in - rho
            } else if rho > r_out {
                rho - r_out
            } else {
                0.0
            }
        }
        Footprint::Square { hx, hy } => {
            let ex = (dx.abs() - hx).max(0.0);
            let ey = (dy.abs() - hy).max(0.0);
            ex.hypot(ey)
        }
    }
}

/// Range of distances from an outside point (offset `dx, dy` from the
/// footprint center) to points of the footprint.
pub fn footprint_distance_range(fp: &Footprint, dx: f64, dy: f64) -> (f64, f64) {
    match *fp {
        Footprint::Radial { r_in, r_out } => {
            let d = dx.hypot(dy);
            let lo = if d >= r_in && d <= r_out {
                0.0
            } else {
                (d - r_in).abs().min((d - r_out).abs())
            };
            (lo, d + r_out)
        }
        Footprint::Square { hx, hy } => {
            let lo = footprint_distance(fp, dx, dy);
            let fx = dx.abs() + hx;
            let fy = dy.abs() + hy;
            (lo, fx.hypot(fy))
        }
    }
}

/// Whether two footprints share a region of positive area.
pub fn footprints_overlap(a: &Footprint, ca: [f64; 2], b: &Footprint, cb: [f64; 2], eps: f64) -> bool {
    let dx = cb[0] - ca[0];
    let dy = cb[1] - ca[1];
    match (a, b) {
        (Footprint::Square { hx: ax, hy: ay }, Footprint::Square { hx: bx, hy: by }) => {
            dx.abs() < ax + bx - eps && dy.abs() < ay + by - eps
        }
        (Footprint::Radial { r_in, r_out }, other) => {
            // distances from a's center to points of the other footprint
            let (lo, hi) = footprint_distance_range(other, -dx, -dy);
            let lo = if footprint_distance(other, -dx, -dy) == 0.0 { 0.0 } else { lo };
            lo.max(*r_in) < hi.min(*r_out) - eps
        }
        (sq @ Footprint::Square { .. }, radial @ Footprint::Radial { .. }) => {
            footprints_overlap(radial, cb, sq, ca, eps)
        }
    }
}

pub fn footprint_contains(fp: &Footprint, center: [f64; 2], p: [f64; 2], tol: f64) -> bool {
    footprint_distance(fp, p[0] - center[0], p[1] - center[1]) <= tol
}

/// True when the whole disk `(p, r)` lies inside the footprint.
pub fn footprint_contains_disk(fp: &Footprint, center: [f64; 2], p: [f64; 2], r: f64) -> bool {
    let dx = p[0] - center[0];
    let dy = p[1] - center[1];
    match *fp {
        Footprint::Radial { r_in, r_out } => {
            let d = dx.hypot(dy);
            d + r <= r_out + 1e-12 && (r_in == 0.0 || d - r >= r_in - 1e-12)
        }
        Footprint::Square { hx, hy } => dx.abs() + r <= hx + 1e-12 && dy.abs() + r <= hy + 1e-12,
    }
}

/// The fifteen toys of the standard inventory.
pub fn catalog_standard() -> Vec<ObjectSpec> {
    let mut out = Vec::with_capacity(15);
    out.push(ObjectSpec::pole(0, 0.17, 0.14, 0.015));
    for i in 0..5 {
        out.push(ObjectSpec::ball(1 + i, 0.05));
    }
    out.push(ObjectSpec::cube(6, 0.10));
    let rings = [(0.03, 0.12, 0.040), (0.025, 0.105, 0.035), (0.024, 0.097, 0.032), (0.02, 0.09, 0.030), (0.015, 0.08, 0.026)];
    for (i, (h, w, hole)) in rings.into_iter().enumerate() {
        out.push(ObjectSpec::ring(7 + i as u32, h, w, hole));
    }
    let cups = [(0.10, 0.105), (0.085, 0.075), (0.075, 0.065)];
    for (i, (h, w)) in cups.into_iter().enumerate() {
        out.push(ObjectSpec::cup(12 + i as u32, h, w, CUP_WALL));
    }
    out
}

/// Cube and cups: the inventory used for nonlinear (slot/orientation) compounds.
pub fn catalog_nonlinear() -> Vec<ObjectSpec> {
    catalog_standard()
        .into_iter()
        .filter(|s| matches!(s.kind, ObjectKind::Cube | ObjectKind::Cup))
        .collect()
}

pub fn catalog_to_json(specs: &[ObjectSpec]) -> String {
    let mut s = String::from("[\n");
    for (i, o) in specs.iter().enumerate() {
        s.push_str(&format!(
            "  {{\"id\": {}, \"kind\": \"{:?}\", \"height\": {:.6}, \"outer_width\": {:.6}, \"outer_depth\": {:.6}, \
             \"hole_radius\": {:.6}, \"cavity_radius\": {:.6}, \"cavity_depth\": {:.6}, \"wall_thickness\": {:.6}}}",
            o.id, o.kind, o.height, o.outer_width, o.outer_depth, o.hole_radius, o.cavity_radius, o.cavity_depth, o.wall_thickness
        ));
        s.push_str(if i + 1 < specs.len() { ",\n" } else { "\n" });
    }
    s.push(']');
    s
}

pub fn bounding_box(spec: &ObjectSpec, pose: &Pose) -> Aabb {
    let hw = spec.outer_width / 2.0;
    let hd = spec.outer_depth / 2.0;
    Aabb {
        x_min: pose.x - hw,
        x_max: pose.x + hw,
        y_min: pose.y - hd,
        y_max: pose.y + hd,
        z_min: pose.z,
        z_max: pose.z + spec.height,
    }
}

/// World-frame primitives of a posed object.
pub fn posed_solids(spec: &ObjectSpec, pose: &Pose) -> Vec<Primitive> {
    spec.solids(pose.orientation).iter().map(|p| p.placed(pose)).collect()
}

/// Ray parameters (`t >= 0`) where the ray crosses the surface of a union of solids.
pub fn ray_hits(solids: &[Primitive], ray: &Ray) -> Vec<f64> {
    let mut intervals: Vec<(f64, f64)> = solids.iter().flat_map(|p| p.ray_intervals(ray)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1e-12 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut ts = Vec::new();
    for (a, b) in merged {
        if b <= 0.0 {
            continue;
        }
        if a >= 0.0 {
            ts.push(a);
        }
        ts.push(b);
    }
    ts
}

pub fn ray_intersect(spec: &ObjectSpec, pose: &Pose, ray: &Ray) -> Vec<Vec3> {
    ray_hits(&posed_solids(spec, pose), ray).into_iter().map(|t| ray.at(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_of(kind: ObjectKind) -> ObjectSpec {
        *catalog_standard().iter().find(|s| s.kind == kind).unwrap()
    }

    #[test]
    fn catalog_matches_object_table() {
        let cat = catalog_standard();
        assert_eq!(cat.len(), 15);
        assert_eq!(cat[0].kind, ObjectKind::Pole);
        assert_eq!(cat[0].height, 0.17);
        assert_eq!(cat[0].outer_width, 0.14);
        assert_eq!(cat.iter().filter(|s| s.kind == ObjectKind::Ball).count(), 5);
        assert_eq!(cat.iter().filter(|s| s.kind == ObjectKind::Ring).count(), 5);
        assert_eq!(cat.iter().filter(|s| s.kind == ObjectKind::Cup).count(), 3);
        assert!(cat.iter().all(ObjectSpec::is_valid));
        for (i, s) in cat.iter().enumerate() {
            assert_eq!(s.id as usize, i);
        }
        // every ring passes over the pole shaft
        for r in cat.iter().filter(|s| s.kind == ObjectKind::Ring) {
            assert!(r.hole_radius > cat[0].hole_radius);
        }
    }

    #[test]
    fn bounding_boxes() {
        let cube = spec_of(ObjectKind::Cube);
        let b = bounding_box(&cube, &Pose::origin());
        assert_eq!((b.z_min, b.z_max, b.x_min, b.x_max), (0.0, 0.10, -0.05, 0.05));
        let ball = spec_of(ObjectKind::Ball);
        let b = bounding_box(&ball, &Pose::origin());
        assert_eq!((b.z_min, b.z_max), (0.0, 0.05));
        let cup = catalog_standard()[12];
        let up = bounding_box(&cup, &Pose::origin());
        let inv = bounding_box(&cup, &Pose::new(0.0, 0.0, 0.0, Orientation::Inverted));
        assert_eq!(up, inv);
    }

    #[test]
    fn ray_through_cube() {
        let cube = spec_of(ObjectKind::Cube);
        let ray = Ray::new([-1.0, 0.0, 0.05], [1.0, 0.0, 0.0]);
        let hits = ray_intersect(&cube, &Pose::origin(), &ray);
        assert_eq!(hits.len(), 2);
        assert!((hits[0][0] + 0.05).abs() < 1e-12);
        assert!((hits[1][0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ray_through_ring_hits_four_walls() {
        let ring = catalog_standard()[7];
        let ray = Ray::new([-1.0, 0.0, 0.015], [1.0, 0.0, 0.0]);
        let xs: Vec<f64> = ray_intersect(&ring, &Pose::origin(), &ray).iter().map(|p| p[0]).collect();
        assert_eq!(xs.len(), 4);
        let expect = [-0.06, -0.04, 0.04, 0.06];
        for (x, e) in xs.iter().zip(expect) {
            assert!((x - e).abs() < 1e-12, "{x} vs {e}");
        }
    }

    #[test]
    fn ray_above_object_misses() {
        for spec in catalog_standard() {
            let ray = Ray::new([-1.0, 0.0, spec.height + 0.01], [1.0, 0.0, 0.0]);
            assert!(ray_intersect(&spec, &Pose::origin(), &ray).is_empty());
        }
    }

    #[test]
    fn pole_base_and_shaft_merge_into_one_interval() {
        let pole = catalog_standard()[0];
        // diagonal ray entering the base disk top through the shaft
        let ray = Ray::new([0.0, 0.0, 0.3], [0.001, 0.0, -1.0]);
        let hits = ray_intersect(&pole, &Pose::origin(), &ray);
        assert_eq!(hits.len(), 2);
        assert!((hits[0][2] - 0.17).abs() < 1e-9);
        assert!(hits[1][2].abs() < 1e-9);
    }

    #[test]
    fn radial_overlap_rules() {
        let shaft = Footprint::Radial { r_in: 0.0, r_out: 0.015 };
        let ring = Footprint::Radial { r_in: 0.04, r_out: 0.06 };
        let base = Footprint::Radial { r_in: 0.0, r_out: 0.07 };
        assert!(!footprints_overlap(&ring, [0.0, 0.0], &shaft, [0.0, 0.0], 1e-9));
        assert!(footprints_overlap(&ring, [0.0, 0.0], &base, [0.0, 0.0], 1e-9));
        assert!(!footprints_overlap(&base, [0.0, 0.0], &base, [0.2, 0.0], 1e-9));
        let sq = Footprint::Square { hx: 0.05, hy: 0.05 };
        assert!(footprints_overlap(&sq, [0.0, 0.0], &ring, [0.0, 0.0], 1e-9));
        assert!(!footprints_overlap(&sq, [0.0, 0.0], &Footprint::Radial { r_in: 0.08, r_out: 0.09 }, [0.0, 0.0], 1e-9));
        assert!(footprints_overlap(&sq, [0.08, 0.0], &base, [0.0, 0.0], 1e-9));
    }

    #[test]
    fn catalog_json_has_six_decimals() {
        let json = catalog_to_json(&catalog_standard());
        assert!(json.contains("\"height\": 0.170000"));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 15);
    }
}
