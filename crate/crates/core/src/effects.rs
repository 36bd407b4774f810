//! Ground-truth effect encodings measured from settled geometry.
//!
//! `e1` compares top and bottom heights, `e2` compares the lateral extents cut
//! by four horizontal rays through the new object's center, and `e3` flags a
//! fall or collapse. Lengths are reported in decimeters.

use serde::{Deserialize, Serialize};

use crate::geometry::{add, dot, ray_hits, scale, sub, Ray, Vec3};
use crate::simulator::{check_collapse, CompoundState, Placement};

pub const DECIMETERS_PER_METER: f64 = 10.0;
const SIGN_TOL: f64 = 1e-9;

pub const RAY_DIRECTIONS: [Vec3; 4] = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]];

/// Effects of one placement against every earlier compound member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub e1: Vec<[f64; 2]>,
    pub e2: Vec<[f64; 4]>,
    pub e3: u8,
}

/// Signs a face difference: negative when the new object's face lies closer
/// to the queried object's center than the queried face itself, measured
/// along the face normal. Ties stay positive.
pub fn sign_adjust(face_value: f64, new_surface_center: Vec3, queried_surface_center: Vec3, queried_center: Vec3) -> f64 {
    let normal = sub(queried_surface_center, queried_center);
    let len = dot(normal, normal).sqrt();
    if face_value == 0.0 || len < 1e-12 {
        return face_value.abs();
    }
    let n = scale(normal, 1.0 / len);
    let new_offset = dot(sub(new_surface_center, queried_center), n).abs();
    if new_offset < len - SIGN_TOL {
        -face_value.abs()
    } else {
        face_value.abs()
    }
}

/// Signed `[top, bottom]` height differences in decimeters.
pub fn compute_e1(new: &Placement, queried: &Placement) -> [f64; 2] {
    let a = new.aabb();
    let b = queried.aabb();
    let [nx, ny, _] = a.center();
    let qc = b.center();
    let top = sign_adjust((b.z_max - a.z_max).abs(), [nx, ny, a.z_max], [qc[0], qc[1], b.z_max], qc);
    let bottom = sign_adjust((b.z_min - a.z_min).abs(), [nx, ny, a.z_min], [qc[0], qc[1], b.z_min], qc);
    [top * DECIMETERS_PER_METER, bottom * DECIMETERS_PER_METER]
}

/// Signed `[x+, x-, y+, y-]` lateral offsets in decimeters; 0 where the ray
/// misses the queried object.
pub fn compute_e2(new: &Placement, queried: &Placement) -> [f64; 4] {
    let origin = new.aabb().center();
    let new_solids = new.solids();
    let queried_solids = queried.solids();
    let qc = queried.aabb().center();
    let mut out = [0.0; 4];
    for (slot, dir) in RAY_DIRECTIONS.iter().enumerate() {
        let ray = Ray { origin, direction: *dir };
        let Some(&t_q) = ray_hits(&queried_solids, &ray).last() else {
            continue;
        };
        let t_new = ray_hits(&new_solids, &ray).last().copied().unwrap_or(0.0);
        // queried center projected onto the ray line keeps the comparison 1-D
        let center_on_line = add(origin, scale(*dir, dot(sub(qc, origin), *dir)));
        let value = sign_adjust((t_q - t_new).abs(), ray.at(t_new), ray.at(t_q), center_on_line);
        out[slot] = value * DECIMETERS_PER_METER;
    }
    out
}

pub fn compute_e3(compound_after: &CompoundState) -> u8 {
    u8::from(check_collapse(compound_after))
}

/// Effects of `new` (the last placement of `compound_after`) against each
/// earlier member, plus the shared collapse flag.
pub fn effect_row(compound_after: &CompoundState, new: &Placement) -> EffectRow {
    let members = &compound_after.placements[..compound_after.len().saturating_sub(1)];
    EffectRow {
        e1: members.iter().map(|q| compute_e1(new, q)).collect(),
        e2: members.iter().map(|q| compute_e2(new, q)).collect(),
        e3: compute_e3(compound_after),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog_standard, Orientation, Pose};
    use crate::simulator::{place, CENTER_SLOT};

    fn stack(ids: &[usize]) -> CompoundState {
        let cat = catalog_standard();
        let mut c = CompoundState::new();
        for &i in ids {
            c = place(&c, &cat[i], CENTER_SLOT, Orientation::Upright).unwrap().0;
        }
        c
    }

    #[test]
    fn sign_rule_cases() {
        // new top above queried top
        assert!(sign_adjust(0.1, [0.0, 0.0, 0.2], [0.0, 0.0, 0.1], [0.0, 0.0, 0.05]) > 0.0);
        // ring top below the pole tip
        assert!(sign_adjust(0.12, [0.0, 0.0, 0.05], [0.0, 0.0, 0.17], [0.0, 0.0, 0.085]) < 0.0);
        // coincident faces
        let z = sign_adjust(0.0, [0.0, 0.0, 0.1], [0.0, 0.0, 0.1], [0.0, 0.0, 0.05]);
        assert!(z == 0.0 && z.is_sign_positive());
    }

    #[test]
    fn cube_on_cube() {
        let cat = catalog_standard();
        let mut c = place(&CompoundState::new(), &cat[6], CENTER_SLOT, Orientation::Upright).unwrap().0;
        let mut second = cat[6];
        second.id = 42;
        c = place(&c, &second, CENTER_SLOT, Orientation::Upright).unwrap().0;
        let row = effect_row(&c, &c.placements[1]);
        assert_eq!(row.e1, vec![[1.0, 1.0]]);
        assert_eq!(row.e2, vec![[0.0; 4]]);
        assert_eq!(row.e3, 0);
        // identity query
        assert_eq!(compute_e1(&c.placements[0], &c.placements[0]), [0.0, 0.0]);
    }

    #[test]
    fn ring_over_pole() {
        let c = stack(&[0, 7]);
        let [top, bottom] = compute_e1(&c.placements[1], &c.placements[0]);
        assert!((top + 1.2).abs() < 1e-9, "{top}");
        assert!((bottom + 0.2).abs() < 1e-9, "{bottom}");
        let e2 = compute_e2(&c.placements[1], &c.placements[0]);
        for v in e2 {
            assert!((v - 0.45).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn ball_in_cup_is_enclosed() {
        let c = stack(&[12, 1]);
        let e2 = compute_e2(&c.placements[1], &c.placements[0]);
        for v in e2 {
            assert!((v + 0.275).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn row_cardinality_and_consistency() {
        let c = stack(&[0, 7, 8, 9]);
        let new = c.placements.last().unwrap();
        let row = effect_row(&c, new);
        assert_eq!(row.e1.len(), 3);
        for (i, q) in c.placements[..3].iter().enumerate() {
            assert_eq!(row.e1[i], compute_e1(new, q));
            assert_eq!(row.e2[i], compute_e2(new, q));
        }
        let first = stack(&[6]);
        let row = effect_row(&first, &first.placements[0]);
        assert!(row.e1.is_empty());
        assert_eq!(row.e3, 0);
        let fallen = stack(&[1, 2]);
        assert_eq!(effect_row(&fallen, fallen.placements.last().unwrap()).e3, 1);
    }

    #[test]
    fn queried_below_ray_plane_is_zero() {
        let c = stack(&[6, 12]);
        assert_eq!(compute_e2(&c.placements[1], &c.placements[0]), [0.0; 4]);
    }

    #[test]
    fn translation_invariance() {
        let c = stack(&[0, 8, 13]);
        let shifted = {
            let mut s = c.clone();
            for p in &mut s.placements {
                p.pose = Pose::new(p.pose.x + 0.37, p.pose.y - 0.21, p.pose.z, p.pose.orientation);
            }
            s
        };
        let a = effect_row(&c, c.placements.last().unwrap());
        let b = effect_row(&shifted, shifted.placements.last().unwrap());
        for (x, y) in a.e1.iter().flatten().zip(b.e1.iter().flatten()) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.e2.iter().flatten().zip(b.e2.iter().flatten()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
