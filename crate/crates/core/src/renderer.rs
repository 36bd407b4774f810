//! Synthetic overhead depth images of single objects.

use serde::{Deserialize, Serialize};

use crate::geometry::{posed_solids, ray_hits, ObjectSpec, Orientation, Pose, Primitive, Ray};

pub const IMAGE_SIZE: usize = 32;
pub const PIXELS: usize = IMAGE_SIZE * IMAGE_SIZE;
/// Camera plane height above the table.
pub const CAMERA_HEIGHT: f64 = 1.0;
const SUPERSAMPLE: usize = 4;
const WINDOW_MARGIN: f64 = 1.2;

/// Distances from the camera plane, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub pixels: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedImage {
    pub values: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
}

impl DepthImage {
    pub fn from_pixels(pixels: Vec<f64>) -> Self {
        let d_min = pixels.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        DepthImage { pixels, d_min, d_max }
    }

    /// Portable graymap dump for eyeballing renders.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n");
        let span = (self.d_max - self.d_min).max(1e-12);
        for row in self.pixels.chunks(IMAGE_SIZE) {
            let line: Vec<String> = row
                .iter()
                .map(|p| format!("{}", (255.0 * (self.d_max - p) / span).round() as u8))
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

impl NormalizedImage {
    pub fn denormalize(&self) -> Vec<f64> {
        self.values.iter().map(|v| self.d_max - v * (self.d_max - self.d_min)).collect()
    }
}

/// Height of the topmost solid surface on the vertical line through `(x, y)`.
pub fn top_height(solids: &[Primitive], x: f64, y: f64) -> f64 {
    let ray = Ray { origin: [x, y, CAMERA_HEIGHT], direction: [0.0, 0.0, -1.0] };
    ray_hits(solids, &ray).first().map_or(0.0, |t| CAMERA_HEIGHT - t)
}

/// Side length of the square render window for an object.
pub fn window_size(spec: &ObjectSpec) -> f64 {
    WINDOW_MARGIN * spec.outer_width.max(spec.outer_depth)
}

pub fn render_object(spec: &ObjectSpec, orientation: Orientation) -> DepthImage {
    render_object_shifted(spec, orientation, 0.0, 0.0)
}

/// Renders with the window center offset by `(dx, dy)` pixels (sub-pixel jitter).
pub fn render_object_shifted(spec: &ObjectSpec, orientation: Orientation, dx: f64, dy: f64) -> DepthImage {
    let solids = posed_solids(spec, &Pose::new(0.0, 0.0, 0.0, orientation));
    let window = window_size(spec);
    let px = window / IMAGE_SIZE as f64;
    let sub = px / SUPERSAMPLE as f64;
    let x0 = -window / 2.0 + dx * px;
    let y0 = -window / 2.0 + dy * px;
    let mut pixels = Vec::with_capacity(PIXELS);
    for row in 0..IMAGE_SIZE {
        for col in 0..IMAGE_SIZE {
            let mut acc = 0.0;
            for sr in 0..SUPERSAMPLE {
                for sc in 0..SUPERSAMPLE {
                    let x = x0 + col as f64 * px + (sc as f64 + 0.5) * sub;
                    let y = y0 + row as f64 * px + (sr as f64 + 0.5) * sub;
                    acc += CAMERA_HEIGHT - top_height(&solids, x, y);
                }
            }
            pixels.push(acc / (SUPERSAMPLE * SUPERSAMPLE) as f64);
        }
    }
    DepthImage::from_pixels(pixels)
}

pub fn normalize(img: &DepthImage) -> NormalizedImage {
    let span = img.d_max - img.d_min;
    let values = if span > 0.0 {
        img.pixels.iter().map(|p| (img.d_max - p) / span).collect()
    } else {
        vec![0.0; img.pixels.len()]
    };
    NormalizedImage { values, d_min: img.d_min, d_max: img.d_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog_standard, ObjectKind};

    fn center_index() -> usize {
        (IMAGE_SIZE / 2) * IMAGE_SIZE + IMAGE_SIZE / 2
    }

    #[test]
    fn ball_center_pixel_matches_sphere_heightfield() {
        let ball = catalog_standard()[1];
        let img = render_object(&ball, Orientation::Upright);
        // independent oracle: mean of the analytic sphere cap over the pixel's subsamples
        let r = 0.025;
        let window = 1.2 * 0.05;
        let px = window / 32.0;
        let mut acc = 0.0;
        for sr in 0..4 {
            for sc in 0..4 {
                let x = -window / 2.0 + 16.0 * px + (sc as f64 + 0.5) * px / 4.0;
                let y = -window / 2.0 + 16.0 * px + (sr as f64 + 0.5) * px / 4.0;
                let top = r + (r * r - x * x - y * y).sqrt();
                acc += 1.0 - top;
            }
        }
        let oracle = acc / 16.0;
        let got = img.pixels[center_index()];
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        assert!((got - 0.95).abs() < 2e-4);
    }

    #[test]
    fn upright_cup_shows_cavity_floor() {
        let cup = catalog_standard()[12];
        let img = render_object(&cup, Orientation::Upright);
        assert!((img.pixels[center_index()] - (1.0 - cup.wall_thickness)).abs() < 1e-12);
        let inv = render_object(&cup, Orientation::Inverted);
        assert!((inv.pixels[center_index()] - (1.0 - cup.height)).abs() < 1e-12);
    }

    #[test]
    fn corners_are_background() {
        for spec in catalog_standard() {
            for o in Orientation::ALL {
                let img = render_object(&spec, o);
                assert_eq!(img.pixels[0], 1.0);
                assert_eq!(img.pixels[PIXELS - 1], 1.0);
                assert_eq!(img.d_max, 1.0);
                assert!(img.pixels.iter().all(|&p| p > 0.0 && p <= 1.0));
            }
        }
    }

    #[test]
    fn convex_objects_render_orientation_independent() {
        for spec in catalog_standard() {
            if matches!(spec.kind, ObjectKind::Ball | ObjectKind::Cube | ObjectKind::Ring) {
                assert_eq!(render_object(&spec, Orientation::Upright), render_object(&spec, Orientation::Inverted));
            }
        }
    }

    #[test]
    fn depth_span_matches_height() {
        for spec in catalog_standard() {
            for o in Orientation::ALL {
                let img = render_object(&spec, o);
                let quantum = 0.002;
                assert!(((img.d_max - img.d_min) - spec.height).abs() <= quantum, "{:?} {:?}", spec.kind, o);
            }
        }
    }

    #[test]
    fn normalization_rules() {
        let flat = DepthImage::from_pixels(vec![0.7; PIXELS]);
        let n = normalize(&flat);
        assert!(n.values.iter().all(|&v| v == 0.0));
        assert_eq!(n.d_min, n.d_max);

        let ball = render_object(&catalog_standard()[1], Orientation::Upright);
        let n = normalize(&ball);
        let maxv = n.values.iter().copied().fold(0.0, f64::max);
        assert_eq!(maxv, 1.0);
        for (a, b) in n.denormalize().iter().zip(&ball.pixels) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = catalog_standard()[7];
        assert_eq!(render_object(&spec, Orientation::Upright), render_object(&spec, Orientation::Upright));
    }
}
