//! Analytic test scenes: planes, rectangles and boxes ray-cast into
//! depth, normal and albedo rasters.

use crate::error::{Error, Result};
use crate::math::{Rgb, V3};
use crate::scene::{CameraIntrinsics, LightMask, Raster, Scene};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Infinite plane through `p` with normal `n`.
    Plane { p: V3, n: V3 },
    /// Rectangle `c + a x + b y` with `|a|, |b| <= 1/2`.
    Rect { c: V3, x: V3, y: V3 },
    /// Box with center `c` and full-length edge vectors `axes`.
    Cuboid { c: V3, axes: [V3; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surface {
    pub shape: Shape,
    pub albedo: Rgb<f64>,
}

impl Surface {
    pub fn new(shape: Shape, albedo: Rgb<f64>) -> Self {
        Surface { shape, albedo }
    }
}

fn hit_rect(o: V3, d: V3, c: V3, x: V3, y: V3) -> Option<(f64, V3)> {
    let n = x.cross(y);
    let den = n.dot(d);
    if den.abs() < 1e-300 {
        return None;
    }
    let t = n.dot(c - o) / den;
    if t <= 0.0 {
        return None;
    }
    let h = o + d * t - c;
    let (a, b) = (h.dot(x) / x.norm2(), h.dot(y) / y.norm2());
    (a.abs() <= 0.5 && b.abs() <= 0.5).then(|| (t, n.normalize()))
}

impl Shape {
    /// Nearest hit distance and (unoriented) normal.
    pub fn intersect(&self, o: V3, d: V3) -> Option<(f64, V3)> {
        match *self {
            Shape::Plane { p, n } => {
                let den = n.dot(d);
                if den.abs() < 1e-300 {
                    return None;
                }
                let t = n.dot(p - o) / den;
                (t > 0.0).then(|| (t, n.normalize()))
            }
            Shape::Rect { c, x, y } => hit_rect(o, d, c, x, y),
            Shape::Cuboid { c, axes } => {
                let mut best: Option<(f64, V3)> = None;
                for a in 0..3 {
                    let (b, e) = ((a + 1) % 3, (a + 2) % 3);
                    for s in [0.5, -0.5] {
                        if let Some(h) = hit_rect(o, d, c + axes[a] * s, axes[b], axes[e]) {
                            if best.is_none_or(|(t, _)| h.0 < t) {
                                best = Some(h);
                            }
                        }
                    }
                }
                best
            }
        }
    }
}

/// Ray-cast scene together with the surface index seen by each pixel.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub scene: Scene,
    pub hit: Vec<usize>,
}

impl SynthScene {
    /// Binary mask of the pixels showing surface `i`.
    pub fn mask(&self, i: usize) -> Raster {
        let (w, h) = (self.scene.width(), self.scene.height());
        Raster::from_fn(w, h, 1, |r, c, _| (self.hit[r * w + c] == i) as u8 as f32)
    }

    pub fn add_mask(&mut self, light_id: &str, surface: usize) {
        let mask = self.mask(surface);
        self.scene.masks.push(LightMask {
            light_id: light_id.into(),
            mask,
        });
    }
}

/// Casts one ray per pixel center; every pixel must hit some surface.
/// Normals are flipped to face the camera.
pub fn raycast(camera: CameraIntrinsics, surfaces: &[Surface]) -> Result<SynthScene> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let mut depth = Vec::with_capacity(w * h);
    let mut normal = Vec::with_capacity(w * h);
    let mut albedo = Vec::with_capacity(w * h);
    let mut hit = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let ray = camera.ray(r, c);
            let d = ray.normalize();
            let mut best: Option<(f64, V3, usize)> = None;
            for (i, s) in surfaces.iter().enumerate() {
                if let Some((t, n)) = s.shape.intersect(V3::zero(), d) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, n, i));
                    }
                }
            }
            let (t, n, i) = best.ok_or_else(|| Error::Degenerate(format!("pixel ({r}, {c}) hits no surface")))?;
            // depth is the distance along -z, the ray has unit z extent
            let z = t * d.z.abs();
            depth.push(z);
            let n = if n.dot(d) > 0.0 { -n } else { n };
            normal.push(n.to_array());
            albedo.push(surfaces[i].albedo);
            hit.push(i);
        }
    }
    let scene = Scene::from_rasters(
        camera,
        Raster::from_scalar(w, h, &depth),
        Raster::from_rgb(w, h, &normal),
        Raster::from_rgb(w, h, &albedo),
    )?;
    Ok(SynthScene { scene, hit })
}

/// Closed box room `[-hw, hw] x [floor, ceil] x [-depth, near]` seen from
/// the origin, all surfaces with albedo `albedo`.
pub fn room(camera: CameraIntrinsics, albedo: Rgb<f64>) -> Result<SynthScene> {
    let (hw, floor, ceil, back, near) = (2.0, -1.0, 1.5, -4.0, 1.0);
    let plane = |p: V3, n: V3| Surface::new(Shape::Plane { p, n }, albedo);
    let walls = [
        plane(V3::new(0.0, 0.0, back), V3::Z),
        plane(V3::new(0.0, floor, 0.0), V3::Y),
        plane(V3::new(0.0, ceil, 0.0), -V3::Y),
        plane(V3::new(-hw, 0.0, 0.0), V3::X),
        plane(V3::new(hw, 0.0, 0.0), -V3::X),
        plane(V3::new(0.0, 0.0, near), -V3::Z),
    ];
    raycast(camera, &walls)
}
