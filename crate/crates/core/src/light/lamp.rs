//! Visible-lamp reconstruction from a mask and initial light centers.
//!
//! The observed lamp surface is a set of pixel plates. The hidden back side
//! is obtained by mirroring every plate across the plane through the lamp
//! center perpendicular to the center's camera ray,
//! `q^ = 2 (c - (q.d) d) + q` with `d = c / |c|`, and the boundary strip is
//! closed with one edge plate per mask-boundary pixel at the midpoint of
//! each visible/mirrored pair.

use crate::error::{Error, Result};
use crate::math::{Real, Rgb, V3};
use crate::scene::{inner_edge, outer_ring, Raster, Scene};

use super::{Surfel, SurfelLamp, SurfelTag};

/// How hidden lamp surfels are derived from visible ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionMode {
    /// Mirror across the plane through `c` normal to the camera ray of `c`.
    #[default]
    Plane,
    /// Point reflection `q^ = 2c - q`; no edge strip is generated.
    Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct BaseSurfel {
    q: V3,
    n: V3,
    area: f64,
    /// Pixel side length at the surfel's depth.
    side: f64,
    edge: bool,
}

/// Parameter-independent part of a visible lamp: the observed plates.
#[derive(Clone, Debug, PartialEq)]
pub struct LampBase {
    visible: Vec<BaseSurfel>,
}

pub fn mirror_point<T: Real>(q: V3<T>, c: V3<T>, mode: ReflectionMode) -> V3<T> {
    match mode {
        ReflectionMode::Plane => {
            let d = c.normalize();
            (c - d.scale(q.dot(d))).scale(T::cst(2.0)) + q
        }
        ReflectionMode::Point => c.scale(T::cst(2.0)) - q,
    }
}

pub fn mirror_normal<T: Real>(n: V3<T>, c: V3<T>, mode: ReflectionMode) -> V3<T> {
    match mode {
        ReflectionMode::Plane => {
            let d = c.normalize();
            n - d.scale(n.dot(d) * 2.0)
        }
        ReflectionMode::Point => -n,
    }
}

impl LampBase {
    pub fn from_mask(scene: &Scene, mask: &Raster, light_id: &str) -> Result<Self> {
        mask.check_shape(&format!("masks[{light_id}]"), scene.camera.width, scene.camera.height, 1)?;
        let pixels = mask.mask_pixels();
        if pixels.is_empty() {
            return Err(Error::EmptyMask {
                light_id: light_id.into(),
            });
        }
        let edge = inner_edge(mask);
        let visible = pixels
            .into_iter()
            .map(|p| BaseSurfel {
                q: scene.point(p),
                n: scene.normal_at(p),
                area: scene.footprint(p).area,
                side: scene.pixel_side(p),
                edge: edge.is_mask_set(p),
            })
            .collect();
        Ok(LampBase { visible })
    }

    pub fn visible_count(&self) -> usize {
        self.visible.len()
    }

    pub fn edge_count(&self) -> usize {
        self.visible.iter().filter(|s| s.edge).count()
    }

    /// Builds the full surfel set for center `c`.
    pub fn instantiate<T: Real>(
        &self,
        c: V3<T>,
        w: Rgb<T>,
        enabled: bool,
        mode: ReflectionMode,
    ) -> Result<SurfelLamp<T>> {
        let cv = c.value();
        if !cv.is_finite() || cv.norm() < 1e-12 {
            return Err(Error::Degenerate("lamp center at the camera origin".into()));
        }
        if self.visible.iter().any(|s| (s.q - cv).norm() < 1e-9) {
            return Err(Error::Degenerate("lamp center coincides with a visible point".into()));
        }
        let n_edge = if mode == ReflectionMode::Plane { self.edge_count() } else { 0 };
        let mut surfels = Vec::with_capacity(2 * self.visible.len() + n_edge);
        let mut weights = Vec::with_capacity(surfels.capacity());
        for s in &self.visible {
            surfels.push(Surfel {
                q: V3::from_f64(s.q),
                n: V3::from_f64(s.n),
                area: T::cst(s.area),
                tag: SurfelTag::Visible,
            });
            weights.push(s.area);
        }
        for s in &self.visible {
            let q = V3::from_f64(s.q);
            surfels.push(Surfel {
                q: mirror_point(q, c, mode),
                n: mirror_normal(V3::from_f64(s.n), c, mode),
                area: T::cst(s.area),
                tag: SurfelTag::Mirrored,
            });
            weights.push(s.area);
        }
        if mode == ReflectionMode::Plane {
            for s in self.visible.iter().filter(|s| s.edge) {
                let q = V3::from_f64(s.q);
                let mirrored = mirror_point(q, c, mode);
                let mid = (q + mirrored) * 0.5;
                let outward = mid - c;
                // a plate on the center's own ray has no outward direction;
                // it keeps the observed normal
                let n = if outward.norm().value() > 1e-12 {
                    outward.normalize()
                } else {
                    V3::from_f64(s.n)
                };
                surfels.push(Surfel {
                    q: mid,
                    n,
                    area: (q - mirrored).norm() * s.side,
                    tag: SurfelTag::Edge,
                });
                weights.push(s.area);
            }
        }
        Ok(SurfelLamp::new(c, surfels, &weights, w, enabled))
    }
}

/// Builds a visible lamp from its mask with center `c` and intensity `w`.
pub fn build_visible_lamp(scene: &Scene, mask: &Raster, c: V3, w: Rgb<f64>) -> Result<SurfelLamp> {
    LampBase::from_mask(scene, mask, "lamp")?.instantiate(c, w, true, scene.options.reflection)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterKind {
    Window,
    Lamp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCenter {
    pub c: V3,
    /// Set when the window's dilation ring was empty and the mask's own
    /// depth was used instead.
    pub ring_fallback: bool,
}

/// Initial center: mean image-plane ray `[X, Y, -1]` over the mask, scaled by
/// the mean depth over the 7-pixel outer ring (windows) or the mask (lamps).
pub fn initial_center(scene: &Scene, mask: &Raster, kind: CenterKind) -> Result<InitialCenter> {
    let pixels = mask.mask_pixels();
    if pixels.is_empty() {
        return Err(Error::EmptyMask {
            light_id: "initial_center".into(),
        });
    }
    let w = scene.camera.width;
    let mut ray = V3::zero();
    for &p in &pixels {
        ray += scene.camera.ray(p / w, p % w);
    }
    let ray = ray / pixels.len() as f64;
    let mean_depth = |px: &[usize]| px.iter().map(|&p| scene.depth.at(p, 0) as f64).sum::<f64>() / px.len() as f64;
    let (depth, ring_fallback) = match kind {
        CenterKind::Lamp => (mean_depth(&pixels), false),
        CenterKind::Window => {
            let ring = outer_ring(mask, 7).mask_pixels();
            if ring.is_empty() {
                (mean_depth(&pixels), true)
            } else {
                (mean_depth(&ring), false)
            }
        }
    };
    Ok(InitialCenter {
        c: ray.scale(depth),
        ring_fallback,
    })
}
