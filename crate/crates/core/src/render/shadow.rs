//! Shadow rays against the depth mesh, and boundary inpainting.
//!
//! Near occlusion boundaries the single-view mesh is unreliable, so values
//! inside the boundary mask are replaced by an edge-aware harmonic
//! interpolation of the values around it. Outside the mask the ray-traced
//! visibility is kept as is. This is a deterministic stand-in for a learned
//! shadow denoiser.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::light::Light;
use crate::math::V3;
use crate::scene::{Raster, Scene};

use super::direct::MIN_DISTANCE;
use super::mesh::DepthMesh;
use super::rng::{pixel_rng, signed, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowOptions {
    pub spp: usize,
    /// Ray origin offset along the normal, relative to the mean depth.
    pub eps_rel: f64,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        ShadowOptions {
            spp: 64,
            eps_rel: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowBuffer {
    /// Unoccluded fraction per pixel.
    pub s: Raster,
    /// Occlusion-boundary mask the values were computed with.
    pub boundary: Raster,
}

/// Fraction of shadow rays from each pixel that reach light-surface samples.
///
/// Triangles incident to the shading pixel and triangles touching
/// `light_mask` (the light's own pixels) never occlude.
pub fn shadow_raster(
    scene: &Scene,
    mesh: &DepthMesh,
    light: &Light,
    light_mask: Option<&Raster>,
    opts: &ShadowOptions,
    seed: u64,
    salt: u64,
) -> Result<ShadowBuffer> {
    if opts.spp == 0 {
        return Err(Error::invalid("shadow.spp", "must be at least 1"));
    }
    if !light.enabled() {
        return Err(Error::DisabledLight(light.kind().into()));
    }
    let eps = opts.eps_rel * scene.mean_depth();
    let bvh = mesh.bvh();
    let values: Vec<f64> = (0..scene.pixel_count())
        .into_par_iter()
        .map(|p| {
            let origin = scene.point(p) + scene.normal_at(p) * eps;
            let mut rng = pixel_rng(seed, salt, Stream::Shadow, p);
            let reject = |t: u32| mesh.incident(t, p) || light_mask.is_some_and(|m| mesh.touches(t, m));
            let mut lit = 0usize;
            for _ in 0..opts.spp {
                let (u, v, sel) = (signed(&mut rng), signed(&mut rng), rng.gen::<f64>());
                let q = light.sample_for_estimator(u, v, sel).q;
                let to_q = q - origin;
                let dist = to_q.norm();
                if dist < MIN_DISTANCE || !bvh.occluded(origin, to_q / dist, 0.0, dist * (1.0 - 1e-9), &reject) {
                    lit += 1;
                }
            }
            lit as f64 / opts.spp as f64
        })
        .collect();
    Ok(ShadowBuffer {
        s: Raster::from_scalar(scene.width(), scene.height(), &values),
        boundary: mesh.boundary.clone(),
    })
}

/// Log-depth scale over which diffusion weights decay.
const DEPTH_SIGMA: f64 = 0.05;
const WEIGHT_FLOOR: f64 = 1e-6;
const MAX_SWEEPS: usize = 20_000;
const TOLERANCE: f64 = 1e-7;

fn edge_weight(depth: &Raster, normal: &Raster, a: usize, b: usize) -> f64 {
    let dl = ((depth.at(a, 0) as f64).ln() - (depth.at(b, 0) as f64).ln()).abs();
    let na: V3 = normal.vec3(a);
    let nb: V3 = normal.vec3(b);
    let align = na.dot(nb).max(0.0);
    ((-dl / DEPTH_SIGMA).exp() * align).max(WEIGHT_FLOOR)
}

/// `S = M S_fill + (1 - M) S_init`, where `S_fill` solves the weighted
/// Laplace equation inside the mask with `S_init` as boundary values.
pub fn inpaint_shadow(s_init: &Raster, mask: &Raster, depth: &Raster, normal: &Raster) -> Result<Raster> {
    let (w, h) = (s_init.width(), s_init.height());
    mask.check_shape("shadow.boundary", w, h, 1)?;
    depth.check_shape("depth", w, h, 1)?;
    normal.check_shape("normal", w, h, 3)?;
    let unknown = mask.mask_pixels();
    if unknown.is_empty() {
        return Ok(s_init.clone());
    }
    if unknown.len() == w * h {
        return Err(Error::MaskCoversImage);
    }
    let known_mean = {
        let (mut sum, mut n) = (0.0, 0usize);
        for p in 0..w * h {
            if !mask.is_mask_set(p) {
                sum += s_init.at(p, 0) as f64;
                n += 1;
            }
        }
        sum / n as f64
    };
    let mut s: Vec<f64> = s_init.data().iter().map(|&v| v as f64).collect();
    for &p in &unknown {
        s[p] = known_mean;
    }
    // neighbor lists with weights, built once
    let stencil: Vec<Vec<(usize, f64)>> = unknown
        .iter()
        .map(|&p| {
            let (r, c) = (p / w, p % w);
            let mut nb = Vec::with_capacity(4);
            if r > 0 {
                nb.push(p - w);
            }
            if r + 1 < h {
                nb.push(p + w);
            }
            if c > 0 {
                nb.push(p - 1);
            }
            if c + 1 < w {
                nb.push(p + 1);
            }
            nb.into_iter().map(|q| (q, edge_weight(depth, normal, p, q))).collect()
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        for (k, &p) in unknown.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for &(q, wq) in &stencil[k] {
                num += wq * s[q];
                den += wq;
            }
            let v = num / den;
            delta = delta.max((v - s[p]).abs());
            s[p] = v;
        }
        if delta < TOLERANCE {
            break;
        }
    }
    let mut out = s_init.clone();
    for &p in &unknown {
        out.data_mut()[p] = s[p].clamp(0.0, 1.0) as f32;
    }
    Ok(out)
}
