//! One-bounce indirect shading.
//!
//! A physically based stand-in for a learned screen-space predictor: every
//! pixel gathers the diffusely reflected direct light `A(q) E_d(q) / pi` of
//! `n_gather` pixels drawn uniformly over the image, weighted by the
//! point-to-patch form factor and mesh visibility. The sample pattern and
//! visibility do not depend on `E_d`, so the gather is a fixed sparse linear
//! operator, built once and applied to any direct shading (including jets).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{rgb_add, rgb_zero, Real, Rgb};
use crate::scene::{Raster, Scene};

use super::mesh::DepthMesh;
use super::rng::{pixel_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatherOptions {
    pub n_gather: usize,
    /// Ray origin offset along the normal, relative to the mean depth.
    pub eps_rel: f64,
}

impl Default for GatherOptions {
    fn default() -> Self {
        GatherOptions {
            n_gather: 64,
            eps_rel: 1e-3,
        }
    }
}

/// Sparse rows `E_ind(p) = sum_k weight_k A(q_k) E_d(q_k)`.
#[derive(Clone, Debug)]
pub struct GatherOperator {
    width: usize,
    height: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl GatherOperator {
    pub fn build(scene: &Scene, mesh: &DepthMesh, opts: &GatherOptions, seed: u64) -> Result<Self> {
        if opts.n_gather == 0 {
            return Err(Error::invalid("indirect.n_gather", "must be at least 1"));
        }
        let n_px = scene.pixel_count();
        let eps = opts.eps_rel * scene.mean_depth();
        let bvh = mesh.bvh();
        let points: Vec<_> = (0..n_px).map(|p| scene.point(p)).collect();
        let normals: Vec<_> = (0..n_px).map(|p| scene.normal_at(p)).collect();
        let areas: Vec<f64> = (0..n_px).map(|p| scene.footprint(p).area).collect();
        let scale = n_px as f64 / (opts.n_gather as f64 * std::f64::consts::PI);
        let rows = (0..n_px)
            .into_par_iter()
            .map(|p| {
                let mut rng = pixel_rng(seed, 0, Stream::Gather, p);
                let mut row = Vec::new();
                for _ in 0..opts.n_gather {
                    let q = rng.gen_range(0..n_px);
                    if q == p {
                        continue;
                    }
                    let d = points[q] - points[p];
                    let r2 = d.norm2();
                    let r = r2.sqrt();
                    let l = d * (1.0 / r);
                    let cos_p = normals[p].dot(l);
                    let cos_q = -normals[q].dot(l);
                    if cos_p <= 0.0 || cos_q <= 0.0 {
                        continue;
                    }
                    // clamp the distance at the patch size against the 1/r^2 pole
                    let k = scale * cos_p * cos_q * areas[q] / r2.max(areas[q]);
                    let o = points[p] + normals[p] * eps;
                    let target = points[q] + normals[q] * eps;
                    let to = target - o;
                    let dist = to.norm();
                    let reject = |t: u32| mesh.incident(t, p) || mesh.incident(t, q);
                    if bvh.occluded(o, to * (1.0 / dist), 0.0, dist * (1.0 - 1e-9), &reject) {
                        continue;
                    }
                    row.push((q as u32, k));
                }
                row
            })
            .collect();
        Ok(GatherOperator {
            width: scene.width(),
            height: scene.height(),
            rows,
        })
    }

    /// Applies the operator to per-pixel direct shading with albedo `albedo`.
    pub fn apply<T: Real>(&self, albedo: &Raster, e_d: &[Rgb<T>]) -> Vec<Rgb<T>> {
        assert_eq!(e_d.len(), self.width * self.height);
        self.rows
            .par_iter()
            .map(|row| {
                let mut acc = rgb_zero();
                for &(q, k) in row {
                    let a = albedo.rgb(q as usize);
                    let e = e_d[q as usize];
                    acc = rgb_add(acc, [e[0] * (k * a[0]), e[1] * (k * a[1]), e[2] * (k * a[2])]);
                }
                acc
            })
            .collect()
    }

    pub fn apply_raster(&self, albedo: &Raster, e_d: &Raster) -> Raster {
        let px: Vec<Rgb<f64>> = (0..e_d.pixel_count()).map(|p| e_d.rgb(p)).collect();
        Raster::from_rgb(self.width, self.height, &self.apply(albedo, &px))
    }

    /// Total number of retained gather links.
    pub fn links(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// `E_ind` for the direct shading `e_d`.
pub fn indirect_one_bounce(
    scene: &Scene,
    mesh: &DepthMesh,
    e_d: &Raster,
    opts: &GatherOptions,
    seed: u64,
) -> Result<Raster> {
    e_d.check_shape("e_d", scene.width(), scene.height(), 3)?;
    let op = GatherOperator::build(scene, mesh, opts, seed)?;
    Ok(op.apply_raster(&scene.albedo, e_d))
}
