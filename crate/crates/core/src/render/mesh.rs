//! Triangle mesh from the depth map.
//!
//! Vertices are the unprojected pixel centers. Each 2x2 block of pixels
//! gives two triangles, and a triangle is dropped when the log-depths of its
//! vertices differ by more than `tau_rel`. Pixels touching a dropped
//! triangle, dilated by `dilation`, form the occlusion-boundary mask.

use serde::{Deserialize, Serialize};

use crate::math::V3;
use crate::scene::{dilate, Raster, Scene};

use super::bvh::Bvh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshOptions {
    pub tau_rel: f64,
    pub dilation: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            tau_rel: 0.05,
            dilation: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DepthMesh {
    pub width: usize,
    pub height: usize,
    /// One vertex per pixel, row-major.
    pub vertices: Vec<V3>,
    /// Kept triangles as pixel indices.
    pub triangles: Vec<[u32; 3]>,
    /// Dropped triangles as pixel indices.
    pub discarded: Vec<[u32; 3]>,
    /// Occlusion-boundary mask `M_S`.
    pub boundary: Raster,
    bvh: Bvh,
}

impl DepthMesh {
    pub fn build(scene: &Scene, opts: &MeshOptions) -> Self {
        let (w, h) = (scene.width(), scene.height());
        let vertices: Vec<V3> = (0..w * h).map(|p| scene.point(p)).collect();
        let log_d: Vec<f64> = scene.depth.data().iter().map(|&d| (d as f64).ln()).collect();
        let mut triangles = Vec::new();
        let mut discarded = Vec::new();
        for r in 0..h.saturating_sub(1) {
            for c in 0..w.saturating_sub(1) {
                let (a, b) = ((r * w + c) as u32, (r * w + c + 1) as u32);
                let (d, e) = (((r + 1) * w + c) as u32, ((r + 1) * w + c + 1) as u32);
                for tri in [[a, d, b], [d, e, b]] {
                    let ld = tri.map(|i| log_d[i as usize]);
                    let spread = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        - ld.iter().cloned().fold(f64::INFINITY, f64::min);
                    if spread > opts.tau_rel {
                        discarded.push(tri);
                    } else {
                        triangles.push(tri);
                    }
                }
            }
        }
        let mut touched = Raster::zeros(w, h, 1);
        for tri in &discarded {
            for &v in tri {
                touched.data_mut()[v as usize] = 1.0;
            }
        }
        let boundary = dilate(&touched, opts.dilation);
        let bvh = Bvh::new(
            triangles
                .iter()
                .map(|t| t.map(|i| vertices[i as usize]))
                .collect(),
        );
        DepthMesh {
            width: w,
            height: h,
            vertices,
            triangles,
            discarded,
            boundary,
            bvh,
        }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Whether kept triangle `t` has pixel `p` as a vertex.
    pub fn incident(&self, t: u32, p: usize) -> bool {
        self.triangles[t as usize].contains(&(p as u32))
    }

    /// Whether any vertex of kept triangle `t` lies in `mask`.
    pub fn touches(&self, t: u32, mask: &Raster) -> bool {
        self.triangles[t as usize].iter().any(|&v| mask.is_mask_set(v as usize))
    }
}
