#![allow(dead_code)]

use lumiedit_core::light::{Light, LightDesc};
use lumiedit_core::math::{Real, V3};
use lumiedit_core::optimize::{LightChart, Objective};
use lumiedit_core::render::direct::{direct_pixels, DirectOptions, Strategy};
use lumiedit_core::render::rng;
use lumiedit_core::scene::CameraIntrinsics;
use lumiedit_core::synth::{raycast, Shape, Surface, SynthScene};
use lumiedit_core::Result;

pub fn json_light(v: serde_json::Value) -> LightDesc {
    serde_json::from_value(v).unwrap()
}

/// Open-front room with a table-like block, lit by a box lamp near the
/// ceiling.
pub fn lamp_room(width: usize, height: usize) -> SynthScene {
    let cam = CameraIntrinsics::new(1.2, width, height).unwrap();
    let plane = |p: V3, n: V3, a: f64| Surface::new(Shape::Plane { p, n }, [a, a * 0.9, a * 0.8]);
    let mut s = raycast(
        cam,
        &[
            plane(V3::new(0.0, 0.0, -4.0), V3::Z, 0.7),
            plane(V3::new(0.0, -1.0, 0.0), V3::Y, 0.5),
            plane(V3::new(0.0, 1.5, 0.0), -V3::Y, 0.8),
            plane(V3::new(-2.0, 0.0, 0.0), V3::X, 0.6),
            plane(V3::new(2.0, 0.0, 0.0), -V3::X, 0.6),
            Surface::new(
                Shape::Cuboid {
                    c: V3::new(0.4, -0.7, -2.6),
                    axes: [V3::X * 0.8, V3::Y * 0.6, V3::Z * 0.7],
                },
                [0.75; 3],
            ),
        ],
    )
    .unwrap();
    s.scene.lights.push(json_light(serde_json::json!({
        "id": "lamp", "type": "box_lamp", "c": [-0.4, 1.1, -2.2],
        "x": [0.4, 0, 0], "y": [0, 0.1, 0], "z": [0, 0, 0.4], "w": [2.0, 1.8, 1.5]
    })));
    s
}

/// A loss over one light's chart: mean squared difference of its direct
/// shading from `target` with a frozen sample pattern.
pub struct ShadingLoss<'a> {
    pub scene: &'a lumiedit_core::scene::Scene,
    pub chart: LightChart,
    pub strategy: Strategy,
    pub spp: usize,
    pub seed: u64,
    pub target: Vec<[f64; 3]>,
}

impl<'a> ShadingLoss<'a> {
    pub fn new(scene: &'a lumiedit_core::scene::Scene, id: &str, strategy: Strategy, spp: usize) -> Self {
        let desc = scene.light(id).unwrap();
        let light = desc.build(scene).unwrap();
        let base = match light {
            Light::Surfel(_) => Some((desc.lamp_base(scene).unwrap().0, scene.options.reflection)),
            _ => None,
        };
        let chart = LightChart::new(id, &light, base).unwrap();
        ShadingLoss {
            scene,
            chart,
            strategy,
            spp,
            seed: 17,
            target: vec![[0.05; 3]; scene.pixel_count()],
        }
    }
}

impl Objective for ShadingLoss<'_> {
    fn eval<T: Real>(&self, x: &[T], _: usize) -> Result<T> {
        let light = self.chart.unpack(x)?;
        let px = direct_pixels(self.scene, &light, self.strategy, &DirectOptions::new(self.spp, self.seed), rng::salt("l"))?;
        let mut sum = T::zero();
        for (e, t) in px.iter().zip(&self.target) {
            for c in 0..3 {
                let r = e[c] - t[c];
                sum += r * r;
            }
        }
        Ok(sum / (3 * px.len()) as f64)
    }
}

/// Render settings for coarse test rasters: at a few dozen pixels across,
/// neighboring depths on grazing walls differ by more than the default
/// discontinuity threshold.
pub fn coarse_config(spp: usize, seed: u64) -> lumiedit_core::render::RenderConfig {
    lumiedit_core::render::RenderConfig {
        spp,
        seed,
        mesh: lumiedit_core::render::MeshOptions { tau_rel: 0.3, dilation: 1 },
        ..Default::default()
    }
}
