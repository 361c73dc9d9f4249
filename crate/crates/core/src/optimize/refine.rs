//! Refinement of light parameters against the input photograph.
//!
//! The loss is the mean of `(min(E A, 1) - I)^2` over pixels and channels,
//! with `E = sum_j E_j S_j + G(A E_d)`. Shadow buffers `S_j` and the gather
//! operator `G` are computed once at the initial lights and held fixed;
//! `E_j` is re-rendered with jets every iteration.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::light::{Light, LightDesc};
use crate::math::{Real, Rgb};
use crate::render::direct::{direct_pixels, DirectOptions, Strategy};
use crate::render::{
    enabled_lights, inpaint_shadow, rng, shadow_raster, DepthMesh, GatherOperator, RenderConfig,
};
use crate::scene::{Raster, Scene};

use super::grad::Objective;
use super::params::LightChart;
use super::{minimize, LossHistory, Observer, OptimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    /// Strategy, shadow, mesh and gather settings; `spp` and `seed` come from
    /// the optimizer config.
    pub render: RenderConfig,
    /// Optimize centers, orientations and sizes, not only radiance.
    pub geometry: bool,
    /// Let the sun direction of windows move.
    pub sun_direction: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            render: RenderConfig::default(),
            geometry: true,
            sun_direction: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    /// The scene's light list with refined parameters.
    pub lights: Vec<LightDesc>,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: LossHistory,
}

struct Charted {
    id: String,
    salt: u64,
    chart: LightChart,
    range: Range<usize>,
    strategy: Strategy,
    shadow: Option<Vec<f64>>,
}

struct RenderLoss<'a> {
    scene: &'a Scene,
    lights: Vec<Charted>,
    gather: Option<GatherOperator>,
    image: Vec<Rgb<f64>>,
    albedo: Vec<Rgb<f64>>,
    cfg: &'a OptimConfig,
    heuristic: crate::render::direct::MisHeuristic,
}

impl RenderLoss<'_> {
    fn shading<T: Real>(&self, x: &[T], iteration: usize) -> Result<Vec<Rgb<T>>> {
        let opts = DirectOptions {
            spp: self.cfg.spp,
            seed: self.cfg.seed_at(iteration),
            heuristic: self.heuristic,
        };
        let mut e_d = vec![[T::zero(); 3]; self.scene.pixel_count()];
        for l in &self.lights {
            let light = l.chart.unpack(&x[l.range.clone()])?;
            let px = direct_pixels(self.scene, &light, l.strategy, &opts, l.salt)?;
            for (p, (acc, e)) in e_d.iter_mut().zip(px).enumerate() {
                let s = l.shadow.as_ref().map_or(1.0, |s| s[p]);
                for c in 0..3 {
                    acc[c] += e[c] * s;
                }
            }
        }
        Ok(match &self.gather {
            Some(g) => {
                let e_ind = g.apply(&self.scene.albedo, &e_d);
                e_d.iter()
                    .zip(e_ind)
                    .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
                    .collect()
            }
            None => e_d,
        })
    }
}

impl Objective for RenderLoss<'_> {
    fn eval<T: Real>(&self, x: &[T], iteration: usize) -> Result<T> {
        let e = self.shading(x, iteration)?;
        let mut sum = T::zero();
        for ((e, a), i) in e.iter().zip(&self.albedo).zip(&self.image) {
            for c in 0..3 {
                let r = (e[c] * a[c]).min_c(1.0) - i[c];
                sum += r * r;
            }
        }
        Ok(sum / (3 * self.image.len()).max(1) as f64)
    }
}

fn check_image(scene: &Scene, image: &Raster) -> Result<()> {
    image.check_shape("image", scene.width(), scene.height(), 3)?;
    for (i, &v) in image.data().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                field: "image".into(),
                index: i,
            });
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange {
                param: format!("image[{i}]"),
                value: v as f64,
                range: "[0, 1]".into(),
            });
        }
    }
    // where the albedo is non-zero, a fully white image is matched by any
    // light bright enough and constrains nothing
    let informative = (0..scene.pixel_count())
        .any(|p| (0..3).any(|c| scene.albedo.at(p, c) > 0.0 && image.at(p, c) < 1.0));
    if !informative {
        return Err(Error::Saturated("input image is saturated everywhere".into()));
    }
    Ok(())
}

/// Adam refinement of every enabled light's continuous parameters against
/// the clamped diffuse re-render. Returns the best parameters seen, never
/// worse than the initial ones.
pub fn refine_lights(
    scene: &Scene,
    image: &Raster,
    cfg: &OptimConfig,
    opts: &RefineOptions,
    progress: impl Observer,
) -> Result<RefineResult> {
    cfg.validate()?;
    check_image(scene, image)?;
    let rc = &opts.render;
    let lights = enabled_lights(scene)?;
    if lights.is_empty() {
        return Err(Error::invalid("lights", "no enabled light to refine"));
    }
    let needs_mesh = rc.components.shadow || rc.components.indirect;
    let mesh = needs_mesh.then(|| DepthMesh::build(scene, &rc.mesh));
    let mut charted = Vec::with_capacity(lights.len());
    let mut names = Vec::new();
    let mut x0 = Vec::new();
    let mut free = Vec::new();
    for (id, light, mask) in &lights {
        let desc = scene.light(id).ok_or_else(|| Error::UnknownLight(id.clone()))?;
        let base = match light {
            Light::Surfel(_) => Some((desc.lamp_base(scene)?.0, scene.options.reflection)),
            _ => None,
        };
        let chart = LightChart::new(id, light, base)?;
        let start = x0.len();
        let geometry = chart.geometry_indices();
        let sun = chart.sun_direction_indices();
        for i in 0..chart.len() {
            let frozen = (!opts.geometry && geometry.contains(&i)) || (!opts.sun_direction && sun.contains(&i));
            if !frozen {
                free.push(start + i);
            }
        }
        names.extend(chart.names().iter().cloned());
        x0.extend_from_slice(chart.initial());
        let salt = rng::salt(id);
        let shadow = match (&mesh, rc.components.shadow) {
            (Some(mesh), true) => {
                let buf = shadow_raster(scene, mesh, light, mask.as_ref(), &rc.shadow, cfg.seed, salt)?;
                let s = if rc.inpaint {
                    inpaint_shadow(&buf.s, &buf.boundary, &scene.depth, &scene.normal)?
                } else {
                    buf.s
                };
                Some(s.data().iter().map(|&v| v as f64).collect())
            }
            _ => None,
        };
        let strategy = match (rc.strategy, light) {
            (Strategy::Angular, l) if !matches!(l, Light::Window(_)) => Strategy::Area,
            (s, _) => s,
        };
        charted.push(Charted {
            id: id.clone(),
            salt,
            range: start..x0.len(),
            chart,
            strategy,
            shadow,
        });
    }
    let gather = match (&mesh, rc.components.indirect) {
        (Some(mesh), true) => Some(GatherOperator::build(scene, mesh, &rc.gather, cfg.seed)?),
        _ => None,
    };
    let n = scene.pixel_count();
    let objective = RenderLoss {
        scene,
        lights: charted,
        gather,
        image: (0..n).map(|p| image.rgb(p)).collect(),
        albedo: (0..n).map(|p| scene.albedo.rgb(p)).collect(),
        cfg,
        heuristic: rc.heuristic,
    };
    let check = |loss: f64, g: &[f64]| {
        if loss > 0.0 && free.iter().all(|&i| g[i] == 0.0) {
            Err(Error::Saturated("min(EA, 1) is clamped at every pixel".into()))
        } else {
            Ok(())
        }
    };
    let project = |x: &mut [f64]| {
        for l in &objective.lights {
            l.chart.project(&mut x[l.range.clone()]);
        }
    };
    let r = minimize(&objective, &x0, &free, &names, cfg, "render", project, check, progress)?;
    let mut descs = scene.lights.clone();
    for l in &objective.lights {
        let light = l.chart.unpack::<f64>(&r.x[l.range.clone()])?;
        if let Some(d) = descs.iter_mut().find(|d| d.id() == l.id) {
            *d = d.with_light(&light);
        }
    }
    Ok(RefineResult {
        lights: descs,
        initial_loss: r.initial_loss,
        best_loss: r.best_loss,
        iterations: r.iterations,
        converged: r.converged,
        history: r.history,
    })
}
