//! Rendering: direct shading, shadows, indirect surrogate and composition.
//!
//! ```text
//! E_d = sum_j E_j S_j        E = E_d + E_ind        ldr = min(E A, 1)
//! ```

pub mod bvh;
pub mod direct;
pub mod indirect;
pub mod mesh;
pub mod rng;
pub mod shadow;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use direct::{
    direct_angular, direct_area, direct_mis, direct_pixels, estimate, DirectOptions, MisHeuristic, Receiver, Strategy,
};
pub use indirect::{indirect_one_bounce, GatherOperator, GatherOptions};
pub use mesh::{DepthMesh, MeshOptions};
pub use shadow::{inpaint_shadow, shadow_raster, ShadowBuffer, ShadowOptions};

use crate::error::{Error, Result};
use crate::light::Light;
use crate::math::Rgb;
use crate::scene::{Raster, Scene};

/// Pipeline stages to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub direct: bool,
    pub shadow: bool,
    pub indirect: bool,
}

impl Default for Components {
    fn default() -> Self {
        Components {
            direct: true,
            shadow: true,
            indirect: true,
        }
    }
}

impl Components {
    pub const NONE: Components = Components {
        direct: false,
        shadow: false,
        indirect: false,
    };

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.direct {
            v.push("direct");
        }
        if self.shadow {
            v.push("shadow");
        }
        if self.indirect {
            v.push("indirect");
        }
        v
    }
}

impl FromStr for Components {
    type Err = Error;

    /// Comma-separated subset of `direct,shadow,indirect`.
    fn from_str(s: &str) -> Result<Self> {
        let mut c = Components::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "direct" => c.direct = true,
                "shadow" => c.shadow = true,
                "indirect" => c.indirect = true,
                other => return Err(Error::invalid("components", format!("unknown component {other:?}"))),
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub spp: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub heuristic: MisHeuristic,
    pub components: Components,
    pub mesh: MeshOptions,
    pub shadow: ShadowOptions,
    pub gather: GatherOptions,
    /// Replace shadow values inside the boundary mask by inpainting.
    pub inpaint: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            spp: 64,
            seed: 0,
            strategy: Strategy::Mis,
            heuristic: MisHeuristic::Balance,
            components: Components::default(),
            mesh: MeshOptions::default(),
            shadow: ShadowOptions::default(),
            gather: GatherOptions::default(),
            inpaint: true,
        }
    }
}

impl RenderConfig {
    pub fn direct_options(&self) -> DirectOptions {
        DirectOptions {
            spp: self.spp,
            seed: self.seed,
            heuristic: self.heuristic,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightShading {
    pub id: String,
    /// `E_j`, unshadowed.
    pub e: Raster,
    /// `S_j`; all ones when shadows are off.
    pub s: Raster,
    /// Samples per pixel actually drawn for `E_j`.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadingSet {
    pub lights: Vec<LightShading>,
    pub e_d: Raster,
    pub e_ind: Raster,
    pub e: Raster,
    pub seed: u64,
    pub spp: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub direct_ms: f64,
    pub shadow_ms: f64,
    pub indirect_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLight {
    pub id: String,
    pub kind: String,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub seed: u64,
    pub spp: usize,
    pub strategy: Strategy,
    pub components: Vec<String>,
    pub lights: Vec<ManifestLight>,
    pub timings: Timings,
}

/// Enabled lights of a scene, instantiated, with their stream salts.
pub fn enabled_lights(scene: &Scene) -> Result<Vec<(String, Light, Option<Raster>)>> {
    let mut out = Vec::new();
    for desc in scene.lights.iter().filter(|l| l.enabled()) {
        let light = desc.build(scene)?;
        let mask = desc.mask_id().and_then(|m| scene.mask(m)).cloned();
        out.push((desc.id().to_string(), light, mask));
    }
    Ok(out)
}

/// `E_d = sum_j E_j S_j`, accumulated in f64 in light order.
pub fn compose_direct(width: usize, height: usize, lights: &[LightShading]) -> Raster {
    let mut acc = vec![[0.0f64; 3]; width * height];
    for l in lights {
        for (p, a) in acc.iter_mut().enumerate() {
            let e = l.e.rgb(p);
            let s = l.s.at(p, 0) as f64;
            for c in 0..3 {
                a[c] += e[c] * s;
            }
        }
    }
    Raster::from_rgb(width, height, &acc)
}

pub fn add(a: &Raster, b: &Raster) -> Raster {
    assert!(a.same_shape(b));
    let mut out = a.clone();
    for (x, y) in out.data_mut().iter_mut().zip(b.data()) {
        *x = (*x as f64 + *y as f64) as f32;
    }
    out
}

/// Diffuse re-render `min(E A, 1)`, clamped at zero as well.
pub fn ldr(e: &Raster, albedo: &Raster) -> Raster {
    let px: Vec<Rgb<f64>> = (0..e.pixel_count())
        .map(|p| {
            let (x, a) = (e.rgb(p), albedo.rgb(p));
            [0, 1, 2].map(|c| (x[c] * a[c]).clamp(0.0, 1.0))
        })
        .collect();
    Raster::from_rgb(e.width(), e.height(), &px)
}

pub struct Rendered {
    pub shading: ShadingSet,
    pub ldr: Raster,
    pub manifest: RenderManifest,
}

/// Full pipeline for every enabled light of `scene`.
pub fn render_scene(scene: &Scene, cfg: &RenderConfig) -> Result<Rendered> {
    let t0 = Instant::now();
    let (w, h) = (scene.width(), scene.height());
    let lights = enabled_lights(scene)?;
    let mut timings = Timings::default();
    let needs_mesh = cfg.components.direct && (cfg.components.shadow || cfg.components.indirect);
    let mesh = needs_mesh.then(|| DepthMesh::build(scene, &cfg.mesh));
    let opts = cfg.direct_options();
    let mut shading = Vec::with_capacity(lights.len());
    let mut manifest_lights = Vec::with_capacity(lights.len());
    for (id, light, mask) in &lights {
        let salt = rng::salt(id);
        let strategy = match (cfg.strategy, light) {
            (Strategy::Angular, l) if !matches!(l, Light::Window(_)) => Strategy::Area,
            (s, _) => s,
        };
        let t = Instant::now();
        let (e, samples) = if cfg.components.direct {
            let px = direct_pixels(scene, light, strategy, &opts, salt)?;
            (direct::to_raster(scene, &px), direct::samples_per_pixel(light, strategy, cfg.spp))
        } else {
            (Raster::zeros(w, h, 3), 0)
        };
        timings.direct_ms += t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        let s = match (&mesh, cfg.components.shadow) {
            (Some(mesh), true) => {
                let buf = shadow_raster(scene, mesh, light, mask.as_ref(), &cfg.shadow, cfg.seed, salt)?;
                if cfg.inpaint {
                    inpaint_shadow(&buf.s, &buf.boundary, &scene.depth, &scene.normal)?
                } else {
                    buf.s
                }
            }
            _ => Raster::filled(w, h, 1, 1.0),
        };
        timings.shadow_ms += t.elapsed().as_secs_f64() * 1e3;
        manifest_lights.push(ManifestLight {
            id: id.clone(),
            kind: light.kind().into(),
            samples,
        });
        shading.push(LightShading {
            id: id.clone(),
            e,
            s,
            samples,
        });
    }
    let e_d = compose_direct(w, h, &shading);
    let t = Instant::now();
    let e_ind = match (&mesh, cfg.components.indirect) {
        (Some(mesh), true) => indirect_one_bounce(scene, mesh, &e_d, &cfg.gather, cfg.seed)?,
        _ => Raster::zeros(w, h, 3),
    };
    timings.indirect_ms = t.elapsed().as_secs_f64() * 1e3;
    let e = add(&e_d, &e_ind);
    let ldr_img = ldr(&e, &scene.albedo);
    timings.total_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(Rendered {
        manifest: RenderManifest {
            seed: cfg.seed,
            spp: cfg.spp,
            strategy: cfg.strategy,
            components: cfg.components.names().into_iter().map(String::from).collect(),
            lights: manifest_lights,
            timings,
        },
        shading: ShadingSet {
            lights: shading,
            e_d,
            e_ind,
            e,
            seed: cfg.seed,
            spp: cfg.spp,
        },
        ldr: ldr_img,
    })
}

/// 8-bit PNG with display gamma 1/2.2.
pub fn encode_png(img: &Raster) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    let mut bytes = Vec::with_capacity(w * h * 3);
    for p in 0..w * h {
        for v in img.rgb(p) {
            let g = v.clamp(0.0, 1.0).powf(1.0 / 2.2);
            bytes.push((g * 255.0 + 0.5) as u8);
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::invalid("png", e.to_string()))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::invalid("png", e.to_string()))?;
    }
    Ok(out)
}

pub fn write_png(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_png(img)?).map_err(|e| Error::io(path, e))
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `E_<id>.pfm`, `S_<id>.pfm`, `E_d.pfm`, `E_ind.pfm`, `E.pfm`,
/// `ldr.png` and `manifest.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, r: &Rendered) -> Result<BTreeMap<String, String>> {
    use crate::scene::pfm;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    let mut put = |name: String, raster: &Raster| -> Result<()> {
        pfm::write(dir.join(&name), raster)?;
        files.insert(name.clone(), name);
        Ok(())
    };
    for l in &r.shading.lights {
        put(format!("E_{}.pfm", file_safe(&l.id)), &l.e)?;
        put(format!("S_{}.pfm", file_safe(&l.id)), &l.s)?;
    }
    put("E_d.pfm".into(), &r.shading.e_d)?;
    put("E_ind.pfm".into(), &r.shading.e_ind)?;
    put("E.pfm".into(), &r.shading.e)?;
    write_png(dir.join("ldr.png"), &r.ldr)?;
    files.insert("ldr.png".into(), "ldr.png".into());
    let manifest = serde_json::to_string_pretty(&r.manifest).map_err(|source| Error::Json {
        context: "manifest".into(),
        source,
    })?;
    let path = dir.join("manifest.json");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    files.insert("manifest.json".into(), "manifest.json".into());
    Ok(files)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
