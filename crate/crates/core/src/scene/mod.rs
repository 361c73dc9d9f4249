//! Scene data model and descriptor IO.

mod camera;
pub mod pfm;
mod raster;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use camera::{CameraIntrinsics, Footprint, GRAZING_EPS};
pub use raster::{dilate, erode, inner_edge, outer_ring, Raster};

use crate::error::{Error, Result};
use crate::light::{LightDesc, ReflectionMode};
use crate::math::V3;

/// Target mean of normalized depth maps.
pub const NORMALIZED_MEAN_DEPTH: f64 = 3.0;

const NORMAL_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    /// Use the literal `(tan(f/2)/H)^2 / N_z` footprint instead of the physical one.
    #[serde(default)]
    pub paper_literal_footprint: bool,
    #[serde(default)]
    pub reflection: ReflectionMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightMask {
    pub light_id: String,
    pub mask: Raster,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub camera: CameraIntrinsics,
    pub depth: Raster,
    pub normal: Raster,
    pub albedo: Raster,
    pub roughness: Raster,
    pub masks: Vec<LightMask>,
    pub lights: Vec<LightDesc>,
    pub input_image: Option<Raster>,
    pub options: SceneOptions,
}

impl Scene {
    /// Scene with unit roughness, no masks and no lights.
    pub fn from_rasters(camera: CameraIntrinsics, depth: Raster, normal: Raster, albedo: Raster) -> Result<Self> {
        let roughness = Raster::filled(camera.width, camera.height, 1, 1.0);
        let scene = Scene {
            camera,
            depth,
            normal,
            albedo,
            roughness,
            masks: Vec::new(),
            lights: Vec::new(),
            input_image: None,
            options: SceneOptions::default(),
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Checks shapes, finiteness, unit normals, positive depth, masks and lights.
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let (w, h) = (self.camera.width, self.camera.height);
        let fields: [(&str, &Raster, usize); 4] = [
            ("depth", &self.depth, 1),
            ("normal", &self.normal, 3),
            ("albedo", &self.albedo, 3),
            ("roughness", &self.roughness, 1),
        ];
        for (name, r, c) in fields {
            r.check_shape(name, w, h, c)?;
            r.check_finite(name)?;
        }
        if let Some(img) = &self.input_image {
            img.check_shape("image", w, h, 3)?;
            img.check_finite("image")?;
        }
        for (i, &d) in self.depth.data().iter().enumerate() {
            if d <= 0.0 {
                return Err(Error::invalid("depth", format!("non-positive depth {d} at pixel {i}")));
            }
        }
        for p in 0..self.camera.pixel_count() {
            let n = self.normal.vec3(p).norm();
            if (n - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(Error::invalid("normal", format!("length {n} at pixel {p}")));
            }
        }
        let mut ids = HashSet::new();
        for m in &self.masks {
            let field = format!("masks[{}]", m.light_id);
            m.mask.check_shape(&field, w, h, 1)?;
            m.mask.check_finite(&field)?;
            if !ids.insert(m.light_id.as_str()) {
                return Err(Error::invalid(field, "duplicate mask id"));
            }
        }
        let mut ids = HashSet::new();
        for l in &self.lights {
            if !ids.insert(l.id()) {
                return Err(Error::invalid(format!("lights[{}]", l.id()), "duplicate light id"));
            }
            l.build(self)?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    pub fn pixel_count(&self) -> usize {
        self.camera.pixel_count()
    }

    /// Camera-space point of pixel `(row, col)`.
    pub fn unproject(&self, row: usize, col: usize) -> V3 {
        self.camera.unproject(row, col, self.depth.get(row, col, 0) as f64)
    }

    /// Camera-space point of a flat pixel index.
    pub fn point(&self, p: usize) -> V3 {
        let w = self.camera.width;
        self.unproject(p / w, p % w)
    }

    pub fn normal_at(&self, p: usize) -> V3 {
        self.normal.vec3(p)
    }

    pub fn pixel_footprint_area(&self, row: usize, col: usize) -> Footprint {
        self.footprint(row * self.camera.width + col)
    }

    /// Surface area seen by a pixel, honouring `paper_literal_footprint`.
    pub fn footprint(&self, p: usize) -> Footprint {
        let n = self.normal_at(p);
        if self.options.paper_literal_footprint {
            self.camera.footprint_area_literal(n)
        } else {
            self.camera.footprint_area(self.depth.at(p, 0) as f64, n)
        }
    }

    /// Pixel side length at the pixel's depth.
    pub fn pixel_side(&self, p: usize) -> f64 {
        self.camera.pixel_pitch() * self.depth.at(p, 0) as f64
    }

    pub fn mean_depth(&self) -> f64 {
        self.depth.mean()
    }

    pub fn mask(&self, light_id: &str) -> Option<&Raster> {
        self.masks.iter().find(|m| m.light_id == light_id).map(|m| &m.mask)
    }

    pub fn light(&self, id: &str) -> Option<&LightDesc> {
        self.lights.iter().find(|l| l.id() == id)
    }

    pub fn light_mut(&mut self, id: &str) -> Option<&mut LightDesc> {
        self.lights.iter_mut().find(|l| l.id() == id)
    }
}

/// Scales depth by one scalar so that its mean is 3.
///
/// A raster whose mean is already within rounding of 3 is returned as is,
/// which keeps the operation idempotent under f32 storage.
pub fn normalize_depth(depth: &Raster) -> Result<Raster> {
    for (i, &d) in depth.data().iter().enumerate() {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid("depth", format!("non-positive depth {d} at pixel {i}")));
        }
    }
    let scale = NORMALIZED_MEAN_DEPTH / depth.mean();
    if (scale - 1.0).abs() <= 1e-6 {
        return Ok(depth.clone());
    }
    Ok(depth.map(|d| (d as f64 * scale) as f32))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CameraDesc {
    fov_deg: f64,
    /// Exact radians; takes precedence over `fov_deg` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fov_rad: Option<f64>,
    width: usize,
    height: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RasterPaths {
    depth: PathBuf,
    normal: PathBuf,
    albedo: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roughness: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MaskPath {
    #[serde(deserialize_with = "crate::light::desc::string_or_number")]
    light_id: String,
    path: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SceneDesc {
    camera: CameraDesc,
    rasters: RasterPaths,
    #[serde(default)]
    masks: Vec<MaskPath>,
    #[serde(default)]
    lights: Vec<LightDesc>,
    #[serde(default)]
    normalize_depth: bool,
    #[serde(default)]
    paper_literal_footprint: bool,
    #[serde(default)]
    point_reflection: bool,
}

fn read_raster(base: &Path, rel: &Path, field: &str) -> Result<Raster> {
    let path = base.join(rel);
    pfm::read(&path).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: PathBuf::from(format!("rasters.{field} ({})", path.display())),
            source,
        },
        other => other,
    })
}

/// Loads and validates a scene descriptor. Raster paths are relative to the
/// descriptor's directory.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let desc: SceneDesc = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fov = desc.camera.fov_rad.unwrap_or(desc.camera.fov_deg.to_radians());
    let camera = CameraIntrinsics::new(fov, desc.camera.width, desc.camera.height)?;
    let (w, h) = (camera.width, camera.height);

    let depth = read_raster(base, &desc.rasters.depth, "depth")?;
    depth.check_shape("depth", w, h, 1)?;
    depth.check_finite("depth")?;
    let depth = if desc.normalize_depth {
        normalize_depth(&depth)?
    } else {
        depth
    };
    let normal = read_raster(base, &desc.rasters.normal, "normal")?;
    let albedo = read_raster(base, &desc.rasters.albedo, "albedo")?;
    let roughness = match &desc.rasters.roughness {
        Some(p) => read_raster(base, p, "roughness")?,
        None => Raster::filled(w, h, 1, 1.0),
    };
    let input_image = match &desc.rasters.image {
        Some(p) => Some(read_raster(base, p, "image")?),
        None => None,
    };
    let mut masks = Vec::with_capacity(desc.masks.len());
    for m in &desc.masks {
        masks.push(LightMask {
            light_id: m.light_id.clone(),
            mask: read_raster(base, &m.path, &format!("masks[{}]", m.light_id))?,
        });
    }
    let scene = Scene {
        camera,
        depth,
        normal,
        albedo,
        roughness,
        masks,
        lights: desc.lights,
        input_image,
        options: SceneOptions {
            paper_literal_footprint: desc.paper_literal_footprint,
            reflection: if desc.point_reflection {
                ReflectionMode::Point
            } else {
                ReflectionMode::Plane
            },
        },
    };
    scene.validate()?;
    Ok(scene)
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes the descriptor to `path` and its rasters as PFM files next to it.
///
/// Depth is written as stored, so the descriptor carries
/// `normalize_depth: false`.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    if !base.as_os_str().is_empty() {
        fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    let put = |name: &str, r: &Raster| -> Result<PathBuf> {
        let rel = PathBuf::from(format!("{stem}.{name}.pfm"));
        pfm::write(base.join(&rel), r)?;
        Ok(rel)
    };
    let rasters = RasterPaths {
        depth: put("depth", &scene.depth)?,
        normal: put("normal", &scene.normal)?,
        albedo: put("albedo", &scene.albedo)?,
        roughness: Some(put("roughness", &scene.roughness)?),
        image: match &scene.input_image {
            Some(img) => Some(put("image", img)?),
            None => None,
        },
    };
    let mut masks = Vec::new();
    for (i, m) in scene.masks.iter().enumerate() {
        masks.push(MaskPath {
            light_id: m.light_id.clone(),
            path: put(&format!("mask{i}-{}", file_safe(&m.light_id)), &m.mask)?,
        });
    }
    let desc = SceneDesc {
        camera: CameraDesc {
            fov_deg: scene.camera.fov_short_axis.to_degrees(),
            fov_rad: Some(scene.camera.fov_short_axis),
            width: scene.camera.width,
            height: scene.camera.height,
        },
        rasters,
        masks,
        lights: scene.lights.clone(),
        normalize_depth: false,
        paper_literal_footprint: scene.options.paper_literal_footprint,
        point_reflection: scene.options.reflection == ReflectionMode::Point,
    };
    let text = serde_json::to_string_pretty(&desc).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
