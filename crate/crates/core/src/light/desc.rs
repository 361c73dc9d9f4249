//! JSON light schema.
//!
//! ```json
//! {"id": "sun-window", "type": "window", "visible": false, "enabled": true,
//!  "c": [0, 2, -3], "x": [1.5, 0, 0], "y": [0, 0, 0.8],
//!  "radiance": {"sun": {"w": [5, 5, 4], "lambda": 300, "d": [0, 1, 0]},
//!               "sky": {...}, "ground": {...}}}
//! ```

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::math::V3;
use crate::scene::Scene;
use crate::sg::{SphericalGaussian, WindowRadiance};

use super::lamp::{initial_center, CenterKind, LampBase};
use super::{check_intensity, BoxLamp, Light, WindowLight};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobeDesc {
    pub w: [f64; 3],
    pub lambda: f64,
    pub d: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadianceDesc {
    pub sun: LobeDesc,
    pub sky: LobeDesc,
    pub ground: LobeDesc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LightDesc {
    Window {
        #[serde(deserialize_with = "string_or_number")]
        id: String,
        #[serde(default)]
        visible: bool,
        #[serde(default = "enabled_default")]
        enabled: bool,
        c: [f64; 3],
        x: [f64; 3],
        y: [f64; 3],
        radiance: RadianceDesc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask_id: Option<String>,
    },
    BoxLamp {
        #[serde(deserialize_with = "string_or_number")]
        id: String,
        #[serde(default)]
        visible: bool,
        #[serde(default = "enabled_default")]
        enabled: bool,
        c: [f64; 3],
        x: [f64; 3],
        y: [f64; 3],
        z: [f64; 3],
        w: [f64; 3],
    },
    SurfelLamp {
        #[serde(deserialize_with = "string_or_number")]
        id: String,
        #[serde(default = "enabled_default")]
        visible: bool,
        #[serde(default = "enabled_default")]
        enabled: bool,
        /// Lamp center; defaults to the mask's initial center.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<[f64; 3]>,
        w: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask_id: Option<String>,
    },
}

fn enabled_default() -> bool {
    true
}

pub(crate) fn string_or_number<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Id::deserialize(de)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

impl LobeDesc {
    pub fn to_lobe(&self) -> SphericalGaussian {
        SphericalGaussian::new(self.w, self.lambda, V3::from_array(self.d))
    }

    pub fn from_lobe(g: &SphericalGaussian) -> Self {
        LobeDesc {
            w: g.w,
            lambda: g.lambda,
            d: g.d.to_array(),
        }
    }
}

impl RadianceDesc {
    pub fn to_radiance(&self) -> WindowRadiance {
        WindowRadiance {
            sun: self.sun.to_lobe(),
            sky: self.sky.to_lobe(),
            ground: self.ground.to_lobe(),
        }
    }

    pub fn from_radiance(r: &WindowRadiance) -> Self {
        RadianceDesc {
            sun: LobeDesc::from_lobe(&r.sun),
            sky: LobeDesc::from_lobe(&r.sky),
            ground: LobeDesc::from_lobe(&r.ground),
        }
    }
}

impl LightDesc {
    pub fn id(&self) -> &str {
        match self {
            LightDesc::Window { id, .. } | LightDesc::BoxLamp { id, .. } | LightDesc::SurfelLamp { id, .. } => id,
        }
    }

    pub fn enabled(&self) -> bool {
        match self {
            LightDesc::Window { enabled, .. }
            | LightDesc::BoxLamp { enabled, .. }
            | LightDesc::SurfelLamp { enabled, .. } => *enabled,
        }
    }

    pub fn set_enabled(&mut self, on: bool) {
        match self {
            LightDesc::Window { enabled, .. }
            | LightDesc::BoxLamp { enabled, .. }
            | LightDesc::SurfelLamp { enabled, .. } => *enabled = on,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            LightDesc::Window { .. } => "window",
            LightDesc::BoxLamp { .. } => "box_lamp",
            LightDesc::SurfelLamp { .. } => "surfel_lamp",
        }
    }

    /// Mask the light is tied to, if any.
    pub fn mask_id(&self) -> Option<&str> {
        match self {
            LightDesc::Window { mask_id, .. } => mask_id.as_deref(),
            LightDesc::BoxLamp { .. } => None,
            LightDesc::SurfelLamp { id, mask_id, .. } => Some(mask_id.as_deref().unwrap_or(id)),
        }
    }

    /// Scene-independent validation of physical parameters.
    pub fn validate(&self) -> Result<()> {
        let field = format!("lights[{}]", self.id());
        if self.id().is_empty() {
            return Err(Error::invalid("lights[].id", "must be non-empty"));
        }
        match self {
            LightDesc::Window { .. } | LightDesc::BoxLamp { .. } => {
                self.to_light_geometry()?.validate(&field)
            }
            LightDesc::SurfelLamp { c, w, .. } => {
                check_intensity(&format!("{field}.w"), *w)?;
                if let Some(c) = c {
                    if !V3::from_array(*c).is_finite() {
                        return Err(Error::NonFinite {
                            field: format!("{field}.c"),
                            index: 0,
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Windows and box lamps need no scene data to instantiate.
    fn to_light_geometry(&self) -> Result<GeometryOnly> {
        match self {
            LightDesc::Window {
                visible,
                enabled,
                c,
                x,
                y,
                radiance,
                ..
            } => Ok(GeometryOnly::Window(WindowLight {
                c: V3::from_array(*c),
                x: V3::from_array(*x),
                y: V3::from_array(*y),
                radiance: radiance.to_radiance(),
                visible: *visible,
                enabled: *enabled,
            })),
            LightDesc::BoxLamp {
                enabled, c, x, y, z, w, ..
            } => Ok(GeometryOnly::Box(BoxLamp {
                c: V3::from_array(*c),
                axes: [V3::from_array(*x), V3::from_array(*y), V3::from_array(*z)],
                w: *w,
                enabled: *enabled,
            })),
            LightDesc::SurfelLamp { .. } => Err(Error::Incompatible("surfel lamps need a scene".into())),
        }
    }

    /// Instantiates the light against a scene (visible lamps need its rasters).
    pub fn build(&self, scene: &Scene) -> Result<Light> {
        self.validate()?;
        match self {
            LightDesc::Window { .. } | LightDesc::BoxLamp { .. } => Ok(match self.to_light_geometry()? {
                GeometryOnly::Window(w) => Light::Window(w),
                GeometryOnly::Box(b) => Light::Box(b),
            }),
            LightDesc::SurfelLamp { enabled, c, w, .. } => {
                let (base, _) = self.lamp_base(scene)?;
                let center = match c {
                    Some(c) => V3::from_array(*c),
                    None => initial_center(scene, self.mask(scene)?, CenterKind::Lamp)?.c,
                };
                Ok(Light::Surfel(base.instantiate(center, *w, *enabled, scene.options.reflection)?))
            }
        }
    }

    fn mask<'a>(&self, scene: &'a Scene) -> Result<&'a crate::scene::Raster> {
        let mask_id = self.mask_id().unwrap_or(self.id());
        scene.mask(mask_id).ok_or_else(|| {
            Error::invalid(format!("lights[{}].mask_id", self.id()), format!("no mask named {mask_id}"))
        })
    }

    /// Observed plates of a visible lamp and its stored center.
    pub fn lamp_base(&self, scene: &Scene) -> Result<(LampBase, Option<[f64; 3]>)> {
        match self {
            LightDesc::SurfelLamp { id, c, .. } => Ok((LampBase::from_mask(scene, self.mask(scene)?, id)?, *c)),
            _ => Err(Error::Incompatible(format!("{} is not a surfel lamp", self.id()))),
        }
    }

    /// Descriptor re-emitted from an instantiated light, keeping id, mask
    /// and visibility from `self`.
    pub fn with_light(&self, light: &Light) -> LightDesc {
        let mut out = self.clone();
        match (&mut out, light) {
            (LightDesc::Window { c, x, y, radiance, enabled, .. }, Light::Window(w)) => {
                *c = w.c.to_array();
                *x = w.x.to_array();
                *y = w.y.to_array();
                *radiance = RadianceDesc::from_radiance(&w.radiance);
                *enabled = w.enabled;
            }
            (LightDesc::BoxLamp { c, x, y, z, w, enabled, .. }, Light::Box(b)) => {
                *c = b.c.to_array();
                *x = b.axes[0].to_array();
                *y = b.axes[1].to_array();
                *z = b.axes[2].to_array();
                *w = b.w;
                *enabled = b.enabled;
            }
            (LightDesc::SurfelLamp { c, w, enabled, .. }, Light::Surfel(l)) => {
                *c = Some(l.center.to_array());
                *w = l.w;
                *enabled = l.enabled;
            }
            _ => {}
        }
        out
    }
}

enum GeometryOnly {
    Window(WindowLight),
    Box(BoxLamp),
}

impl GeometryOnly {
    fn validate(&self, field: &str) -> Result<()> {
        match self {
            GeometryOnly::Window(w) => w.validate(field),
            GeometryOnly::Box(b) => b.validate(field),
        }
    }
}
