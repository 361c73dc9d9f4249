//! Flat parameter vectors over the light charts.
//!
//! Intensities and bandwidths use the bounded tangent charts of
//! [`crate::light::params`]; lobe directions are stored unnormalized and
//! renormalized after each step; window and box orientations are a rotation
//! vector applied to the initial frame, so the axes stay orthogonal; visible
//! lamps move only along their initial camera ray.

use crate::error::{Error, Result};
use crate::light::params::{bandwidth_from_raw, bandwidth_inverse, intensity_from_raw, intensity_inverse};
use crate::light::{BoxLamp, LampBase, Light, ReflectionMode, WindowLight};
use crate::math::{Real, Rgb, V3};
use crate::sg::{Lobe, SphericalGaussian, WindowRadiance};

/// Upper end of the intensity chart, short of the pole of `tan`.
pub const MAX_INTENSITY_RAW: f64 = 1.0 - 1e-7;
const MIN_LENGTH: f64 = 1e-6;
const MIN_RAY_LENGTH: f64 = 1e-3;

pub const LOBES: [Lobe; 3] = [Lobe::Sun, Lobe::Sky, Lobe::Ground];

/// Parameters per lobe: raw intensity (3), raw bandwidth, direction (3).
pub const LOBE_PARAMS: usize = 7;
pub const RADIANCE_PARAMS: usize = 3 * LOBE_PARAMS;

#[derive(Clone, Debug)]
enum Base {
    Window { frame: [V3; 2], visible: bool },
    Box { frame: [V3; 3] },
    Surfel { base: LampBase, dir: V3, length: f64, mode: ReflectionMode },
}

/// Chart of one light: initial frame plus the meaning of each coordinate.
#[derive(Clone, Debug)]
pub struct LightChart {
    base: Base,
    names: Vec<String>,
    x0: Vec<f64>,
}

fn raw_intensity(w: Rgb<f64>, field: &str) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = intensity_inverse(w[c])
            .map_err(|_| Error::OutOfRange {
                param: format!("{field}.w[{c}]"),
                value: w[c],
                range: "[0, inf)".into(),
            })?
            .min(MAX_INTENSITY_RAW);
    }
    Ok(out)
}

fn push_xyz(names: &mut Vec<String>, x: &mut Vec<f64>, prefix: &str, v: V3) {
    for (axis, value) in ["x", "y", "z"].iter().zip(v.to_array()) {
        names.push(format!("{prefix}.{axis}"));
        x.push(value);
    }
}

/// Appends the raw coordinates of `radiance` in lobe order sun, sky, ground.
pub fn push_radiance(names: &mut Vec<String>, x: &mut Vec<f64>, prefix: &str, radiance: &WindowRadiance) -> Result<()> {
    for lobe in LOBES {
        let g = radiance.lobe(lobe);
        let field = format!("{prefix}{}", lobe.name());
        for (c, raw) in raw_intensity(g.w, &field)?.into_iter().enumerate() {
            names.push(format!("{field}.w[{c}]"));
            x.push(raw);
        }
        names.push(format!("{field}.lambda"));
        x.push(bandwidth_inverse(g.lambda, lobe)?);
        push_xyz(names, x, &format!("{field}.d"), g.d);
    }
    Ok(())
}

/// Window radiance from [`RADIANCE_PARAMS`] raw coordinates.
pub fn radiance_from_raw<T: Real>(x: &[T]) -> WindowRadiance<T> {
    let lobe = |k: usize| {
        let o = k * LOBE_PARAMS;
        let w = [
            intensity_from_raw(x[o]),
            intensity_from_raw(x[o + 1]),
            intensity_from_raw(x[o + 2]),
        ];
        let lambda = bandwidth_from_raw(x[o + 3], LOBES[k]);
        let d = V3::new(x[o + 4], x[o + 5], x[o + 6]).normalize();
        SphericalGaussian::new(w, lambda, d)
    };
    WindowRadiance {
        sun: lobe(0),
        sky: lobe(1),
        ground: lobe(2),
    }
}

/// Clamps raw radiance coordinates back into their charts.
pub fn project_radiance(x: &mut [f64]) {
    for k in 0..3 {
        let o = k * LOBE_PARAMS;
        for c in 0..3 {
            x[o + c] = x[o + c].clamp(0.0, MAX_INTENSITY_RAW);
        }
        x[o + 3] = x[o + 3].clamp(0.0, 1.0);
        let d = V3::new(x[o + 4], x[o + 5], x[o + 6]);
        let n = d.norm();
        if n > 1e-12 {
            x[o + 4] /= n;
            x[o + 5] /= n;
            x[o + 6] /= n;
        }
    }
}

/// `R(omega) v` by Rodrigues' formula, smooth through `omega = 0`.
pub fn rotate<T: Real>(omega: V3<T>, v: V3<T>) -> V3<T> {
    let t2 = omega.norm2();
    let (a, b) = if t2.value() < 1e-8 {
        (T::one() - t2 / 6.0, T::cst(0.5) - t2 / 24.0)
    } else {
        let t = t2.sqrt();
        (t.sin() / t, (T::one() - t.cos()) / t2)
    };
    let wxv = omega.cross(v);
    v + wxv.scale(a) + omega.cross(wxv).scale(b)
}

impl LightChart {
    /// Chart centered on `light`. Visible lamps need their observed plates.
    pub fn new(id: &str, light: &Light, lamp_base: Option<(LampBase, ReflectionMode)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut x = Vec::new();
        let base = match light {
            Light::Window(w) => {
                push_xyz(&mut names, &mut x, &format!("{id}.c"), w.c);
                push_xyz(&mut names, &mut x, &format!("{id}.rot"), V3::zero());
                for (axis, v) in [("x", w.x), ("y", w.y)] {
                    names.push(format!("{id}.len.{axis}"));
                    x.push(v.norm());
                }
                push_radiance(&mut names, &mut x, &format!("{id}."), &w.radiance)?;
                Base::Window {
                    frame: [w.x.normalize(), w.y.normalize()],
                    visible: w.visible,
                }
            }
            Light::Box(b) => {
                push_xyz(&mut names, &mut x, &format!("{id}.c"), b.c);
                push_xyz(&mut names, &mut x, &format!("{id}.rot"), V3::zero());
                for (axis, v) in ["x", "y", "z"].iter().zip(b.axes) {
                    names.push(format!("{id}.len.{axis}"));
                    x.push(v.norm());
                }
                for (c, raw) in raw_intensity(b.w, id)?.into_iter().enumerate() {
                    names.push(format!("{id}.w[{c}]"));
                    x.push(raw);
                }
                Base::Box {
                    frame: b.axes.map(|a| a.normalize()),
                }
            }
            Light::Surfel(l) => {
                let (base, mode) = lamp_base
                    .ok_or_else(|| Error::invalid(format!("lights[{id}]"), "visible lamp chart needs its mask"))?;
                names.push(format!("{id}.dl"));
                x.push(0.0);
                for (c, raw) in raw_intensity(l.w, id)?.into_iter().enumerate() {
                    names.push(format!("{id}.w[{c}]"));
                    x.push(raw);
                }
                let length = l.center.norm();
                Base::Surfel {
                    base,
                    dir: l.center.normalize(),
                    length,
                    mode,
                }
            }
        };
        Ok(LightChart { base, names, x0: x })
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Coordinates of the light the chart was built from.
    pub fn initial(&self) -> &[f64] {
        &self.x0
    }

    /// Indices of the radiance or intensity coordinates.
    pub fn intensity_indices(&self) -> Vec<usize> {
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.contains(".w["))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of centers, orientations, sizes and ray offsets.
    pub fn geometry_indices(&self) -> Vec<usize> {
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| [".c.", ".rot.", ".len."].iter().any(|k| n.contains(k)) || n.ends_with(".dl"))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the sun direction, if any.
    pub fn sun_direction_indices(&self) -> Vec<usize> {
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.contains(".sun.d."))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn unpack<T: Real>(&self, x: &[T]) -> Result<Light<T>> {
        assert_eq!(x.len(), self.len());
        let v3 = |o: usize| V3::new(x[o], x[o + 1], x[o + 2]);
        match &self.base {
            Base::Window { frame, visible } => {
                let omega = v3(3);
                Ok(Light::Window(WindowLight {
                    c: v3(0),
                    x: rotate(omega, frame[0].lift()).scale(x[6]),
                    y: rotate(omega, frame[1].lift()).scale(x[7]),
                    radiance: radiance_from_raw(&x[8..8 + RADIANCE_PARAMS]),
                    visible: *visible,
                    enabled: true,
                }))
            }
            Base::Box { frame } => {
                let omega = v3(3);
                let axes = [0, 1, 2].map(|a| rotate(omega, frame[a].lift()).scale(x[6 + a]));
                Ok(Light::Box(BoxLamp {
                    c: v3(0),
                    axes,
                    w: [9, 10, 11].map(|i| intensity_from_raw(x[i])),
                    enabled: true,
                }))
            }
            Base::Surfel { base, dir, length, mode } => {
                let c = dir.lift::<T>().scale(x[0] + *length);
                let w = [1, 2, 3].map(|i| intensity_from_raw(x[i]));
                Ok(Light::Surfel(base.instantiate(c, w, true, *mode)?))
            }
        }
    }

    /// Moves `x` back into the admissible set after an unconstrained step.
    pub fn project(&self, x: &mut [f64]) {
        let clamp_w = |v: &mut f64| *v = v.clamp(0.0, MAX_INTENSITY_RAW);
        match &self.base {
            Base::Window { .. } => {
                x[6] = x[6].max(MIN_LENGTH);
                x[7] = x[7].max(MIN_LENGTH);
                project_radiance(&mut x[8..8 + RADIANCE_PARAMS]);
            }
            Base::Box { .. } => {
                for v in &mut x[6..9] {
                    *v = v.max(MIN_LENGTH);
                }
                x[9..12].iter_mut().for_each(clamp_w);
            }
            Base::Surfel { length, .. } => {
                x[0] = x[0].max(MIN_RAY_LENGTH - length);
                x[1..4].iter_mut().for_each(clamp_w);
            }
        }
    }
}
