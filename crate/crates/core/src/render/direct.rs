//! Direct shading estimators.
//!
//! * area: points drawn on the light surface, converted to irradiance with
//!   the usual `cos_p cos_q / r^2` factor;
//! * angular: directions drawn from the sun lobe of a window, kept when the
//!   ray from the receiver crosses the window rectangle;
//! * MIS: `spp` samples from each of the two, combined with the balance (or
//!   power-2) heuristic. Lamps have no angular strategy, so MIS falls back
//!   to area sampling for them.
//!
//! All estimators are generic over [`Real`]: with frozen random numbers the
//! estimate is a deterministic function of the light parameters, and
//! evaluating it on jets gives its pathwise derivatives.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::light::Light;
use crate::math::{rgb_add, rgb_scale, rgb_zero, Real, Rgb, V3};
use crate::scene::{Raster, Scene};

use super::rng::{pixel_rng, signed, Stream};

/// Light samples closer than this to the receiver are skipped.
pub const MIN_DISTANCE: f64 = 1e-6;
/// Clamp on `|cos_q|` in the area-to-solid-angle pdf conversion.
pub const MIS_COS_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Area,
    Angular,
    #[default]
    Mis,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisHeuristic {
    #[default]
    Balance,
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectOptions {
    pub spp: usize,
    pub seed: u64,
    pub heuristic: MisHeuristic,
}

impl DirectOptions {
    pub fn new(spp: usize, seed: u64) -> Self {
        DirectOptions {
            spp,
            seed,
            heuristic: MisHeuristic::Balance,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::invalid("spp", "must be at least 1"));
        }
        Ok(())
    }
}

/// Shading point and its unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Receiver {
    pub p: V3,
    pub n: V3,
}

impl Receiver {
    pub fn new(p: V3, n: V3) -> Self {
        Receiver { p, n }
    }

    pub fn from_scene(scene: &Scene, pixel: usize) -> Self {
        Receiver {
            p: scene.point(pixel),
            n: scene.normal_at(pixel),
        }
    }
}

/// Samples actually drawn per strategy for a light.
pub fn samples_per_pixel(light: &Light, strategy: Strategy, spp: usize) -> usize {
    match (light, strategy) {
        (Light::Window(_), Strategy::Mis) => 2 * spp,
        _ => spp,
    }
}

struct AreaHit<T> {
    /// Unit direction from the receiver to the light sample.
    l: V3<T>,
    /// `L(l) max(cos_p, 0)`, the solid-angle integrand.
    f: Rgb<T>,
    r2: T,
    cos_q: T,
    inv_pdf: T,
}

enum AreaSample<T> {
    Skip,
    Zero,
    Hit(AreaHit<T>),
}

fn draw_area<T: Real>(light: &Light<T>, rx: &Receiver, rng: &mut impl Rng) -> AreaSample<T> {
    let (u, v, sel) = (signed(rng), signed(rng), rng.gen::<f64>());
    let s = light.sample_for_estimator(T::cst(u), T::cst(v), sel);
    let to_q = s.q.sub_f(rx.p);
    let r2 = to_q.norm2();
    if r2.value() < MIN_DISTANCE * MIN_DISTANCE {
        return AreaSample::Skip;
    }
    let r = r2.sqrt();
    let l = to_q / r;
    let cos_p = l.dot_f(rx.n);
    if cos_p.value() <= 0.0 {
        return AreaSample::Zero;
    }
    let cos_q = -s.n.dot(l);
    let cos_q = if light.two_sided() {
        cos_q.abs()
    } else if cos_q.value() > 0.0 {
        cos_q
    } else {
        return AreaSample::Zero;
    };
    AreaSample::Hit(AreaHit {
        l,
        f: rgb_scale(light.radiance(l), cos_p),
        r2,
        cos_q,
        inv_pdf: s.inv_pdf,
    })
}

struct AngularHit<T> {
    f: Rgb<T>,
    pdf_sun: T,
    /// Solid-angle density of the area strategy for the same direction.
    pdf_area: T,
}

fn draw_angular<T: Real>(light: &Light<T>, rx: &Receiver, rng: &mut impl Rng) -> Option<AngularHit<T>> {
    let Light::Window(win) = light else {
        return None;
    };
    let (u, v) = (signed(rng), signed(rng));
    let l = win.radiance.sun.sample(T::cst(u), T::cst(v));
    let t = win.intersect(rx.p, l)?;
    let cos_p = l.dot_f(rx.n);
    if cos_p.value() <= 0.0 {
        return None;
    }
    let pdf_sun = win.radiance.sun.pdf(l);
    if !(pdf_sun.value() > 0.0) {
        return None;
    }
    let cos_q = win.normal().dot(l).abs().max_c(MIS_COS_EPS);
    Some(AngularHit {
        f: rgb_scale(win.radiance.eval(l), cos_p),
        pdf_sun,
        pdf_area: t * t / (win.area() * cos_q),
    })
}

fn mis_weight<T: Real>(own: T, other: T, heuristic: MisHeuristic) -> T {
    match heuristic {
        MisHeuristic::Balance => own / (own + other),
        MisHeuristic::Power => own * own / (own * own + other * other),
    }
}

/// Uniform light-surface sampling; also the estimator used for lamps.
pub fn estimate_area<T: Real>(light: &Light<T>, rx: &Receiver, spp: usize, rng: &mut impl Rng) -> Rgb<T> {
    let mut sum = rgb_zero();
    let mut used = 0usize;
    for _ in 0..spp {
        match draw_area(light, rx, rng) {
            AreaSample::Skip => continue,
            AreaSample::Zero => {}
            AreaSample::Hit(h) => sum = rgb_add(sum, rgb_scale(h.f, h.cos_q * h.inv_pdf / h.r2)),
        }
        used += 1;
    }
    if used == 0 {
        return rgb_zero();
    }
    rgb_scale(sum, T::cst(1.0 / used as f64))
}

/// Sun-lobe sampling with the window indicator. Zero for non-window lights.
pub fn estimate_angular<T: Real>(light: &Light<T>, rx: &Receiver, spp: usize, rng: &mut impl Rng) -> Rgb<T> {
    let mut sum = rgb_zero();
    for _ in 0..spp {
        if let Some(h) = draw_angular(light, rx, rng) {
            sum = rgb_add(sum, rgb_scale(h.f, h.pdf_sun.recip()));
        }
    }
    rgb_scale(sum, T::cst(1.0 / spp as f64))
}

/// `spp` area samples plus `spp` sun samples, MIS-weighted.
pub fn estimate_mis<T: Real>(
    light: &Light<T>,
    rx: &Receiver,
    spp: usize,
    heuristic: MisHeuristic,
    area_rng: &mut impl Rng,
    sun_rng: &mut impl Rng,
) -> Rgb<T> {
    let Light::Window(win) = light else {
        return estimate_area(light, rx, spp, area_rng);
    };
    let sun = &win.radiance.sun;
    let mut sum = rgb_zero();
    let mut used = 0usize;
    for _ in 0..spp {
        match draw_area(light, rx, area_rng) {
            AreaSample::Skip => continue,
            AreaSample::Zero => {}
            AreaSample::Hit(h) => {
                // weights use the clamped density, the estimate the exact
                // one, so the weights of both strategies still sum to one
                let pdf_area = h.r2 / (h.cos_q.max_c(MIS_COS_EPS) * h.inv_pdf);
                let wgt = mis_weight(pdf_area, sun.pdf(h.l), heuristic);
                sum = rgb_add(sum, rgb_scale(h.f, wgt * h.cos_q * h.inv_pdf / h.r2));
            }
        }
        used += 1;
    }
    let area_part = if used == 0 {
        rgb_zero()
    } else {
        rgb_scale(sum, T::cst(1.0 / used as f64))
    };
    let mut sum = rgb_zero();
    for _ in 0..spp {
        if let Some(h) = draw_angular(light, rx, sun_rng) {
            let wgt = mis_weight(h.pdf_sun, h.pdf_area, heuristic);
            sum = rgb_add(sum, rgb_scale(h.f, wgt / h.pdf_sun));
        }
    }
    rgb_add(area_part, rgb_scale(sum, T::cst(1.0 / spp as f64)))
}

/// Estimate at one receiver with the streams keyed by `(seed, salt, key)`.
pub fn estimate<T: Real>(
    light: &Light<T>,
    rx: &Receiver,
    strategy: Strategy,
    opts: &DirectOptions,
    salt: u64,
    key: usize,
) -> Rgb<T> {
    let mut area_rng = pixel_rng(opts.seed, salt, Stream::Area, key);
    match strategy {
        Strategy::Area => estimate_area(light, rx, opts.spp, &mut area_rng),
        Strategy::Angular => {
            let mut rng = pixel_rng(opts.seed, salt, Stream::Angular, key);
            estimate_angular(light, rx, opts.spp, &mut rng)
        }
        Strategy::Mis => {
            let mut rng = pixel_rng(opts.seed, salt, Stream::Angular, key);
            estimate_mis(light, rx, opts.spp, opts.heuristic, &mut area_rng, &mut rng)
        }
    }
}

fn check_strategy<T: Real>(light: &Light<T>, strategy: Strategy) -> Result<()> {
    if !light.enabled() {
        return Err(Error::DisabledLight(light.kind().into()));
    }
    if strategy == Strategy::Angular && !matches!(light, Light::Window(_)) {
        return Err(Error::Incompatible(format!(
            "angular sampling needs a window, got {}",
            light.kind()
        )));
    }
    Ok(())
}

/// Per-pixel direct shading of one light, without occlusion.
pub fn direct_pixels<T: Real>(
    scene: &Scene,
    light: &Light<T>,
    strategy: Strategy,
    opts: &DirectOptions,
    salt: u64,
) -> Result<Vec<Rgb<T>>> {
    opts.validate()?;
    check_strategy(light, strategy)?;
    Ok((0..scene.pixel_count())
        .into_par_iter()
        .map(|p| estimate(light, &Receiver::from_scene(scene, p), strategy, opts, salt, p))
        .collect())
}

pub fn to_raster(scene: &Scene, px: &[Rgb<f64>]) -> Raster {
    Raster::from_rgb(scene.width(), scene.height(), px)
}

fn direct_raster(scene: &Scene, light: &Light, strategy: Strategy, spp: usize, seed: u64) -> Result<Raster> {
    let px = direct_pixels(scene, light, strategy, &DirectOptions::new(spp, seed), 0)?;
    Ok(to_raster(scene, &px))
}

/// Unbiased area-sampling estimate of `E_j` at every pixel.
pub fn direct_area(scene: &Scene, light: &Light, spp: usize, seed: u64) -> Result<Raster> {
    direct_raster(scene, light, Strategy::Area, spp, seed)
}

/// Sun-lobe sampling estimate of `E_j` for a window.
pub fn direct_angular(scene: &Scene, light: &Light, spp: usize, seed: u64) -> Result<Raster> {
    direct_raster(scene, light, Strategy::Angular, spp, seed)
}

/// Balance-heuristic combination of area and sun-lobe sampling.
pub fn direct_mis(scene: &Scene, light: &Light, spp: usize, seed: u64) -> Result<Raster> {
    direct_raster(scene, light, Strategy::Mis, spp, seed)
}
