//! Light-source geometry: windows, invisible box lamps and visible surfel
//! lamps, plus uniform surface sampling.

mod alias;
pub mod desc;
pub mod lamp;
pub mod params;

pub use alias::AliasTable;
pub use desc::{LightDesc, LobeDesc, RadianceDesc};
pub use lamp::{initial_center, CenterKind, InitialCenter, LampBase, ReflectionMode};

use crate::error::{Error, Result};
use crate::math::{rgb_lift, rgb_value, tangent_frame, Real, Rgb, V3};
use crate::sg::WindowRadiance;

/// Rectangle `{c, x, y}`; `x` and `y` are full side vectors, so a point is
/// `c + 0.5 u x + 0.5 v y` for `u, v` in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowLight<T = f64> {
    pub c: V3<T>,
    pub x: V3<T>,
    pub y: V3<T>,
    pub radiance: WindowRadiance<T>,
    pub visible: bool,
    pub enabled: bool,
}

/// Invisible lamp as an oriented box with full-length axes `x, y, z`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxLamp<T = f64> {
    pub c: V3<T>,
    pub axes: [V3<T>; 3],
    pub w: Rgb<T>,
    pub enabled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfelTag {
    Visible,
    Mirrored,
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surfel<T = f64> {
    pub q: V3<T>,
    pub n: V3<T>,
    pub area: T,
    pub tag: SurfelTag,
}

/// Visible lamp: observed surfels, their reflections through the center and
/// the boundary strip joining the two.
#[derive(Clone, Debug)]
pub struct SurfelLamp<T = f64> {
    pub center: V3<T>,
    pub surfels: Vec<Surfel<T>>,
    pub w: Rgb<T>,
    pub enabled: bool,
    /// Selection proportional to current surfel areas.
    area_table: AliasTable,
    /// Selection by parameter-independent weights, used by the estimators so
    /// that discrete choices do not move with the lamp center.
    stable_table: AliasTable,
}

#[derive(Clone, Debug)]
pub enum Light<T = f64> {
    Window(WindowLight<T>),
    Box(BoxLamp<T>),
    Surfel(SurfelLamp<T>),
}

/// A point on a light surface with its normal and the reciprocal of its
/// area-measure density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample<T = f64> {
    pub q: V3<T>,
    pub n: V3<T>,
    pub inv_pdf: T,
}

impl<T: Real> WindowLight<T> {
    pub fn area(&self) -> T {
        self.x.norm() * self.y.norm()
    }

    pub fn normal(&self) -> V3<T> {
        self.x.cross(self.y).normalize()
    }

    pub fn point(&self, u: T, v: T) -> V3<T> {
        self.c + self.x.scale(u * 0.5) + self.y.scale(v * 0.5)
    }

    /// Distance along a ray to the rectangle, if the ray hits it.
    pub fn intersect(&self, origin: V3<f64>, dir: V3<T>) -> Option<T> {
        let n = self.x.cross(self.y);
        let denom = n.dot(dir);
        if denom.value().abs() < 1e-300 {
            return None;
        }
        let t = n.dot(self.c.sub_f(origin)) / denom;
        if t.value() <= 0.0 {
            return None;
        }
        let hit = dir.scale(t).add_f(origin) - self.c;
        let a = hit.dot(self.x) / self.x.norm2();
        let b = hit.dot(self.y) / self.y.norm2();
        if a.value().abs() <= 0.5 && b.value().abs() <= 0.5 {
            Some(t)
        } else {
            None
        }
    }
}

impl WindowLight<f64> {
    pub fn validate(&self, field: &str) -> Result<()> {
        check_finite_vec(&format!("{field}.c"), self.c)?;
        for (name, a) in [("x", self.x), ("y", self.y)] {
            check_finite_vec(&format!("{field}.{name}"), a)?;
            if a.norm() <= 0.0 {
                return Err(Error::OutOfRange {
                    param: format!("{field}.{name}"),
                    value: 0.0,
                    range: "|axis| > 0".into(),
                });
            }
        }
        let cos = self.x.dot(self.y) / (self.x.norm() * self.y.norm());
        if cos.abs() > 1e-4 {
            return Err(Error::OutOfRange {
                param: format!("{field}.x.y"),
                value: cos,
                range: "orthogonal axes (|cos| <= 1e-4)".into(),
            });
        }
        self.radiance.validate(&format!("{field}.radiance"))
    }
}

const BOX_FACES: [(usize, f64); 6] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];

impl<T: Real> BoxLamp<T> {
    fn face_area(&self, face: usize) -> T {
        let (a, _) = BOX_FACES[face];
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        self.axes[b].norm() * self.axes[c].norm()
    }

    pub fn area(&self) -> T {
        (0..6).fold(T::zero(), |acc, f| acc + self.face_area(f))
    }

    fn face_point(&self, face: usize, u: T, v: T) -> SurfaceSample<T> {
        let (a, s) = BOX_FACES[face];
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let q = self.c + self.axes[a].scale(T::cst(0.5 * s)) + self.axes[b].scale(u * 0.5) + self.axes[c].scale(v * 0.5);
        let n = self.axes[a].normalize().scale(T::cst(s));
        SurfaceSample {
            q,
            n,
            inv_pdf: self.face_area(face),
        }
    }

    fn face_by_area(&self, sel: f64) -> usize {
        let areas: Vec<f64> = (0..6).map(|f| self.face_area(f).value()).collect();
        let total: f64 = areas.iter().sum();
        let mut acc = 0.0;
        for (f, a) in areas.iter().enumerate() {
            acc += a / total;
            if sel < acc {
                return f;
            }
        }
        5
    }
}

impl BoxLamp<f64> {
    pub fn validate(&self, field: &str) -> Result<()> {
        check_finite_vec(&format!("{field}.c"), self.c)?;
        check_intensity(&format!("{field}.w"), self.w)?;
        for (i, a) in self.axes.iter().enumerate() {
            check_finite_vec(&format!("{field}.axes[{i}]"), *a)?;
            if a.norm() <= 0.0 {
                return Err(Error::OutOfRange {
                    param: format!("{field}.axes[{i}]"),
                    value: 0.0,
                    range: "|axis| > 0".into(),
                });
            }
        }
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let cos = self.axes[i].dot(self.axes[j]) / (self.axes[i].norm() * self.axes[j].norm());
            if cos.abs() > 1e-4 {
                return Err(Error::OutOfRange {
                    param: format!("{field}.axes[{i}].axes[{j}]"),
                    value: cos,
                    range: "orthogonal axes (|cos| <= 1e-4)".into(),
                });
            }
        }
        Ok(())
    }
}

impl<T: Real> SurfelLamp<T> {
    /// Assembles a lamp; `stable_weights` are the parameter-independent
    /// selection weights used by the rendering estimators.
    pub fn new(center: V3<T>, surfels: Vec<Surfel<T>>, stable_weights: &[f64], w: Rgb<T>, enabled: bool) -> Self {
        assert_eq!(surfels.len(), stable_weights.len());
        let areas: Vec<f64> = surfels.iter().map(|s| s.area.value()).collect();
        SurfelLamp {
            center,
            area_table: AliasTable::new(&areas),
            stable_table: AliasTable::new(stable_weights),
            surfels,
            w,
            enabled,
        }
    }

    pub fn area(&self) -> T {
        self.surfels.iter().fold(T::zero(), |acc, s| acc + s.area)
    }

    pub fn area_of(&self, tag: SurfelTag) -> T {
        self.surfels
            .iter()
            .filter(|s| s.tag == tag)
            .fold(T::zero(), |acc, s| acc + s.area)
    }

    fn plate_point(&self, i: usize, u: T, v: T, inv_pmf: f64) -> SurfaceSample<T> {
        let s = &self.surfels[i];
        let side = s.area.sqrt();
        let (t, b) = tangent_frame(s.n);
        let q = s.q + t.scale(u * side * 0.5) + b.scale(v * side * 0.5);
        SurfaceSample {
            q,
            n: s.n,
            inv_pdf: s.area * inv_pmf,
        }
    }
}

impl<T: Real> Light<T> {
    pub fn enabled(&self) -> bool {
        match self {
            Light::Window(l) => l.enabled,
            Light::Box(l) => l.enabled,
            Light::Surfel(l) => l.enabled,
        }
    }

    pub fn set_enabled(&mut self, on: bool) {
        match self {
            Light::Window(l) => l.enabled = on,
            Light::Box(l) => l.enabled = on,
            Light::Surfel(l) => l.enabled = on,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Light::Window(_) => "window",
            Light::Box(_) => "box_lamp",
            Light::Surfel(_) => "surfel_lamp",
        }
    }

    pub fn area(&self) -> T {
        match self {
            Light::Window(l) => l.area(),
            Light::Box(l) => l.area(),
            Light::Surfel(l) => l.area(),
        }
    }

    /// Windows transmit from both sides of their plane; lamps emit only along
    /// their outward normals.
    pub fn two_sided(&self) -> bool {
        matches!(self, Light::Window(_))
    }

    /// Radiance arriving along unit direction `l`, pointing from the receiver
    /// toward the light.
    pub fn radiance(&self, l: V3<T>) -> Rgb<T> {
        match self {
            Light::Window(win) => win.radiance.eval(l),
            Light::Box(b) => b.w,
            Light::Surfel(s) => s.w,
        }
    }

    /// Point uniformly distributed over the surface measure.
    ///
    /// `face_selector` in `[0, 1)` picks the box face or surfel proportional
    /// to area; `u, v` in `[-1, 1]` place the point on it.
    pub fn sample_surface(&self, u: T, v: T, face_selector: f64) -> Result<SurfaceSample<T>> {
        let total = self.area();
        let mut s = match self {
            Light::Window(w) if w.enabled => SurfaceSample {
                q: w.point(u, v),
                n: w.normal(),
                inv_pdf: total,
            },
            Light::Box(b) if b.enabled => b.face_point(b.face_by_area(face_selector), u, v),
            Light::Surfel(l) if l.enabled => {
                let i = l.area_table.sample(face_selector);
                l.plate_point(i, u, v, 1.0)
            }
            _ => return Err(Error::DisabledLight(self.kind().into())),
        };
        s.inv_pdf = total;
        Ok(s)
    }

    /// Sample used by the rendering estimators. Every discrete choice depends
    /// only on `selector`, never on light parameters, so the estimate is a
    /// smooth function of the parameters for frozen random numbers.
    pub fn sample_for_estimator(&self, u: T, v: T, selector: f64) -> SurfaceSample<T> {
        match self {
            Light::Window(w) => SurfaceSample {
                q: w.point(u, v),
                n: w.normal(),
                inv_pdf: w.area(),
            },
            Light::Box(b) => {
                let face = ((selector * 6.0) as usize).min(5);
                let mut s = b.face_point(face, u, v);
                s.inv_pdf = s.inv_pdf * 6.0;
                s
            }
            Light::Surfel(l) => {
                let i = l.stable_table.sample(selector);
                l.plate_point(i, u, v, 1.0 / l.stable_table.pmf(i))
            }
        }
    }

    /// Area-weighted centroid of the emitting surface.
    pub fn centroid(&self) -> V3<T> {
        match self {
            Light::Window(w) => w.c,
            Light::Box(b) => b.c,
            Light::Surfel(l) => {
                let mut acc = V3::zero();
                for s in &l.surfels {
                    acc += s.q.scale(s.area);
                }
                acc / l.area()
            }
        }
    }

    pub fn lift(light: &Light<f64>) -> Self {
        match light {
            Light::Window(w) => Light::Window(WindowLight {
                c: V3::from_f64(w.c),
                x: V3::from_f64(w.x),
                y: V3::from_f64(w.y),
                radiance: WindowRadiance::lift(&w.radiance),
                visible: w.visible,
                enabled: w.enabled,
            }),
            Light::Box(b) => Light::Box(BoxLamp {
                c: V3::from_f64(b.c),
                axes: b.axes.map(V3::from_f64),
                w: rgb_lift(b.w),
                enabled: b.enabled,
            }),
            Light::Surfel(l) => Light::Surfel(SurfelLamp {
                center: V3::from_f64(l.center),
                surfels: l
                    .surfels
                    .iter()
                    .map(|s| Surfel {
                        q: V3::from_f64(s.q),
                        n: V3::from_f64(s.n),
                        area: T::cst(s.area),
                        tag: s.tag,
                    })
                    .collect(),
                w: rgb_lift(l.w),
                enabled: l.enabled,
                area_table: l.area_table.clone(),
                stable_table: l.stable_table.clone(),
            }),
        }
    }

    /// Intensity scale of a lamp (`None` for windows).
    pub fn lamp_intensity(&self) -> Option<Rgb<f64>> {
        match self {
            Light::Window(_) => None,
            Light::Box(b) => Some(rgb_value(b.w)),
            Light::Surfel(s) => Some(rgb_value(s.w)),
        }
    }
}

fn check_finite_vec(field: &str, v: V3) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: field.into(),
            index: 0,
        })
    }
}

pub(crate) fn check_intensity(field: &str, w: Rgb<f64>) -> Result<()> {
    for (i, &c) in w.iter().enumerate() {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::OutOfRange {
                param: format!("{field}[{i}]"),
                value: c,
                range: "[0, inf)".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sg::SphericalGaussian;
    use rand::{Rng, SeedableRng};

    pub(crate) fn test_window() -> WindowLight {
        let lobe = SphericalGaussian::new([1.0; 3], 10.0, V3::Y);
        WindowLight {
            c: V3::new(0.0, 2.0, -3.0),
            x: V3::new(1.5, 0.0, 0.0),
            y: V3::new(0.0, 0.0, 0.8),
            radiance: WindowRadiance {
                sun: lobe,
                sky: lobe,
                ground: lobe,
            },
            visible: false,
            enabled: true,
        }
    }

    fn test_box() -> BoxLamp {
        BoxLamp {
            c: V3::new(0.5, 1.0, -2.0),
            axes: [V3::new(0.4, 0.0, 0.0), V3::new(0.0, 0.2, 0.0), V3::new(0.0, 0.0, 0.1)],
            w: [2.0; 3],
            enabled: true,
        }
    }

    #[test]
    fn window_center_sample() {
        let l = Light::Window(test_window());
        let s = l.sample_surface(0.0, 0.0, 0.5).unwrap();
        assert_eq!(s.q, test_window().c);
        assert!((s.inv_pdf - 1.2).abs() < 1e-15);
    }

    #[test]
    fn disabled_light_cannot_be_sampled() {
        let mut w = test_window();
        w.enabled = false;
        assert!(matches!(
            Light::Window(w).sample_surface(0.0, 0.0, 0.0),
            Err(Error::DisabledLight(_))
        ));
    }

    #[test]
    fn box_face_frequencies_follow_area() {
        let b = test_box();
        let light = Light::Box(b.clone());
        let n = 6 * 20_000;
        let mut counts = [0usize; 6];
        for k in 0..n {
            let sel = (k as f64 + 0.5) / n as f64;
            let s = light.sample_surface(0.0, 0.0, sel).unwrap();
            // recover the face from the sample normal
            let face = (0..6)
                .find(|&f| (b.face_point(f, 0.0, 0.0).n - s.n).norm() < 1e-12)
                .unwrap();
            counts[face] += 1;
        }
        let total = b.area();
        for f in 0..6 {
            let empirical = counts[f] as f64 / n as f64 * total;
            let analytic = b.face_area(f);
            assert!((empirical / analytic - 1.0).abs() < 0.02, "face {f}");
        }
    }

    #[test]
    fn window_area_by_monte_carlo() {
        // hit-or-miss over the bounding square of the rectangle
        let w = test_window();
        let light = Light::Window(w.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let s = light.sample_surface(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0).unwrap();
            sum += s.inv_pdf;
            let rel = s.q - w.c;
            assert!((rel.dot(w.x) / w.x.norm2()).abs() <= 0.5 + 1e-12);
        }
        assert!((sum / n as f64 / 1.2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn sample_means_converge_to_centroid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for light in [Light::Window(test_window()), Light::Box(test_box())] {
            let n = 100_000;
            let pts: Vec<V3> = (0..n)
                .map(|_| {
                    light
                        .sample_surface(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen())
                        .unwrap()
                        .q
                })
                .collect();
            let mean = pts.iter().fold(V3::zero(), |a, &p| a + p) / n as f64;
            let var = pts.iter().fold(V3::zero(), |a, &p| {
                let d = p - mean;
                a + V3::new(d.x * d.x, d.y * d.y, d.z * d.z)
            }) / n as f64;
            let c = light.centroid();
            for i in 0..3 {
                let se = (var.axis(i) / n as f64).sqrt().max(1e-12);
                assert!((mean.axis(i) - c.axis(i)).abs() < 3.0 * se + 1e-12, "{} axis {i}", light.kind());
            }
        }
    }

    #[test]
    fn estimator_box_sampling_is_unbiased_for_area() {
        let light = Light::Box(test_box());
        let n = 60_000;
        let mean: f64 = (0..n)
            .map(|k| light.sample_for_estimator(0.1, -0.2, (k as f64 + 0.5) / n as f64).inv_pdf)
            .sum::<f64>()
            / n as f64;
        assert!((mean / light.area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn window_intersection() {
        let w = test_window();
        let origin = V3::new(0.2, 0.0, -3.1);
        let t = w.intersect(origin, V3::Y).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(w.intersect(origin, -V3::Y).is_none());
        assert!(w.intersect(V3::new(2.0, 0.0, -3.0), V3::Y).is_none());
    }

    #[test]
    fn validation_rejects_skewed_axes() {
        let mut w = test_window();
        w.y = V3::new(0.1, 0.0, 0.8);
        assert!(w.validate("lights[w]").is_err());
        let mut b = test_box();
        b.w = [-1.0, 0.0, 0.0];
        assert!(b.validate("lights[b]").is_err());
    }
}
