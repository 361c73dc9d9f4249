//! Spherical Gaussian radiance lobes `w * exp(lambda * (d.l - 1))`.
//!
//! Everything here is generic over [`Real`] so the same code yields pathwise
//! derivatives when evaluated on [`Jet`](crate::math::Jet)s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{rgb_lift, rgb_scale, rgb_value, tangent_frame, Real, Rgb, V3};

/// Below this bandwidth the lobe is treated as its small-lambda series.
const SMALL_LAMBDA: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalGaussian<T = f64> {
    pub w: Rgb<T>,
    pub lambda: T,
    /// Unit lobe axis.
    pub d: V3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowRadiance<T = f64> {
    pub sun: SphericalGaussian<T>,
    pub sky: SphericalGaussian<T>,
    pub ground: SphericalGaussian<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lobe {
    Sun,
    Sky,
    Ground,
}

impl Lobe {
    pub const ALL: [Lobe; 3] = [Lobe::Sun, Lobe::Sky, Lobe::Ground];

    pub fn name(self) -> &'static str {
        match self {
            Lobe::Sun => "sun",
            Lobe::Sky => "sky",
            Lobe::Ground => "ground",
        }
    }
}

/// `(1 - exp(-2 lambda)) / lambda`, continuous at zero where it tends to 2.
fn mass_factor<T: Real>(lambda: T) -> T {
    if lambda.value() < SMALL_LAMBDA {
        // 2 - 2 lambda + O(lambda^2)
        T::cst(2.0) - lambda * 2.0
    } else {
        -(lambda * -2.0).exp_m1() / lambda
    }
}

impl<T: Real> SphericalGaussian<T> {
    pub fn new(w: Rgb<T>, lambda: T, d: V3<T>) -> Self {
        SphericalGaussian { w, lambda, d }
    }

    pub fn lift(g: &SphericalGaussian<f64>) -> Self {
        SphericalGaussian {
            w: rgb_lift(g.w),
            lambda: T::cst(g.lambda),
            d: V3::from_f64(g.d),
        }
    }

    pub fn value(&self) -> SphericalGaussian<f64> {
        SphericalGaussian {
            w: rgb_value(self.w),
            lambda: self.lambda.value(),
            d: self.d.value(),
        }
    }

    /// Radiance toward unit direction `l`.
    pub fn eval(&self, l: V3<T>) -> Rgb<T> {
        rgb_scale(self.w, self.falloff(l))
    }

    /// `exp(lambda (d.l - 1))`, the lobe shape without intensity.
    pub fn falloff(&self, l: V3<T>) -> T {
        (self.lambda * (self.d.dot(l) - 1.0)).exp()
    }

    /// Exact integral of the lobe over the sphere, `2 pi w (1 - e^{-2 lambda}) / lambda`.
    pub fn sphere_integral(&self) -> Rgb<T> {
        rgb_scale(self.w, mass_factor(self.lambda) * (2.0 * PI))
    }

    /// Solid-angle density proportional to the lobe shape.
    pub fn pdf(&self, l: V3<T>) -> T {
        self.falloff(l) / (mass_factor(self.lambda) * (2.0 * PI))
    }

    /// CDF of the polar angle measured from `d`.
    pub fn cdf_theta(&self, theta: T) -> T {
        if self.lambda.value() < SMALL_LAMBDA {
            return (T::one() - theta.cos()) * 0.5;
        }
        let num = -(self.lambda * (theta.cos() - 1.0)).exp_m1();
        let den = -(self.lambda * -2.0).exp_m1();
        num / den
    }

    /// Cosine of the polar angle for the stratum coordinate `v` in `[-1, 1]`,
    /// inverting [`cdf_theta`](Self::cdf_theta).
    pub fn sample_cos_theta(&self, v: T) -> T {
        let t = (v + 1.0) * 0.5;
        let c = if self.lambda.value() < SMALL_LAMBDA {
            T::one() - t * 2.0
        } else if t.value() <= 0.5 {
            // 1 + log(1 - t (1 - e^{-2 lambda})) / lambda
            T::one() + (t * (self.lambda * -2.0).exp_m1()).ln_1p() / self.lambda
        } else {
            // same value written as (1 - t) + t e^{-2 lambda}, which avoids
            // cancellation near the antipode
            let arg = (-t + 1.0) + t * (self.lambda * -2.0).exp();
            T::one() + arg.max_c(f64::MIN_POSITIVE).ln() / self.lambda
        };
        c.clamp_c(-1.0, 1.0)
    }

    pub fn sample_theta(&self, v: f64) -> f64 {
        self.sample_cos_theta(T::cst(v)).value().acos()
    }

    /// Maps `(u, v)` in `[-1, 1]^2` to a direction distributed with [`pdf`](Self::pdf).
    ///
    /// `phi = u pi` and the polar angle comes from the inverse CDF. The local
    /// frame around `d` is [`tangent_frame`].
    pub fn sample(&self, u: T, v: T) -> V3<T> {
        let cos_t = self.sample_cos_theta(v);
        // (1 - c)(1 + c) keeps precision for narrow lobes
        let sin2 = ((T::one() - cos_t) * (T::one() + cos_t)).max_c(0.0);
        let sin_t = if sin2.value() > 0.0 { sin2.sqrt() } else { T::zero() };
        let phi = u * PI;
        let (tx, ty) = tangent_frame(self.d);
        tx.scale(sin_t * phi.cos()) + ty.scale(sin_t * phi.sin()) + self.d.scale(cos_t)
    }
}

impl SphericalGaussian<f64> {
    pub fn validate(&self, field: &str) -> Result<()> {
        for (i, &c) in self.w.iter().enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::OutOfRange {
                    param: format!("{field}.w[{i}]"),
                    value: c,
                    range: "[0, inf)".into(),
                });
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::OutOfRange {
                param: format!("{field}.lambda"),
                value: self.lambda,
                range: "[0, inf)".into(),
            });
        }
        let n = self.d.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::OutOfRange {
                param: format!("{field}.d"),
                value: n,
                range: "|d| = 1".into(),
            });
        }
        Ok(())
    }
}

impl<T: Real> WindowRadiance<T> {
    pub fn lift(r: &WindowRadiance<f64>) -> Self {
        WindowRadiance {
            sun: SphericalGaussian::lift(&r.sun),
            sky: SphericalGaussian::lift(&r.sky),
            ground: SphericalGaussian::lift(&r.ground),
        }
    }

    pub fn value(&self) -> WindowRadiance<f64> {
        WindowRadiance {
            sun: self.sun.value(),
            sky: self.sky.value(),
            ground: self.ground.value(),
        }
    }

    pub fn lobe(&self, lobe: Lobe) -> &SphericalGaussian<T> {
        match lobe {
            Lobe::Sun => &self.sun,
            Lobe::Sky => &self.sky,
            Lobe::Ground => &self.ground,
        }
    }

    pub fn lobe_mut(&mut self, lobe: Lobe) -> &mut SphericalGaussian<T> {
        match lobe {
            Lobe::Sun => &mut self.sun,
            Lobe::Sky => &mut self.sky,
            Lobe::Ground => &mut self.ground,
        }
    }

    /// Sum of the three lobes toward `l`.
    pub fn eval(&self, l: V3<T>) -> Rgb<T> {
        let a = self.sun.eval(l);
        let b = self.sky.eval(l);
        let c = self.ground.eval(l);
        [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]]
    }
}

impl WindowRadiance<f64> {
    pub fn validate(&self, field: &str) -> Result<()> {
        for lobe in Lobe::ALL {
            self.lobe(lobe).validate(&format!("{field}.{}", lobe.name()))?;
        }
        Ok(())
    }
}
