//! Scalar abstraction and small vector algebra.
//!
//! Every differentiable code path (lobe evaluation and sampling, light
//! geometry, the direct estimators) is generic over [`Real`], which is
//! implemented both by `f64` and by the forward-mode dual number [`Jet`].
//! Rendering with `Jet<N>` yields values together with `N` directional
//! derivatives at once.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + 'static
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn exp_m1(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    /// Larger of the two by value; the derivative follows the selected branch.
    fn max_r(self, other: Self) -> Self {
        if self.value() >= other.value() {
            self
        } else {
            other
        }
    }

    fn min_r(self, other: Self) -> Self {
        if self.value() <= other.value() {
            self
        } else {
            other
        }
    }

    fn max_c(self, c: f64) -> Self {
        if self.value() >= c {
            self
        } else {
            Self::cst(c)
        }
    }

    fn min_c(self, c: f64) -> Self {
        if self.value() <= c {
            self
        } else {
            Self::cst(c)
        }
    }

    fn clamp_c(self, lo: f64, hi: f64) -> Self {
        self.max_c(lo).min_c(hi)
    }

    fn is_finite(self) -> bool;
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tan(self) -> Self {
        f64::tan(self)
    }
    #[inline]
    fn atan(self) -> Self {
        f64::atan(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Forward-mode dual number carrying `N` tangent lanes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Jet { v, d: [0.0; N] }
    }

    /// A variable whose tangent is the unit vector along `lane`.
    pub fn variable(v: f64, lane: usize) -> Self {
        let mut d = [0.0; N];
        d[lane] = 1.0;
        Jet { v, d }
    }

    pub fn with_tangent(v: f64, d: [f64; N]) -> Self {
        Jet { v, d }
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Jet { v, d }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for i in 0..N {
            self.d[i] += o.d[i];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for i in 0..N {
            self.d[i] -= o.d[i];
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Jet { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * o.d[i]) * inv;
        }
        Jet { v, d }
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for x in &mut self.d {
            *x = -*x;
        }
        self
    }
}

impl<const N: usize> AddAssign for Jet<N> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const N: usize> SubAssign for Jet<N> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<const N: usize> MulAssign for Jet<N> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: f64) -> Self {
        self.v += o;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: f64) -> Self {
        self.v -= o;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, o: f64) -> Self {
        self.v *= o;
        for x in &mut self.d {
            *x *= o;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self * (1.0 / o)
    }
}

impl<const N: usize> Real for Jet<N> {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn exp_m1(self) -> Self {
        self.chain(self.v.exp_m1(), self.v.exp())
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn ln_1p(self) -> Self {
        self.chain(self.v.ln_1p(), 1.0 / (1.0 + self.v))
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        self.chain(t, 1.0 + t * t)
    }
    fn atan(self) -> Self {
        self.chain(self.v.atan(), 1.0 / (1.0 + self.v * self.v))
    }
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite())
    }
}

/// 3-vector over any [`Real`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct V3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

pub type Rgb<T = f64> = [T; 3];

impl<T: Real> V3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        V3 { x, y, z }
    }

    pub fn zero() -> Self {
        V3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(v: V3<f64>) -> Self {
        V3::new(T::cst(v.x), T::cst(v.y), T::cst(v.z))
    }

    pub fn from_array(a: [T; 3]) -> Self {
        V3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn value(self) -> V3<f64> {
        V3::new(self.x.value(), self.y.value(), self.z.value())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        V3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm2(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm2().sqrt()
    }

    #[inline]
    pub fn normalize(self) -> Self {
        self / self.norm()
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        V3::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn add_f(self, o: V3<f64>) -> Self {
        V3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    #[inline]
    pub fn sub_f(self, o: V3<f64>) -> Self {
        V3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    #[inline]
    pub fn dot_f(self, o: V3<f64>) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component of largest absolute value along with its index.
    pub fn max_abs_axis(self) -> usize {
        let a = [self.x.value().abs(), self.y.value().abs(), self.z.value().abs()];
        if a[0] >= a[1] && a[0] >= a[2] {
            0
        } else if a[1] >= a[2] {
            1
        } else {
            2
        }
    }

    pub fn axis(self, i: usize) -> T {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl V3<f64> {
    pub const X: V3<f64> = V3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: V3<f64> = V3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: V3<f64> = V3 { x: 0.0, y: 0.0, z: 1.0 };

    pub fn lift<T: Real>(self) -> V3<T> {
        V3::from_f64(self)
    }

    pub fn min_comp(self, o: Self) -> Self {
        V3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_comp(self, o: Self) -> Self {
        V3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl<T: Real> Add for V3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        V3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for V3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        V3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for V3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        V3::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<f64> for V3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        V3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for V3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        let inv = s.recip();
        V3::new(self.x * inv, self.y * inv, self.z * inv)
    }
}

impl<T: Real> AddAssign for V3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

pub fn rgb_scale<T: Real>(c: Rgb<T>, s: T) -> Rgb<T> {
    [c[0] * s, c[1] * s, c[2] * s]
}

pub fn rgb_add<T: Real>(a: Rgb<T>, b: Rgb<T>) -> Rgb<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn rgb_zero<T: Real>() -> Rgb<T> {
    [T::zero(); 3]
}

pub fn rgb_value<T: Real>(c: Rgb<T>) -> Rgb<f64> {
    [c[0].value(), c[1].value(), c[2].value()]
}

pub fn rgb_lift<T: Real>(c: Rgb<f64>) -> Rgb<T> {
    [T::cst(c[0]), T::cst(c[1]), T::cst(c[2])]
}

/// Orthonormal tangent pair for a unit vector `d`.
///
/// The helper axis is the canonical axis along the smallest-magnitude
/// component of `d`, so the frame is a fixed smooth function of `d` away from
/// the measure-zero set where two components tie.
pub fn tangent_frame<T: Real>(d: V3<T>) -> (V3<T>, V3<T>) {
    let a = [d.x.value().abs(), d.y.value().abs(), d.z.value().abs()];
    let helper = if a[0] <= a[1] && a[0] <= a[2] {
        V3::X
    } else if a[1] <= a[2] {
        V3::Y
    } else {
        V3::Z
    };
    let e: V3<T> = helper.lift();
    let t = (e - d.scale(e.dot(d))).normalize();
    let b = d.cross(t);
    (t, b)
}

pub const FRAC_2_PI: f64 = 2.0 / PI;

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn jet_elementary_derivatives_match_finite_differences() {
        let x = 0.37;
        let j = Jet::<1>::variable(x, 0);
        let cases: Vec<(Jet<1>, f64)> = vec![
            (j.sqrt(), fd(f64::sqrt, x)),
            (j.exp(), fd(f64::exp, x)),
            (j.exp_m1(), fd(f64::exp_m1, x)),
            (j.ln(), fd(f64::ln, x)),
            (j.ln_1p(), fd(f64::ln_1p, x)),
            (j.sin(), fd(f64::sin, x)),
            (j.cos(), fd(f64::cos, x)),
            (j.tan(), fd(f64::tan, x)),
            (j.atan(), fd(f64::atan, x)),
            ((j * j) / (j + 1.0), fd(|t| t * t / (t + 1.0), x)),
        ];
        for (jet, expected) in cases {
            assert!((jet.d[0] - expected).abs() < 1e-7, "{jet:?} vs {expected}");
        }
    }

    #[test]
    fn tangent_frame_is_orthonormal() {
        for d in [
            V3::new(0.0, 0.0, 1.0),
            V3::new(1.0, 2.0, -3.0).normalize(),
            V3::new(-0.3, 0.9, 0.1).normalize(),
        ] {
            let (t, b) = tangent_frame(d);
            assert!(t.dot(d).abs() < 1e-12);
            assert!(b.dot(d).abs() < 1e-12);
            assert!(t.dot(b).abs() < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
            // right-handed: t x b = d
            assert!((t.cross(b) - d).norm() < 1e-12);
        }
    }
}
