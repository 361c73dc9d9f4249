//! Constrained parameter transforms used as optimization charts.
//!
//! Raw values live in bounded boxes and map onto valid light fields:
//! intensities through `tan(pi/2 * w~)`, bandwidths through per-lobe clamped
//! tangent maps, invisible-light centers through a frustum-excluding
//! spherical chart, and window axes through an up-vector offset.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::math::{Real, V3, FRAC_2_PI};
use crate::scene::CameraIntrinsics;
use crate::sg::Lobe;

pub const UP: V3 = V3 { x: 0.0, y: 1.0, z: 0.0 };

/// `(lambda_min, lambda_max)` of the bandwidth chart, per lobe.
pub fn lambda_range(lobe: Lobe) -> (f64, f64) {
    match lobe {
        Lobe::Sun => (0.9, 1.0 - 1e-6),
        Lobe::Sky | Lobe::Ground => (0.0, 1.0 - 1e-4),
    }
}

/// Admissible bandwidth interval `[tan(pi/2 min), tan(pi/2 max)]` of a lobe.
pub fn lambda_bounds(lobe: Lobe) -> (f64, f64) {
    let (lo, hi) = lambda_range(lobe);
    ((FRAC_PI_2 * lo).tan(), (FRAC_PI_2 * hi).tan())
}

fn out_of_range(param: &str, value: f64, range: &str) -> Error {
    Error::OutOfRange {
        param: param.into(),
        value,
        range: range.into(),
    }
}

pub fn intensity_map(raw: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&raw) {
        return Err(out_of_range("w~", raw, "[0, 1)"));
    }
    Ok(intensity_from_raw(raw))
}

#[inline]
pub fn intensity_from_raw<T: Real>(raw: T) -> T {
    (raw * FRAC_PI_2).tan()
}

pub fn intensity_inverse(w: f64) -> Result<f64> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(out_of_range("w", w, "[0, inf)"));
    }
    Ok(w.atan() * FRAC_2_PI)
}

pub fn bandwidth_map(raw: f64, lobe: Lobe) -> Result<f64> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(out_of_range("lambda~", raw, "[0, 1]"));
    }
    Ok(bandwidth_from_raw(raw, lobe))
}

#[inline]
pub fn bandwidth_from_raw<T: Real>(raw: T, lobe: Lobe) -> T {
    let (lo, hi) = lambda_range(lobe);
    ((raw * (hi - lo) + lo) * FRAC_PI_2).tan()
}

pub fn bandwidth_inverse(lambda: f64, lobe: Lobe) -> Result<f64> {
    let (lo, hi) = lambda_range(lobe);
    let (bmin, bmax) = lambda_bounds(lobe);
    // allow a few ulps of slack at the ends of the interval
    let slack = 1e-9 * bmax;
    if !(lambda >= bmin - slack && lambda <= bmax + slack) {
        return Err(out_of_range(
            &format!("{}.lambda", lobe.name()),
            lambda,
            &format!("[{bmin}, {bmax}]"),
        ));
    }
    let raw = (lambda.atan() * FRAC_2_PI - lo) / (hi - lo);
    Ok(raw.clamp(0.0, 1.0))
}

/// Center of an invisible light from its spherical chart.
///
/// The chart frame is the camera frame with `z_c = +z`, pointing away from
/// the view frustum. With `theta <= pi - f` the center makes an angle of at
/// least `f` with the optical axis `-z`.
pub fn frustum_center(theta: f64, phi: f64, length: f64, camera: &CameraIntrinsics) -> Result<V3> {
    let max_theta = PI - camera.fov_short_axis;
    if !(0.0..=max_theta).contains(&theta) {
        return Err(out_of_range("theta_c", theta, &format!("[0, {max_theta}]")));
    }
    if !(-PI..=PI).contains(&phi) {
        return Err(out_of_range("phi_c", phi, "[-pi, pi]"));
    }
    if !(length >= 0.0 && length.is_finite()) {
        return Err(out_of_range("l_c", length, "[0, inf)"));
    }
    Ok(frustum_center_raw(theta, phi, length))
}

pub fn frustum_center_raw<T: Real>(theta: T, phi: T, length: T) -> V3<T> {
    let s = theta.sin();
    V3::new(s * phi.cos(), s * phi.sin(), theta.cos()).scale(length)
}

/// Inverse of [`frustum_center`]: `(theta, phi, length)`.
pub fn frustum_center_inverse(c: V3) -> (f64, f64, f64) {
    let length = c.norm();
    if length == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (c.z / length).clamp(-1.0, 1.0).acos();
    let phi = c.y.atan2(c.x);
    (theta, phi, length)
}

/// Window axes `y = normalize(y~ + u) l_y`, `x = normalize(z x y) l_x`.
pub fn window_axes(y_offset: V3, z: V3, lx: f64, ly: f64) -> Result<(V3, V3)> {
    let yd = y_offset + UP;
    if yd.norm() < 1e-12 {
        return Err(Error::Degenerate("y~ + up is zero".into()));
    }
    let y_dir = yd.normalize();
    let cross = z.cross(y_dir);
    if cross.norm() < 1e-12 {
        return Err(Error::Degenerate("window z is parallel to y".into()));
    }
    Ok((cross.normalize().scale(lx), y_dir.scale(ly)))
}

/// Box axes from Euler angles (`R = Rz(gamma) Ry(beta) Rx(alpha)`) and lengths.
pub fn box_axes_from_euler<T: Real>(angles: [T; 3], lengths: [T; 3]) -> [V3<T>; 3] {
    let (sa, ca) = (angles[0].sin(), angles[0].cos());
    let (sb, cb) = (angles[1].sin(), angles[1].cos());
    let (sg, cg) = (angles[2].sin(), angles[2].cos());
    let col0 = V3::new(cg * cb, sg * cb, -sb);
    let col1 = V3::new(cg * sb * sa - sg * ca, sg * sb * sa + cg * ca, cb * sa);
    let col2 = V3::new(cg * sb * ca + sg * sa, sg * sb * ca - cg * sa, cb * ca);
    [col0.scale(lengths[0]), col1.scale(lengths[1]), col2.scale(lengths[2])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn intensity_values() {
        assert_eq!(intensity_map(0.0).unwrap(), 0.0);
        assert!((intensity_map(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(intensity_map(1.0).is_err());
        assert!(intensity_map(-0.1).is_err());
    }

    #[test]
    fn intensity_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let raw: f64 = rng.gen_range(0.0..0.999);
            let back = intensity_inverse(intensity_map(raw).unwrap()).unwrap();
            assert!((back - raw).abs() < 1e-9);
        }
    }

    #[test]
    fn bandwidth_values() {
        let sun0 = bandwidth_map(0.0, Lobe::Sun).unwrap();
        assert!((sun0 - (0.45 * PI).tan()).abs() < 1e-12);
        assert!((sun0 - 6.3138).abs() < 1e-4);
        assert_eq!(bandwidth_map(0.0, Lobe::Sky).unwrap(), 0.0);
        let sun1 = bandwidth_map(1.0, Lobe::Sun).unwrap();
        assert!(sun1.is_finite() && sun1 > 1e5);
        // tan(pi/2 (1 - e)) = cot(pi e / 2) ~ 2 / (pi e)
        assert!((sun1 / (2.0 / (PI * 1e-6)) - 1.0).abs() < 1e-6);
        assert!(bandwidth_map(1.5, Lobe::Sky).is_err());
    }

    #[test]
    fn bandwidth_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for lobe in Lobe::ALL {
            for _ in 0..1000 {
                let raw: f64 = rng.gen_range(0.0..=1.0);
                let lambda = bandwidth_map(raw, lobe).unwrap();
                let back = bandwidth_inverse(lambda, lobe).unwrap();
                assert!((back - raw).abs() < 1e-9, "{lobe:?} {raw} {back}");
            }
        }
        assert!(bandwidth_inverse(1.0, Lobe::Sun).is_err());
    }

    #[test]
    fn frustum_center_axis_and_origin() {
        let cam = CameraIntrinsics::new(1.0, 4, 3).unwrap();
        let c = frustum_center(0.0, 0.3, 2.5, &cam).unwrap();
        assert!((c - V3::Z.scale(2.5)).norm() < 1e-15);
        assert_eq!(frustum_center(1.0, 1.0, 0.0, &cam).unwrap(), V3::zero());
        assert!(frustum_center(PI - 0.9, 0.0, 1.0, &cam).is_err());
        assert!(frustum_center(0.5, 4.0, 1.0, &cam).is_err());
    }

    #[test]
    fn frustum_center_inverse_round_trip() {
        let (t, p, l) = frustum_center_inverse(frustum_center_raw(0.8, -2.1, 3.0));
        assert!((t - 0.8).abs() < 1e-12 && (p + 2.1).abs() < 1e-12 && (l - 3.0).abs() < 1e-12);
    }

    #[test]
    fn window_axes_examples() {
        let (x, y) = window_axes(V3::zero(), V3::Z, 1.0, 1.0).unwrap();
        assert!((y - UP).norm() < 1e-15);
        assert!((x - V3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(window_axes(-UP, V3::Z, 1.0, 1.0).is_err());
        assert!(window_axes(V3::zero(), UP, 1.0, 1.0).is_err());
    }

    #[test]
    fn euler_axes_are_orthogonal() {
        let a = box_axes_from_euler([0.3, -1.1, 2.0], [1.0, 2.0, 0.5]);
        assert!(a[0].dot(a[1]).abs() < 1e-12);
        assert!(a[1].dot(a[2]).abs() < 1e-12);
        assert!(a[0].dot(a[2]).abs() < 1e-12);
        assert!((a[1].norm() - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn window_axes_are_orthogonal_with_requested_lengths(
            yo in prop::array::uniform3(-0.5f64..0.5),
            z in prop::array::uniform3(-1.0f64..1.0),
            lx in 0.1f64..3.0,
            ly in 0.1f64..3.0,
        ) {
            if let Ok((x, y)) = window_axes(V3::from_array(yo), V3::from_array(z), lx, ly) {
                prop_assert!(x.dot(y).abs() < 1e-6);
                prop_assert!((x.norm() - lx).abs() < 1e-9);
                prop_assert!((y.norm() - ly).abs() < 1e-9);
            }
        }

        #[test]
        fn frustum_centers_stay_outside_the_view_cone(
            theta_frac in 0.0f64..=1.0,
            phi in -PI..PI,
            length in 0.1f64..10.0,
        ) {
            let cam = CameraIntrinsics::new(1.0, 320, 240).unwrap();
            let theta = theta_frac * (PI - cam.fov_short_axis);
            let c = frustum_center(theta, phi, length, &cam).unwrap();
            let angle = (-c.z / c.norm()).clamp(-1.0, 1.0).acos();
            prop_assert!(angle >= cam.fov_short_axis / 2.0 - 1e-12);
        }
    }
}
