//! Loss functions over shadings, point sets, light parameters and shadows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::light::Light;
use crate::math::{Real, V3};
use crate::scene::Raster;
use crate::sg::{SphericalGaussian, WindowRadiance};

use super::LossWeights;

fn same_shape(field: &str, a: &Raster, b: &Raster) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            field: field.into(),
            expected: format!("{}x{}x{}", a.width(), a.height(), a.channels()),
            found: format!("{}x{}x{}", b.width(), b.height(), b.channels()),
        })
    }
}

/// Mean absolute difference over pixels and channels.
pub fn l1(e: &Raster, target: &Raster) -> Result<f64> {
    same_shape("target", e, target)?;
    let sum: f64 = e
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / e.data().len().max(1) as f64)
}

/// Mean squared difference over pixels and channels.
pub fn l2(e: &Raster, target: &Raster) -> Result<f64> {
    same_shape("target", e, target)?;
    let sum: f64 = e
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(sum / e.data().len().max(1) as f64)
}

fn directed_rms(p: &[V3], q: &[V3]) -> f64 {
    let sum: f64 = p
        .par_iter()
        .map(|a| q.iter().map(|b| (*a - *b).norm2()).fold(f64::INFINITY, f64::min))
        .sum();
    (sum / p.len() as f64).sqrt()
}

/// Mean of the two directed root-mean-square nearest-neighbor distances.
pub fn chamfer_rmse(p: &[V3], q: &[V3]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(0.5 * (directed_rms(p, q) + directed_rms(q, p)))
}

/// `n` area-uniform points on the surface of `light`.
pub fn surface_points(light: &Light, n: usize, seed: u64) -> Result<Vec<V3>> {
    let mut l = light.clone();
    l.set_enabled(true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (u, v, s) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen::<f64>());
            l.sample_surface(u, v, s).map(|s| s.q)
        })
        .collect()
}

/// Chamfer distance between `n` surface samples of each light plus the
/// weighted absolute area difference.
pub fn loss_geo(light: &Light, gt: &Light, weights: &LossWeights, n: usize, seed: u64) -> Result<f64> {
    if light.kind() != gt.kind() {
        return Err(Error::Incompatible(format!("{} vs {}", light.kind(), gt.kind())));
    }
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    let p = surface_points(light, n, seed)?;
    let q = surface_points(gt, n, seed)?;
    Ok(chamfer_rmse(&p, &q)? + weights.area * (light.area() - gt.area()).abs())
}

fn lobe_term<T: Real>(a: &SphericalGaussian<T>, b: &SphericalGaussian<f64>, wt: &LossWeights) -> T {
    let mut dw = T::zero();
    for c in 0..3 {
        let d = (a.w[c] + 1.0).ln() - (b.w[c] + 1.0).ln();
        dw += d * d;
    }
    let dd = (a.d - b.d.lift()).norm2();
    let dl = (a.lambda + 1.0).ln() - (b.lambda + 1.0).ln();
    dw * wt.w + dd * wt.d + dl * dl * wt.lambda
}

/// Weighted log-intensity, direction and log-bandwidth distance of two
/// window radiances.
pub fn loss_src<T: Real>(r: &WindowRadiance<T>, gt: &WindowRadiance, wt: &LossWeights) -> T {
    lobe_term(&r.sun, &gt.sun, wt) * wt.sun
        + lobe_term(&r.sky, &gt.sky, wt) * wt.sky
        + lobe_term(&r.ground, &gt.ground, wt) * wt.ground
}

/// Steps of the scale-invariant gradient loss.
pub const SIG_STEPS: [usize; 4] = [1, 2, 4, 8];
const SIG_EPS: f64 = 1e-6;

fn normalized_diff(a: f64, b: f64) -> f64 {
    let den = (a + b).abs();
    if den < SIG_EPS {
        0.0
    } else {
        (a - b) / den
    }
}

/// Sum over steps `h` of the squared differences of the normalized
/// finite-difference fields of `s` and `s_gt`, per channel.
pub fn sig_loss(s: &Raster, s_gt: &Raster) -> Result<f64> {
    same_shape("s_gt", s, s_gt)?;
    let (w, h, ch) = (s.width(), s.height(), s.channels());
    let mut total = 0.0;
    for step in SIG_STEPS {
        for r in 0..h {
            for c in 0..w {
                for k in 0..ch {
                    let at = |img: &Raster, rr: usize, cc: usize| img.get(rr, cc, k) as f64;
                    if r + step < h {
                        let g = normalized_diff(at(s, r + step, c), at(s, r, c));
                        let g_gt = normalized_diff(at(s_gt, r + step, c), at(s_gt, r, c));
                        total += (g - g_gt) * (g - g_gt);
                    }
                    if c + step < w {
                        let g = normalized_diff(at(s, r, c + step), at(s, r, c));
                        let g_gt = normalized_diff(at(s_gt, r, c + step), at(s_gt, r, c));
                        total += (g - g_gt) * (g - g_gt);
                    }
                }
            }
        }
    }
    Ok(total)
}
