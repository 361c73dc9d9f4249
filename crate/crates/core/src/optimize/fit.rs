//! Fitting window radiance to a direct-shading target.
//!
//! The window geometry is fixed during the fit, so each receiver's view of
//! the window is a fixed set of stratified quadrature directions with
//! geometric weights. Shading is then a cheap sum of lobe evaluations that is
//! smooth in every radiance parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::light::params::UP;
use crate::light::WindowLight;
use crate::math::{Real, Rgb, V3};
use crate::scene::{Raster, Scene};
use crate::sg::{SphericalGaussian, WindowRadiance};

use super::grad::Objective;
use super::params::{project_radiance, push_radiance, radiance_from_raw, LOBE_PARAMS};
use super::{minimize, LossHistory, Observer, OptimConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Quadrature points per window side.
    pub grid: usize,
    /// Receiver pixels are taken every `stride` rows and columns.
    pub stride: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grid: 12,
            stride: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub radiance: WindowRadiance,
    pub initial_loss: f64,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: LossHistory,
}

/// Per receiver: quadrature directions with weights `cos_p |cos_q| dA / r^2`.
struct Kernel {
    rows: Vec<Vec<(V3, f64)>>,
    targets: Vec<Rgb<f64>>,
}

impl Kernel {
    fn build(scene: &Scene, target: &Raster, window: &WindowLight, opts: &FitOptions) -> Self {
        let n_w = window.normal();
        let da = window.area() / (opts.grid * opts.grid) as f64;
        let pixels: Vec<usize> = (0..scene.height())
            .step_by(opts.stride)
            .flat_map(|r| (0..scene.width()).step_by(opts.stride).map(move |c| (r, c)))
            .map(|(r, c)| r * scene.width() + c)
            .collect();
        let rows = pixels
            .par_iter()
            .map(|&p| {
                let (x, n) = (scene.point(p), scene.normal_at(p));
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(p as u64);
                let mut row = Vec::with_capacity(opts.grid * opts.grid);
                for i in 0..opts.grid {
                    for j in 0..opts.grid {
                        let u = -1.0 + 2.0 * (i as f64 + rng.gen::<f64>()) / opts.grid as f64;
                        let v = -1.0 + 2.0 * (j as f64 + rng.gen::<f64>()) / opts.grid as f64;
                        let d = window.point(u, v) - x;
                        let r2 = d.norm2();
                        if r2 < 1e-12 {
                            continue;
                        }
                        let l = d * (1.0 / r2.sqrt());
                        let cos_p = n.dot(l);
                        if cos_p <= 0.0 {
                            continue;
                        }
                        row.push((l, cos_p * n_w.dot(l).abs() * da / r2));
                    }
                }
                row
            })
            .collect();
        let targets = pixels.iter().map(|&p| target.rgb(p)).collect();
        Kernel { rows, targets }
    }
}

impl Objective for Kernel {
    fn eval<T: Real>(&self, x: &[T], _: usize) -> Result<T> {
        let radiance = radiance_from_raw(x);
        let per_pixel: Vec<T> = self
            .rows
            .par_iter()
            .zip(&self.targets)
            .map(|(row, t)| {
                let mut e = [T::zero(); 3];
                for &(l, g) in row {
                    let v = radiance.eval(l.lift());
                    for c in 0..3 {
                        e[c] += v[c] * g;
                    }
                }
                (0..3).fold(T::zero(), |acc, c| acc + (e[c] - t[c]).abs())
            })
            .collect();
        let n = (3 * self.targets.len()).max(1) as f64;
        Ok(per_pixel.into_iter().fold(T::zero(), |a, b| a + b) / n)
    }
}

fn initial_radiance(sun_dir: V3) -> WindowRadiance {
    // unit intensities, bandwidths mid-chart, sky up and ground down
    let lobe = |d: V3, lambda: f64| SphericalGaussian::new([1.0; 3], lambda, d);
    WindowRadiance {
        sun: lobe(sun_dir, (std::f64::consts::FRAC_PI_2 * 0.95).tan()),
        sky: lobe(UP, (std::f64::consts::FRAC_PI_4 * (1.0 - 1e-4)).tan()),
        ground: lobe(-UP, (std::f64::consts::FRAC_PI_4 * (1.0 - 1e-4)).tan()),
    }
}

/// L1 fit of sun, sky and ground lobes to `target` (unoccluded direct
/// shading from `window`), with the sun direction held at `sun_dir`.
pub fn fit_window(
    scene: &Scene,
    target: &Raster,
    window: &WindowLight,
    sun_dir: V3,
    cfg: &OptimConfig,
    opts: &FitOptions,
    progress: impl Observer,
) -> Result<FitResult> {
    target.check_shape("target", scene.width(), scene.height(), 3)?;
    if let Some(i) = target.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: "target".into(),
            index: i,
        });
    }
    if let Some(&v) = target.data().iter().find(|v| **v < 0.0) {
        return Err(Error::OutOfRange {
            param: "target".into(),
            value: v as f64,
            range: "[0, inf)".into(),
        });
    }
    if !(sun_dir.is_finite() && sun_dir.norm() > 1e-12) {
        return Err(Error::invalid("sun_dir", "must be a non-zero finite vector"));
    }
    if opts.grid == 0 || opts.stride == 0 {
        return Err(Error::invalid("fit", "grid and stride must be at least 1"));
    }
    let mut geometry = window.clone();
    geometry.radiance = initial_radiance(sun_dir.normalize());
    geometry.validate("window")?;
    let kernel = Kernel::build(scene, target, &geometry, opts);
    let mut names = Vec::new();
    let mut x0 = Vec::new();
    push_radiance(&mut names, &mut x0, "", &geometry.radiance)?;
    // the sun direction (coordinates 4..7) stays fixed
    let free: Vec<usize> = (0..x0.len()).filter(|i| !(4..LOBE_PARAMS).contains(i)).collect();
    let r = minimize(
        &kernel,
        &x0,
        &free,
        &names,
        cfg,
        "l1",
        project_radiance,
        |_, _| Ok(()),
        progress,
    )?;
    Ok(FitResult {
        radiance: radiance_from_raw(&r.x),
        initial_loss: r.initial_loss,
        loss: r.best_loss,
        iterations: r.iterations,
        converged: r.converged,
        history: r.history,
    })
}
