//! Losses, pathwise gradients, window fitting and light refinement.

pub mod fit;
pub mod grad;
pub mod loss;
pub mod params;
pub mod refine;

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_window, FitOptions, FitResult};
pub use grad::{central_difference, directional, value_and_grad, Objective};
pub use loss::{chamfer_rmse, l1, l2, loss_geo, loss_src, sig_loss};
pub use params::LightChart;
pub use refine::{refine_lights, RefineOptions, RefineResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub sun: f64,
    pub sky: f64,
    pub ground: f64,
    pub w: f64,
    pub d: f64,
    pub lambda: f64,
    /// Area term of the geometry loss.
    pub area: f64,
    /// Shading term of the per-pixel lighting loss.
    pub r: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            sun: 1.0,
            sky: 0.2,
            ground: 0.2,
            w: 0.001,
            d: 1.0,
            lambda: 0.001,
            area: 0.8,
            r: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sun", self.sun),
            ("sky", self.sky),
            ("ground", self.ground),
            ("w", self.w),
            ("d", self.d),
            ("lambda", self.lambda),
            ("area", self.area),
            ("r", self.r),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    param: format!("weights.{name}"),
                    value: v,
                    range: "[0, inf)".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// When set, the learning rate decays geometrically to this value at the
    /// last iteration.
    pub lr_final: Option<f64>,
    pub max_iters: usize,
    /// Relative improvement of the best loss that counts as progress.
    pub tolerance: f64,
    /// Iterations without progress before stopping.
    pub patience: usize,
    /// Consecutive loss increases treated as divergence.
    pub divergence_streak: usize,
    /// Reuse one sample pattern for every iteration.
    pub frozen_sampling: bool,
    pub spp: usize,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_final: None,
            max_iters: 2000,
            tolerance: 1e-5,
            patience: 100,
            divergence_streak: 50,
            frozen_sampling: true,
            spp: 16,
            seed: 0,
        }
    }
}

impl OptimConfig {
    /// Preset for fitting radiance to a target: a larger step that decays to
    /// the default rate.
    pub fn fitting() -> Self {
        OptimConfig {
            lr: 2e-2,
            lr_final: Some(1e-4),
            ..OptimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |param: &str, value: f64, range: &str| Error::OutOfRange {
            param: param.into(),
            value,
            range: range.into(),
        };
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(bad("optim.lr", self.lr, "(0, inf)"));
        }
        if let Some(f) = self.lr_final {
            if !(f > 0.0 && f.is_finite()) {
                return Err(bad("optim.lr_final", f, "(0, inf)"));
            }
        }
        for (name, b) in [("optim.beta1", self.beta1), ("optim.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(bad(name, b, "[0, 1)"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("optim.max_iters", "must be at least 1"));
        }
        if self.spp == 0 {
            return Err(Error::invalid("optim.spp", "must be at least 1"));
        }
        if self.divergence_streak == 0 {
            return Err(Error::invalid("optim.divergence_streak", "must be at least 1"));
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        match self.lr_final {
            Some(f) if self.max_iters > 1 => {
                let t = iteration as f64 / (self.max_iters - 1) as f64;
                self.lr * (f / self.lr).powf(t)
            }
            _ => self.lr,
        }
    }

    /// Seed of the sample pattern used at `iteration`.
    pub fn seed_at(&self, iteration: usize) -> u64 {
        if self.frozen_sampling {
            self.seed
        } else {
            self.seed.wrapping_add(iteration as u64)
        }
    }
}

/// Adam over the coordinates it is stepped with.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, cfg: &OptimConfig) -> Self {
        Adam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            x[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub total: f64,
    /// Named loss terms, in the order of [`LossHistory::terms`].
    pub terms: Vec<f64>,
    pub best: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossHistory {
    pub terms: Vec<String>,
    pub rows: Vec<HistoryRow>,
}

impl LossHistory {
    pub fn new(terms: &[&str]) -> Self {
        LossHistory {
            terms: terms.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "total".into()];
        header.extend(self.terms.iter().cloned());
        header.extend(["best".to_string(), "lr".into()]);
        let csv_err = |e: csv::Error| Error::invalid("loss_history", e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string(), r.total.to_string()];
            rec.extend(r.terms.iter().map(|t| t.to_string()));
            rec.extend([r.best.to_string(), r.lr.to_string()]);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("loss_history", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Progress report passed to callers after each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Progress {
    pub iteration: usize,
    pub loss: f64,
    pub best: f64,
}

/// Receives progress after each iteration. Returning `Break` ends the run
/// with the best parameters seen so far.
pub trait Observer {
    fn observe(&mut self, p: Progress) -> ControlFlow<()>;
}

impl<F: FnMut(Progress)> Observer for F {
    fn observe(&mut self, p: Progress) -> ControlFlow<()> {
        self(p);
        ControlFlow::Continue(())
    }
}

/// Wraps a callback that may stop the run.
pub struct Stoppable<F>(pub F);

impl<F: FnMut(Progress) -> ControlFlow<()>> Observer for Stoppable<F> {
    fn observe(&mut self, p: Progress) -> ControlFlow<()> {
        (self.0)(p)
    }
}

#[derive(Clone, Debug)]
pub struct Minimized {
    pub x: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: LossHistory,
}

/// Projected Adam descent with best-so-far tracking, plateau stopping and
/// divergence detection. `check` may reject a state (for instance one where
/// the loss has no gradient) after its value and gradient are known.
#[allow(clippy::too_many_arguments)]
pub fn minimize(
    obj: &impl Objective,
    x0: &[f64],
    free: &[usize],
    names: &[String],
    cfg: &OptimConfig,
    term: &str,
    project: impl Fn(&mut [f64]),
    check: impl Fn(f64, &[f64]) -> Result<()>,
    mut progress: impl Observer,
) -> Result<Minimized> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    project(&mut x);
    let mut adam = Adam::new(x.len(), cfg);
    let mut history = LossHistory::new(&[term]);
    let mut best = (f64::INFINITY, x.clone());
    let mut initial_loss = f64::NAN;
    let mut last_progress = 0usize;
    let mut prev = f64::INFINITY;
    let mut streak = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        let (loss, g) = value_and_grad(obj, &x, free, names, it)?;
        check(loss, &g)?;
        if it == 0 {
            initial_loss = loss;
        }
        if loss < best.0 {
            if loss < best.0 * (1.0 - cfg.tolerance) || !best.0.is_finite() {
                last_progress = it;
            }
            best = (loss, x.clone());
        }
        streak = if loss > prev { streak + 1 } else { 0 };
        prev = loss;
        let lr = cfg.lr_at(it);
        history.rows.push(HistoryRow {
            iteration: it,
            total: loss,
            terms: vec![loss],
            best: best.0,
            lr,
        });
        let flow = progress.observe(Progress {
            iteration: it,
            loss,
            best: best.0,
        });
        iterations = it + 1;
        if flow.is_break() {
            break;
        }
        if streak >= cfg.divergence_streak {
            return Err(Error::Divergence { iteration: it, streak });
        }
        if best.0 == 0.0 || it - last_progress >= cfg.patience {
            converged = true;
            break;
        }
        adam.step(&mut x, &g, lr);
        project(&mut x);
    }
    Ok(Minimized {
        x: best.1,
        initial_loss,
        best_loss: best.0,
        iterations,
        converged,
        history,
    })
}
