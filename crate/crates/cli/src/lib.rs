//! `lumiedit` command line. Every command is a thin wrapper over library
//! calls in `lumiedit-core` and `lumiedit-service`.

mod descriptor;

use std::fmt;
use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use lumiedit_core::light::desc::RadianceDesc;
use lumiedit_core::light::{Light, LightDesc};
use lumiedit_core::math::V3;
use lumiedit_core::optimize::{fit_window, l1, l2, refine_lights, sig_loss, FitOptions, OptimConfig, Progress, RefineOptions};
use lumiedit_core::render::{render_scene, with_threads, write_outputs, Components, RenderConfig};
use lumiedit_core::scene::{load_scene, pfm, Raster};
use lumiedit_service::AppState;
use serde_json::{json, Value};

pub use descriptor::Descriptor;

#[derive(Debug, Parser)]
#[command(name = "lumiedit", version, about = "Render, fit and edit the lights of an indoor scene")]
pub struct Cli {
    /// Worker threads for rendering and optimization.
    #[arg(long, global = true, env = "LUMIEDIT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Component {
    Direct,
    Shadow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    L1,
    L2,
    Sig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render every enabled light and write E_j, S_j, E_d, E_ind, E, the LDR
    /// image and a manifest into a directory.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        spp: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "direct,shadow,indirect")]
        components: String,
    },
    /// Write one light's unshadowed shading or its shadow factor.
    RenderComponent {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        light: String,
        #[arg(long, value_enum)]
        component: Component,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        spp: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the sun, sky and ground lobes of a window to a target shading.
    FitWindow {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        light: String,
        /// Sun direction as x,y,z; held fixed during the fit.
        #[arg(long)]
        sun_hint: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Refine all enabled lights against an image and write the refined scene.
    Refine {
        #[arg(long)]
        scene: PathBuf,
        /// Defaults to the scene's own input image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 16)]
        spp: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lr: Option<f64>,
        /// Keep positions, orientations and sizes fixed.
        #[arg(long)]
        no_geometry: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Transform a scene descriptor. Removals run first, then additions,
    /// assignments, and enable/disable switches.
    Edit {
        #[arg(long)]
        scene: PathBuf,
        /// `path=json`, e.g. `lights[lamp].w=[2,2,2]`.
        #[arg(long)]
        set: Vec<String>,
        #[arg(long)]
        disable: Vec<String>,
        #[arg(long)]
        enable: Vec<String>,
        /// JSON file holding one light descriptor.
        #[arg(long)]
        add: Vec<PathBuf>,
        #[arg(long)]
        remove: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the distance between two PFM images.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::L1)]
        metric: Metric,
    },
    /// Serve the editing API for one scene.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Where POST /save writes when the request names no path.
        #[arg(long)]
        save_to: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new("usage", message)
    }

    pub fn invalid(field: &str, reason: impl fmt::Display) -> Self {
        CliError::new("invalid", format!("{field}: {reason}"))
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("io", format!("{}: {e}", path.display()))
    }

    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        CliError::new("json", format!("{}: {e}", path.display()))
    }

    /// One line: `{"error": kind, "message": ...}`.
    pub fn to_json(&self) -> String {
        json!({"error": self.kind, "message": self.message}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<lumiedit_core::Error> for CliError {
    fn from(e: lumiedit_core::Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve {
            scene,
            port,
            host,
            save_to,
        } => serve(&scene, &host, port, save_to, cli.threads),
        command => with_threads(cli.threads, move || dispatch(command))?,
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Render {
            scene,
            out,
            spp,
            seed,
            components,
        } => {
            let scene = load_scene(&scene)?;
            let cfg = RenderConfig {
                spp,
                seed,
                components: components.parse()?,
                ..RenderConfig::default()
            };
            let r = render_scene(&scene, &cfg)?;
            let files = write_outputs(&out, &r)?;
            println!("{}", json!({"out": out, "files": files.keys().collect::<Vec<_>>()}));
            Ok(())
        }
        Command::RenderComponent {
            scene,
            light,
            component,
            out,
            spp,
            seed,
        } => {
            let raster = render_component(&load_scene(&scene)?, &light, component, spp, seed)?;
            pfm::write(&out, &raster)?;
            Ok(())
        }
        Command::FitWindow {
            scene,
            target,
            light,
            sun_hint,
            out,
            iters,
            seed,
            history,
        } => {
            let scene = load_scene(&scene)?;
            let target = pfm::read(&target)?;
            let sun = parse_vec3("sun-hint", &sun_hint)?;
            let mut desc = scene
                .light(&light)
                .cloned()
                .ok_or_else(|| lumiedit_core::Error::UnknownLight(light.clone()))?;
            let window = match desc.build(&scene)? {
                Light::Window(w) => w,
                _ => return Err(lumiedit_core::Error::Incompatible(format!("{light} is not a window")).into()),
            };
            let mut cfg = OptimConfig {
                seed,
                ..OptimConfig::fitting()
            };
            if let Some(n) = iters {
                cfg.max_iters = n;
            }
            let opts = FitOptions {
                seed,
                ..FitOptions::default()
            };
            let fit = fit_window(&scene, &target, &window, sun, &cfg, &opts, |_: Progress| {})?;
            if let LightDesc::Window { radiance, .. } = &mut desc {
                *radiance = RadianceDesc::from_radiance(&fit.radiance);
            }
            if let Some(h) = history {
                fit.history.save_csv(h)?;
            }
            let report = json!({
                "light": desc,
                "initial_loss": fit.initial_loss,
                "loss": fit.loss,
                "iterations": fit.iterations,
                "converged": fit.converged,
            });
            write_json(&out, &report)
        }
        Command::Refine {
            scene: scene_path,
            image,
            iters,
            spp,
            seed,
            lr,
            no_geometry,
            out,
            history,
        } => {
            let scene = load_scene(&scene_path)?;
            let image = match image {
                Some(p) => pfm::read(p)?,
                None => scene
                    .input_image
                    .clone()
                    .ok_or_else(|| CliError::invalid("image", "the scene has no input image; pass --image"))?,
            };
            let defaults = OptimConfig::default();
            let cfg = OptimConfig {
                max_iters: iters,
                spp,
                seed,
                lr: lr.unwrap_or(defaults.lr),
                ..defaults
            };
            let opts = RefineOptions {
                geometry: !no_geometry,
                ..RefineOptions::default()
            };
            let r = refine_lights(&scene, &image, &cfg, &opts, |_: Progress| {})?;
            if let Some(h) = history {
                r.history.save_csv(h)?;
            }
            let mut desc = Descriptor::read(&scene_path)?;
            desc.set_lights(serde_json::to_value(&r.lights).expect("light descriptors serialize"));
            desc.write_validated(&out)?;
            println!(
                "{}",
                json!({
                    "initial_loss": r.initial_loss,
                    "best_loss": r.best_loss,
                    "iterations": r.iterations,
                    "converged": r.converged,
                })
            );
            Ok(())
        }
        Command::Edit {
            scene,
            set,
            disable,
            enable,
            add,
            remove,
            out,
        } => {
            let mut desc = Descriptor::read(&scene)?;
            for id in &remove {
                desc.remove(id)?;
            }
            for path in &add {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                desc.add(serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?)?;
            }
            for s in &set {
                desc.set(s)?;
            }
            for id in &enable {
                desc.set_enabled(id, true)?;
            }
            for id in &disable {
                desc.set_enabled(id, false)?;
            }
            desc.write_validated(&out)
        }
        Command::Diff { a, b, metric } => {
            let (a, b) = (pfm::read(&a)?, pfm::read(&b)?);
            let d = match metric {
                Metric::L1 => l1(&a, &b)?,
                Metric::L2 => l2(&a, &b)?,
                Metric::Sig => sig_loss(&a, &b)?,
            };
            println!("{d}");
            Ok(())
        }
        Command::Serve { .. } => unreachable!("handled by run"),
    }
}

/// `E_j` or `S_j` of one light, identical to the corresponding output of a
/// full render with the same seed. The light is rendered even if disabled.
pub fn render_component(
    scene: &lumiedit_core::scene::Scene,
    light: &str,
    component: Component,
    spp: usize,
    seed: u64,
) -> Result<Raster, CliError> {
    let mut desc = scene
        .light(light)
        .cloned()
        .ok_or_else(|| lumiedit_core::Error::UnknownLight(light.to_string()))?;
    desc.set_enabled(true);
    let mut single = scene.clone();
    single.lights = vec![desc];
    let cfg = RenderConfig {
        spp,
        seed,
        components: Components {
            direct: true,
            shadow: component == Component::Shadow,
            indirect: false,
        },
        ..RenderConfig::default()
    };
    let mut r = render_scene(&single, &cfg)?;
    let l = r.shading.lights.remove(0);
    Ok(match component {
        Component::Direct => l.e,
        Component::Shadow => l.s,
    })
}

fn serve(scene: &Path, host: &str, port: u16, save_to: Option<PathBuf>, threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        // Renders run on blocking threads that use the global pool.
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid("threads", e))?;
    }
    let scene = load_scene(scene)?;
    let addr: SocketAddr = (host, port)
        .to_socket_addrs()
        .map_err(|e| CliError::invalid("host", e))?
        .next()
        .ok_or_else(|| CliError::invalid("host", format!("{host} does not resolve")))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new("io", e.to_string()))?;
    eprintln!("listening on http://{addr}");
    rt.block_on(lumiedit_service::serve(AppState::new(scene, save_to), addr))
        .map_err(|e| CliError::new("io", format!("{addr}: {e}")))
}

fn parse_vec3(field: &str, s: &str) -> Result<V3, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::invalid(field, format!("{s:?}: {e}")))?;
    match parts[..] {
        [x, y, z] => Ok(V3::new(x, y, z)),
        _ => Err(CliError::invalid(field, format!("expected x,y,z, got {s:?}"))),
    }
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::json(path, e))?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
