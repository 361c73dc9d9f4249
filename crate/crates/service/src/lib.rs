//! Local HTTP API over one scene: inspect and edit lights, render, refine
//! and save.
//!
//! Mutations are serialized behind one lock and bump a revision counter.
//! Writers may send `expected_revision` and get 409 when it is stale.
//! Renders and refinements run one at a time; a second one gets 429.

mod error;
mod schema;

use std::convert::Infallible;
use std::net::SocketAddr;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use lumiedit_core::light::LightDesc;
use lumiedit_core::optimize::{refine_lights, OptimConfig, Progress, RefineOptions, Stoppable};
use lumiedit_core::render::{encode_png, render_scene, Components, RenderConfig, Rendered};
use lumiedit_core::scene::{pfm, save_scene, Scene};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, OwnedSemaphorePermit, Semaphore};
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;
pub use schema::light_schema;

pub const REVISION_HEADER: &str = "x-lumiedit-revision";
pub const MANIFEST_HEADER: &str = "x-lumiedit-manifest";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RenderKey {
    revision: u64,
    spp: usize,
    seed: u64,
    components: Components,
}

struct Session {
    scene: Arc<Scene>,
    revision: u64,
    cache: Option<(RenderKey, Arc<Rendered>)>,
}

#[derive(Clone)]
pub struct AppState {
    session: Arc<Mutex<Session>>,
    heavy: Arc<Semaphore>,
    save_path: Option<PathBuf>,
    base: RenderConfig,
}

impl AppState {
    /// `save_path` is where `POST /save` writes when the request names no path.
    pub fn new(scene: Scene, save_path: Option<PathBuf>) -> Self {
        AppState {
            session: Arc::new(Mutex::new(Session {
                scene: Arc::new(scene),
                revision: 0,
                cache: None,
            })),
            heavy: Arc::new(Semaphore::new(1)),
            save_path,
            base: RenderConfig::default(),
        }
    }

    /// Settings behind every render and refinement; requests override only
    /// spp, seed and components.
    pub fn with_render_config(mut self, base: RenderConfig) -> Self {
        self.base = base;
        self
    }

    fn lock(&self) -> MutexGuard<'_, Session> {
        // a panic inside a handler leaves the session itself consistent
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn snapshot(&self) -> (Arc<Scene>, u64) {
        let s = self.lock();
        (s.scene.clone(), s.revision)
    }

    fn permit(&self) -> Result<OwnedSemaphorePermit, ApiError> {
        self.heavy.clone().try_acquire_owned().map_err(|_| ApiError::busy())
    }

    /// Applies `edit` to a copy of the light list and commits it, with a new
    /// revision, only if every light still validates against the scene.
    fn mutate<R>(
        &self,
        expected: Option<u64>,
        edit: impl FnOnce(&mut Vec<LightDesc>) -> Result<R, ApiError>,
    ) -> Result<(u64, R), ApiError> {
        let mut s = self.lock();
        if let Some(e) = expected {
            if e != s.revision {
                return Err(ApiError::stale(e, s.revision));
            }
        }
        let mut lights = s.scene.lights.clone();
        let out = edit(&mut lights)?;
        let mut scene = (*s.scene).clone();
        scene.lights = lights;
        scene.validate()?;
        s.scene = Arc::new(scene);
        s.revision += 1;
        s.cache = None;
        Ok((s.revision, out))
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any)
        .expose_headers([HeaderName::from_static(REVISION_HEADER), HeaderName::from_static(MANIFEST_HEADER)]);
    Router::new()
        .route("/scene", get(get_scene))
        .route("/schema", get(get_schema))
        .route("/pixel", get(get_pixel))
        .route("/lights", post(add_light))
        .route("/lights/{id}", put(put_light).delete(delete_light))
        .route("/lights/{id}/enabled", post(set_enabled))
        .route("/render", post(post_render))
        .route("/refine", post(post_refine))
        .route("/save", post(post_save))
        .layer(cors)
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(v).map_err(ApiError::body)
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    if body.is_empty() {
        return Ok(json!({}));
    }
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(ApiError::body)
}

/// Splits `expected_revision` off a request object.
fn take_revision(v: &mut Value) -> Result<Option<u64>, ApiError> {
    match v.as_object_mut().and_then(|o| o.remove("expected_revision")) {
        None | Some(Value::Null) => Ok(None),
        Some(r) => r
            .as_u64()
            .map(Some)
            .ok_or_else(|| ApiError::bad_request("expected_revision", "must be a non-negative integer")),
    }
}

async fn get_scene(State(st): State<AppState>) -> Json<Value> {
    let (scene, revision) = st.snapshot();
    Json(json!({
        "revision": revision,
        "camera": {
            "width": scene.camera.width,
            "height": scene.camera.height,
            "fov_rad": scene.camera.fov_short_axis,
        },
        "options": scene.options,
        "masks": scene.masks.iter().map(|m| &m.light_id).collect::<Vec<_>>(),
        "has_image": scene.input_image.is_some(),
        "lights": scene.lights,
    }))
}

async fn get_schema() -> Json<Value> {
    Json(json!({
        "light": light_schema(),
        "render": {
            "spp": {"type": "integer", "minimum": 1, "default": 64},
            "seed": {"type": "integer", "minimum": 0, "default": 0},
            "components": {"type": "string", "default": "direct,shadow,indirect"},
            "format": {"enum": ["png", "pfm"], "default": "png"}
        }
    }))
}

fn light_from(mut v: Value, id: Option<&str>) -> Result<(LightDesc, Option<u64>), ApiError> {
    let expected = take_revision(&mut v)?;
    if let (Some(id), Some(obj)) = (id, v.as_object_mut()) {
        match obj.get("id") {
            None => {
                obj.insert("id".into(), Value::String(id.into()));
            }
            Some(body_id) => {
                let same = body_id.as_str() == Some(id) || body_id.as_f64().is_some_and(|n| n.to_string() == id);
                if !same {
                    return Err(ApiError::bad_request("id", format!("body id {body_id} differs from path id {id}")));
                }
            }
        }
    }
    schema::check(&light_schema(), &v, "").map_err(|(field, msg)| ApiError::bad_request(field, msg))?;
    let light: LightDesc = parse(v)?;
    light.validate()?;
    Ok((light, expected))
}

async fn put_light(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let (light, expected) = light_from(parse_body(&body)?, Some(&id))?;
    let (revision, ()) = st.mutate(expected, |lights| {
        let slot = lights.iter_mut().find(|l| l.id() == id).ok_or_else(|| ApiError::not_found(&id))?;
        *slot = light.clone();
        Ok(())
    })?;
    Ok(Json(json!({"revision": revision, "light": light})))
}

async fn add_light(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let (light, expected) = light_from(parse_body(&body)?, None)?;
    let (revision, ()) = st.mutate(expected, |lights| {
        if lights.iter().any(|l| l.id() == light.id()) {
            return Err(ApiError::bad_request("id", format!("light {} already exists", light.id())));
        }
        lights.push(light.clone());
        Ok(())
    })?;
    Ok((StatusCode::CREATED, Json(json!({"revision": revision, "light": light}))))
}

#[derive(Deserialize)]
struct RevisionQuery {
    expected_revision: Option<u64>,
}

async fn delete_light(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RevisionQuery>,
) -> Result<Json<Value>, ApiError> {
    let (revision, ()) = st.mutate(q.expected_revision, |lights| {
        let i = lights.iter().position(|l| l.id() == id).ok_or_else(|| ApiError::not_found(&id))?;
        lights.remove(i);
        Ok(())
    })?;
    Ok(Json(json!({"revision": revision})))
}

/// Body is a bare boolean or `{"enabled": bool, "expected_revision": n}`.
async fn set_enabled(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let mut v = parse_body(&body)?;
    let expected = take_revision(&mut v)?;
    let on = match &v {
        Value::Bool(b) => *b,
        Value::Object(o) => o
            .get("enabled")
            .and_then(Value::as_bool)
            .ok_or_else(|| ApiError::bad_request("enabled", "must be a boolean"))?,
        _ => return Err(ApiError::bad_request("enabled", "must be a boolean")),
    };
    let (revision, ()) = st.mutate(expected, |lights| {
        let l = lights.iter_mut().find(|l| l.id() == id).ok_or_else(|| ApiError::not_found(&id))?;
        l.set_enabled(on);
        Ok(())
    })?;
    Ok(Json(json!({"revision": revision, "id": id, "enabled": on})))
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Png,
    Pfm,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComponentList {
    Csv(String),
    List(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderRequest {
    #[serde(default = "default_spp")]
    spp: usize,
    #[serde(default)]
    seed: u64,
    components: Option<ComponentList>,
    #[serde(default)]
    format: Format,
}

fn default_spp() -> usize {
    64
}

impl RenderRequest {
    fn components(&self) -> Result<Components, ApiError> {
        let c = match &self.components {
            None => return Ok(Components::default()),
            Some(ComponentList::Csv(s)) => s.parse::<Components>(),
            Some(ComponentList::List(v)) => v.join(",").parse::<Components>(),
        };
        Ok(c?)
    }
}

/// Render of the current revision, from the cache when the key matches.
async fn rendered(st: &AppState, spp: usize, seed: u64, components: Components) -> Result<(u64, Arc<Rendered>), ApiError> {
    if spp == 0 {
        return Err(ApiError::bad_request("spp", "must be at least 1"));
    }
    let (scene, revision) = st.snapshot();
    let key = RenderKey {
        revision,
        spp,
        seed,
        components,
    };
    if let Some((k, r)) = &st.lock().cache {
        if *k == key {
            return Ok((revision, r.clone()));
        }
    }
    let permit = st.permit()?;
    let cfg = RenderConfig {
        spp,
        seed,
        components,
        ..st.base
    };
    let r = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        render_scene(&scene, &cfg)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let r = Arc::new(r);
    let mut s = st.lock();
    if s.revision == revision {
        s.cache = Some((key, r.clone()));
    }
    Ok((revision, r))
}

async fn post_render(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let mut v = parse_body(&body)?;
    let expected = take_revision(&mut v)?;
    let req: RenderRequest = parse(v)?;
    let components = req.components()?;
    if let Some(e) = expected {
        let current = st.snapshot().1;
        if e != current {
            return Err(ApiError::stale(e, current));
        }
    }
    let (revision, r) = rendered(&st, req.spp, req.seed, components).await?;
    let (bytes, mime) = match req.format {
        Format::Png => (encode_png(&r.ldr)?, "image/png"),
        Format::Pfm => (pfm::encode(&r.shading.e), "application/x-pfm"),
    };
    let manifest = serde_json::to_string(&r.manifest).unwrap_or_default();
    let mut resp = (StatusCode::OK, bytes).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(mime));
    h.insert(REVISION_HEADER, HeaderValue::from(revision));
    if let Ok(v) = HeaderValue::from_str(&manifest) {
        h.insert(MANIFEST_HEADER, v);
    }
    Ok(resp)
}

#[derive(Deserialize)]
struct PixelQuery {
    x: usize,
    y: usize,
    #[serde(default = "default_spp")]
    spp: usize,
    #[serde(default)]
    seed: u64,
    components: Option<String>,
}

/// HDR values under one pixel; `x` is the column, `y` the row.
async fn get_pixel(State(st): State<AppState>, Query(q): Query<PixelQuery>) -> Result<Json<Value>, ApiError> {
    let components = match &q.components {
        Some(s) => s.parse::<Components>()?,
        None => Components::default(),
    };
    let (w, h) = {
        let (scene, _) = st.snapshot();
        (scene.width(), scene.height())
    };
    if q.x >= w {
        return Err(ApiError::bad_request("x", format!("column {} outside 0..{w}", q.x)));
    }
    if q.y >= h {
        return Err(ApiError::bad_request("y", format!("row {} outside 0..{h}", q.y)));
    }
    let (revision, r) = rendered(&st, q.spp, q.seed, components).await?;
    let p = q.y * w + q.x;
    let per_light: Vec<Value> = r
        .shading
        .lights
        .iter()
        .map(|l| json!({"id": l.id, "e": l.e.rgb(p), "s": l.s.at(p, 0)}))
        .collect();
    Ok(Json(json!({
        "x": q.x,
        "y": q.y,
        "revision": revision,
        "e": r.shading.e.rgb(p),
        "e_d": r.shading.e_d.rgb(p),
        "e_ind": r.shading.e_ind.rgb(p),
        "ldr": r.ldr.rgb(p),
        "lights": per_light,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineRequest {
    iters: usize,
    #[serde(default)]
    optim: Option<OptimConfig>,
    #[serde(default)]
    options: Option<RefineOptions>,
}

fn ndjson(v: &Value) -> Result<Bytes, Infallible> {
    let mut line = serde_json::to_vec(v).unwrap_or_default();
    line.push(b'\n');
    Ok(Bytes::from(line))
}

/// Streams one JSON line per iteration, then a final line with the refined
/// lights, which are committed as a new revision unless the scene changed
/// meanwhile.
async fn post_refine(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let mut v = parse_body(&body)?;
    let expected = take_revision(&mut v)?;
    let req: RefineRequest = parse(v)?;
    if req.iters == 0 {
        return Err(ApiError::bad_request("iters", "must be at least 1"));
    }
    let (scene, revision) = st.snapshot();
    if let Some(e) = expected {
        if e != revision {
            return Err(ApiError::stale(e, revision));
        }
    }
    let image = scene
        .input_image
        .clone()
        .ok_or_else(|| ApiError::bad_request("image", "the scene has no input image to refine against"))?;
    let cfg = OptimConfig {
        max_iters: req.iters,
        ..req.optim.unwrap_or_default()
    };
    cfg.validate()?;
    let opts = req.options.unwrap_or_else(|| RefineOptions {
        render: st.base,
        ..RefineOptions::default()
    });
    let permit = st.permit()?;
    let (tx, rx) = mpsc::unbounded_channel();
    let state = st.clone();
    tokio::task::spawn_blocking(move || {
        let _permit = permit;
        // a client that went away stops the run
        let progress = Stoppable(|p: Progress| match tx.send(ndjson(&json!(p))) {
            Ok(()) => ControlFlow::Continue(()),
            Err(_) => ControlFlow::Break(()),
        });
        let last = match refine_lights(&scene, &image, &cfg, &opts, progress) {
            Ok(r) => {
                let committed = state.mutate(Some(revision), |lights| {
                    *lights = r.lights.clone();
                    Ok(())
                });
                match committed {
                    Ok((rev, ())) => json!({
                        "done": true,
                        "revision": rev,
                        "initial_loss": r.initial_loss,
                        "best_loss": r.best_loss,
                        "iterations": r.iterations,
                        "converged": r.converged,
                        "lights": r.lights,
                    }),
                    Err(e) => json!(e),
                }
            }
            Err(e) => json!(ApiError::from(e)),
        };
        let _ = tx.send(ndjson(&last));
    });
    let stream = tokio_stream::wrappers::UnboundedReceiverStream::new(rx);
    let mut resp = Body::from_stream(stream).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"));
    Ok(resp)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SaveRequest {
    path: Option<PathBuf>,
}

async fn post_save(State(st): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: SaveRequest = parse(parse_body(&body)?)?;
    let path = req
        .path
        .or_else(|| st.save_path.clone())
        .ok_or_else(|| ApiError::bad_request("path", "no save path given and none configured"))?;
    let (scene, revision) = st.snapshot();
    let target = path.clone();
    tokio::task::spawn_blocking(move || save_scene(&scene, &target))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(json!({"path": path, "revision": revision})))
}
