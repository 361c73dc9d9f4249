//! Edits on scene descriptors as JSON, so fields the engine does not model
//! survive untouched.

use std::fs;
use std::path::{Path, PathBuf};

use lumiedit_core::scene::load_scene;
use serde_json::Value;

use crate::CliError;

pub struct Descriptor {
    pub json: Value,
    /// Directory raster paths are relative to.
    pub dir: PathBuf,
}

impl Descriptor {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let json: Value = serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?;
        if !json.is_object() {
            return Err(CliError::new("json", format!("{}: scene descriptor must be an object", path.display())));
        }
        Ok(Descriptor {
            json,
            dir: absolute(path.parent().unwrap_or(Path::new(""))),
        })
    }

    fn lights_mut(&mut self) -> Result<&mut Vec<Value>, CliError> {
        let obj = self.json.as_object_mut().expect("checked on read");
        obj.entry("lights")
            .or_insert_with(|| Value::Array(Vec::new()))
            .as_array_mut()
            .ok_or_else(|| CliError::invalid("lights", "must be an array"))
    }

    fn light_index(&mut self, id: &str) -> Result<usize, CliError> {
        self.lights_mut()?
            .iter()
            .position(|l| id_matches(l, id))
            .ok_or_else(|| CliError::new("unknown_light", format!("unknown light id {id}")))
    }

    pub fn set_lights(&mut self, lights: Value) {
        self.json["lights"] = lights;
    }

    pub fn set_enabled(&mut self, id: &str, on: bool) -> Result<(), CliError> {
        let i = self.light_index(id)?;
        self.lights_mut()?[i]["enabled"] = Value::Bool(on);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Result<(), CliError> {
        let i = self.light_index(id)?;
        self.lights_mut()?.remove(i);
        Ok(())
    }

    pub fn add(&mut self, light: Value) -> Result<(), CliError> {
        let id = match light.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(CliError::invalid("id", "added light needs an id")),
        };
        if self.lights_mut()?.iter().any(|l| id_matches(l, &id)) {
            return Err(CliError::invalid("id", format!("light {id} already exists")));
        }
        self.lights_mut()?.push(light);
        Ok(())
    }

    /// Applies `path=value`, e.g. `lights[lamp].w=[1,1,1]`. The value is
    /// parsed as JSON and taken as a string when that fails.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::invalid("set", format!("expected path=value, got {assignment:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut self.json;
        let segments: Vec<&str> = path.split('.').collect();
        for (k, seg) in segments.iter().enumerate() {
            let last = k + 1 == segments.len();
            let (key, sel) = match seg.split_once('[') {
                Some((key, rest)) => {
                    let sel = rest
                        .strip_suffix(']')
                        .ok_or_else(|| CliError::invalid("set", format!("unclosed selector in {seg:?}")))?;
                    (key, Some(sel))
                }
                None => (*seg, None),
            };
            if key.is_empty() {
                return Err(CliError::invalid("set", format!("empty key in {path:?}")));
            }
            let obj = node
                .as_object_mut()
                .ok_or_else(|| CliError::invalid(path, format!("{key} is not inside an object")))?;
            node = match sel {
                None if last => {
                    obj.insert(key.to_string(), value);
                    return Ok(());
                }
                None => obj.entry(key).or_insert_with(|| Value::Object(Default::default())),
                Some(sel) => {
                    let items = obj
                        .get_mut(key)
                        .and_then(Value::as_array_mut)
                        .ok_or_else(|| CliError::invalid(path, format!("{key} is not an array")))?;
                    let i = match sel.parse::<usize>() {
                        Ok(i) if i < items.len() => i,
                        _ => items
                            .iter()
                            .position(|v| id_matches(v, sel))
                            .ok_or_else(|| CliError::invalid(path, format!("no element {sel} in {key}")))?,
                    };
                    if last {
                        items[i] = value;
                        return Ok(());
                    }
                    &mut items[i]
                }
            };
        }
        Ok(())
    }

    /// Rewrites relative raster and mask paths so they resolve from `dir`.
    fn rebase(&mut self, dir: &Path) {
        if same_dir(&self.dir, dir) {
            return;
        }
        let from = self.dir.clone();
        let fix = |v: &mut Value| {
            if let Some(p) = v.as_str() {
                let p = Path::new(p);
                if p.is_relative() {
                    let target = from.join(p);
                    let rel = pathdiff::diff_paths(&target, dir).unwrap_or(target);
                    *v = Value::String(rel.to_string_lossy().into_owned());
                }
            }
        };
        if let Some(rasters) = self.json.get_mut("rasters").and_then(Value::as_object_mut) {
            rasters.values_mut().for_each(fix);
        }
        if let Some(masks) = self.json.get_mut("masks").and_then(Value::as_array_mut) {
            for m in masks {
                if let Some(p) = m.get_mut("path") {
                    fix(p);
                }
            }
        }
        self.dir = dir.to_path_buf();
    }

    /// Writes the descriptor to `out` only if it loads as a valid scene from
    /// there; the existing file is left alone otherwise.
    pub fn write_validated(mut self, out: &Path) -> Result<(), CliError> {
        let dir = absolute(out.parent().unwrap_or(Path::new("")));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        self.rebase(&dir);
        let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = dir.join(format!(".{name}.tmp"));
        let text = serde_json::to_string_pretty(&self.json).map_err(|e| CliError::json(out, e))?;
        fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        if let Err(e) = load_scene(&tmp) {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        fs::rename(&tmp, out).map_err(|e| CliError::io(out, e))
    }
}

fn id_matches(light: &Value, id: &str) -> bool {
    match light.get("id") {
        Some(Value::String(s)) => s == id,
        Some(Value::Number(n)) => n.to_string() == id,
        _ => false,
    }
}

fn absolute(p: &Path) -> PathBuf {
    let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}
