//! `key = value` model configuration files.
//!
//! Blank lines and text after `#` are ignored. Keys:
//!
//! | key            | required | default     |
//! |----------------|----------|-------------|
//! | `depth`        | yes      |             |
//! | `hidden`       | yes      |             |
//! | `ratio`        | no       | `4`         |
//! | `patch`        | yes      |             |
//! | `image_w`      | yes      |             |
//! | `image_h`      | yes      |             |
//! | `classes`      | yes      |             |
//! | `norm`         | no       | `layernorm` |
//! | `block`        | no       | `s2mlp`     |
//! | `shift`        | no       | `a`         |
//! | `mixer_hidden` | no       | `2·M`       |
//!
//! `shift` takes a preset label or the custom `dx,dy;dx,dy` grammar.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BlockKind, ModelConfig};
use crate::ops::NormKind;
use crate::shift::ShiftConfig;

const KEYS: [&str; 11] = [
    "depth",
    "hidden",
    "ratio",
    "patch",
    "image_w",
    "image_h",
    "classes",
    "norm",
    "block",
    "shift",
    "mixer_hidden",
];

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigLine {
        line,
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut entries: HashMap<&'static str, (usize, &str)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| line_err(line, format!("expected `key = value`, got {content:?}")))?;
        let key = key.trim();
        let value = value.trim();
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| line_err(line, format!("unknown key {key:?}")))?;
        if value.is_empty() {
            return Err(line_err(line, format!("{key} has no value")));
        }
        if let Some((first, _)) = entries.insert(known, (line, value)) {
            return Err(line_err(line, format!("{key} already set on line {first}")));
        }
    }

    let positive = |key: &str, default: Option<usize>| -> Result<(usize, usize)> {
        match entries.get(key) {
            Some(&(line, value)) => match value.parse::<usize>() {
                Ok(v) if v > 0 => Ok((line, v)),
                _ => Err(line_err(
                    line,
                    format!("{key} must be a positive integer, got {value:?}"),
                )),
            },
            None => default
                .map(|v| (0, v))
                .ok_or_else(|| Error::config(format!("required key {key} is missing"))),
        }
    };

    let (_, depth) = positive("depth", None)?;
    let (hidden_line, hidden) = positive("hidden", None)?;
    let (_, ratio) = positive("ratio", Some(4))?;
    let (patch_line, patch) = positive("patch", None)?;
    let (_, image_w) = positive("image_w", None)?;
    let (_, image_h) = positive("image_h", None)?;
    let (_, classes) = positive("classes", None)?;
    let mixer_hidden = match entries.contains_key("mixer_hidden") {
        true => Some(positive("mixer_hidden", None)?.1),
        false => None,
    };
    let norm = match entries.get("norm") {
        Some(&(line, v)) => NormKind::parse(v).ok_or_else(|| {
            line_err(line, format!("norm must be layernorm or affine, got {v:?}"))
        })?,
        None => NormKind::LayerNorm,
    };
    let block = match entries.get("block") {
        Some(&(line, v)) => BlockKind::parse(v)
            .ok_or_else(|| line_err(line, format!("block must be s2mlp or mixer, got {v:?}")))?,
        None => BlockKind::S2Mlp,
    };
    let (shift_line, shift) = match entries.get("shift") {
        Some(&(line, v)) => (
            line,
            ShiftConfig::from_spec(v).map_err(|e| line_err(line, format!("shift: {e}")))?,
        ),
        None => (0, ShiftConfig::preset("a")?),
    };

    if image_w % patch != 0 || image_h % patch != 0 {
        return Err(line_err(
            patch_line,
            format!("image {image_w}×{image_h} is not divisible by patch size {patch}"),
        ));
    }
    if block == BlockKind::S2Mlp {
        if let Err(e) = shift.validate_channels(hidden) {
            let msg = match e {
                Error::Config(m) => m,
                other => other.to_string(),
            };
            return Err(line_err(
                hidden_line.max(shift_line),
                format!("hidden = {hidden}: {msg}"),
            ));
        }
    }

    let cfg = ModelConfig {
        depth,
        hidden,
        ratio,
        patch,
        image_w,
        image_h,
        classes,
        norm,
        block,
        shift,
        mixer_hidden,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical text for `cfg`; [`parse_config`] maps it back to `cfg`.
pub fn render_config(cfg: &ModelConfig) -> String {
    let mut out = format!(
        "depth = {}\nhidden = {}\nratio = {}\npatch = {}\nimage_w = {}\nimage_h = {}\nclasses = {}\n\
         norm = {}\nblock = {}\nshift = {}\n",
        cfg.depth,
        cfg.hidden,
        cfg.ratio,
        cfg.patch,
        cfg.image_w,
        cfg.image_h,
        cfg.classes,
        cfg.norm.name(),
        cfg.block.name(),
        cfg.shift.spec_string(),
    );
    if let Some(m) = cfg.mixer_hidden {
        out.push_str(&format!("mixer_hidden = {m}\n"));
    }
    out
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn write_config(cfg: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, render_config(cfg))?)
}
