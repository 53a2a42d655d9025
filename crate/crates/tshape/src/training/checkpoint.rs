//! Plain-text checkpoints: model config plus every parameter tensor.
//!
//! Values are written with Rust's shortest round-trip float formatting,
//! so save → load → save reproduces the file byte for byte and loaded
//! parameters are value-exact for all finite doubles.

use crate::model::{Ablation, ModelConfig, ModelError, TShapeParams};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

const MAGIC: &str = "tshape-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported checkpoint header `{0}`")]
    Version(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint carries unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("checkpoint is missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Serialize `params` and `config` to a text document.
pub fn checkpoint_document(params: &TShapeParams, config: &ModelConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    out.push_str("[config]\n");
    let _ = writeln!(out, "window_t = {}", config.window_t);
    let _ = writeln!(out, "patch_s = {}", config.patch_s);
    let _ = writeln!(out, "kernel_sizes = {}", join_usize(&config.kernel_sizes));
    let _ = writeln!(out, "channels_per_scale = {}", config.channels_per_scale);
    let _ = writeln!(out, "heads_local = {}", config.heads_local);
    let _ = writeln!(out, "heads_global = {}", config.heads_global);
    let _ = writeln!(out, "ablation = {}", config.ablation);
    for (name, tensor) in params.all_named() {
        let _ = writeln!(out, "[tensor {name}]");
        let _ = writeln!(out, "shape = {}", join_usize(tensor.shape()));
        out.push_str("data =");
        for v in tensor.data() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_checkpoint(
    params: &TShapeParams,
    config: &ModelConfig,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, checkpoint_document(params, config)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TShapeParams, ModelConfig), CheckpointError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint(text: &str) -> Result<(TShapeParams, ModelConfig), CheckpointError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| CheckpointError::Parse {
        line: line + 1,
        message,
    };

    match lines.next() {
        Some((_, header)) if header.trim() == MAGIC => {}
        Some((_, header)) => return Err(CheckpointError::Version(header.trim().to_string())),
        None => return Err(CheckpointError::Version(String::new())),
    }

    // config section
    let mut config_fields: BTreeMap<String, String> = BTreeMap::new();
    let mut pending_section: Option<(usize, String)> = None;
    match lines.next() {
        Some((_, line)) if line.trim() == "[config]" => {}
        Some((n, line)) => return Err(parse_err(n, format!("expected [config], found `{line}`"))),
        None => return Err(parse_err(1, "missing [config] section".into())),
    }
    for (n, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            pending_section = Some((n, line.to_string()));
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(n, format!("expected `key = value`, found `{line}`")))?;
        config_fields.insert(key.trim().to_string(), value.trim().to_string());
    }

    let field = |key: &str| -> Result<&String, CheckpointError> {
        config_fields
            .get(key)
            .ok_or_else(|| parse_err(1, format!("config is missing `{key}`")))
    };
    let parse_usize = |key: &str| -> Result<usize, CheckpointError> {
        field(key)?
            .parse()
            .map_err(|e| parse_err(1, format!("bad `{key}`: {e}")))
    };
    let kernel_sizes: Vec<usize> = field("kernel_sizes")?
        .split(',')
        .map(|v| v.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(1, format!("bad `kernel_sizes`: {e}")))?;
    let ablation: Ablation = field("ablation")?
        .parse()
        .map_err(|e: String| parse_err(1, e))?;
    let config = ModelConfig {
        window_t: parse_usize("window_t")?,
        patch_s: parse_usize("patch_s")?,
        kernel_sizes,
        channels_per_scale: parse_usize("channels_per_scale")?,
        heads_local: parse_usize("heads_local")?,
        heads_global: parse_usize("heads_global")?,
        ablation,
    };
    config.validate()?;

    // tensor sections, matched into a zero-initialized parameter struct
    let mut params = TShapeParams::init(&config, 0)?;
    let mut expected: BTreeMap<String, bool> = params
        .all_named()
        .into_iter()
        .map(|(name, _)| (name, false))
        .collect();

    let mut section = pending_section;
    while let Some((sec_line, header)) = section.take() {
        let name = header
            .strip_prefix("[tensor ")
            .and_then(|rest| rest.strip_suffix(']'))
            .ok_or_else(|| parse_err(sec_line, format!("bad section header `{header}`")))?
            .to_string();
        let seen = expected
            .get_mut(&name)
            .ok_or_else(|| CheckpointError::UnknownTensor(name.clone()))?;
        if *seen {
            return Err(parse_err(sec_line, format!("duplicate tensor `{name}`")));
        }
        *seen = true;

        let mut shape: Option<Vec<usize>> = None;
        let mut data: Option<Vec<f64>> = None;
        for (n, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = Some((n, line.to_string()));
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(n, format!("expected `key = value`, found `{line}`")))?;
            match key.trim() {
                "shape" => {
                    shape = Some(
                        value
                            .trim()
                            .split(',')
                            .map(|v| v.trim().parse())
                            .collect::<Result<_, _>>()
                            .map_err(|e| parse_err(n, format!("bad shape: {e}")))?,
                    );
                }
                "data" => {
                    data = Some(
                        value
                            .split_whitespace()
                            .map(|v| v.parse())
                            .collect::<Result<_, _>>()
                            .map_err(|e| parse_err(n, format!("bad data: {e}")))?,
                    );
                }
                other => return Err(parse_err(n, format!("unknown key `{other}`"))),
            }
        }
        let shape = shape.ok_or_else(|| parse_err(sec_line, format!("tensor `{name}` has no shape")))?;
        let data = data.ok_or_else(|| parse_err(sec_line, format!("tensor `{name}` has no data")))?;
        let target = params
            .all_named_mut()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t)
            .expect("name already validated");
        if target.shape() != shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: target.shape().to_vec(),
                found: shape,
            });
        }
        if data.len() != target.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: vec![target.len()],
                found: vec![data.len()],
            });
        }
        target.data_mut().copy_from_slice(&data);
    }

    if let Some((name, _)) = expected.iter().find(|(_, seen)| !**seen) {
        return Err(CheckpointError::MissingTensor(name.clone()));
    }
    params.check_against(&config)?;
    Ok((params, config))
}
