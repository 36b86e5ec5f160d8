//! Checkpoint directory layout:
//!
//! - `params.bin`: every parameter as little-endian f32, in layout order
//! - `layout.txt`: one `name dim1xdim2...` line per tensor
//! - `meta.json`: format version, encoder spec and [`ModelMeta`]

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::EncoderSpec;
use super::model::{ClassifierModel, ModelMeta};
use super::{ClassifierError, TensorSpec};
use crate::corpus::SentimentLabel;

pub const FORMAT_VERSION: u32 = 1;
pub const PARAMS_FILE: &str = "params.bin";
pub const LAYOUT_FILE: &str = "layout.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct MetaDocument {
    format_version: u32,
    encoder: EncoderSpec,
    #[serde(flatten)]
    meta: ModelMeta,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClassifierError + '_ {
    move |source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn render_layout(layout: &[TensorSpec]) -> String {
    layout.iter().map(|t| format!("{t}\n")).collect()
}

pub fn parse_layout(text: &str) -> Result<Vec<TensorSpec>, ClassifierError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| line.parse())
        .collect()
}

/// Writes the checkpoint files, creating the directory if needed.
pub fn save_checkpoint(model: &ClassifierModel, dir: &Path) -> Result<(), ClassifierError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let bytes: Vec<u8> = model
        .params()
        .iter()
        .flat_map(|&p| (p as f32).to_le_bytes())
        .collect();
    let params_path = dir.join(PARAMS_FILE);
    fs::write(&params_path, bytes).map_err(io_err(&params_path))?;

    let layout_path = dir.join(LAYOUT_FILE);
    fs::write(&layout_path, render_layout(model.layout())).map_err(io_err(&layout_path))?;

    let doc = MetaDocument {
        format_version: FORMAT_VERSION,
        encoder: model.encoder_spec(),
        meta: model.meta().clone(),
    };
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&doc).expect("serializable meta");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<ClassifierModel, ClassifierError> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let doc: MetaDocument = serde_json::from_str(&text).map_err(|e| ClassifierError::Checkpoint {
        path: meta_path.display().to_string(),
        detail: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ClassifierError::VersionMismatch {
            expected: FORMAT_VERSION,
            found: doc.format_version,
        });
    }
    if doc.meta.label_order != SentimentLabel::ALL {
        return Err(ClassifierError::Checkpoint {
            path: meta_path.display().to_string(),
            detail: format!("unsupported label order {:?}", doc.meta.label_order),
        });
    }

    let encoder = doc.encoder.build()?;
    let expected = ClassifierModel::layout_for(encoder.as_ref());
    let layout_path = dir.join(LAYOUT_FILE);
    let stored = parse_layout(&fs::read_to_string(&layout_path).map_err(io_err(&layout_path))?)?;
    if stored != expected {
        return Err(ClassifierError::LayoutMismatch {
            expected: render_layout(&expected).trim_end().replace('\n', ", "),
            found: render_layout(&stored).trim_end().replace('\n', ", "),
        });
    }

    let params_path = dir.join(PARAMS_FILE);
    let bytes = fs::read(&params_path).map_err(io_err(&params_path))?;
    let count: usize = expected.iter().map(TensorSpec::len).sum();
    if bytes.len() != count * 4 {
        return Err(ClassifierError::Truncated {
            path: params_path.display().to_string(),
            expected: count * 4,
            found: bytes.len(),
        });
    }
    let params = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ClassifierModel::from_parts(encoder, params, doc.meta)
}
