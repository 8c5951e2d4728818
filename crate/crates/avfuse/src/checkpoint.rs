//! Checkpoints: a directory holding `checkpoint.json` plus one AVT file per
//! parameter tensor and per running statistic. Round trips are bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use avfuse_core::model::{init_params, ModelConfig, ModelParams};
use avfuse_core::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::avt;
use crate::error::{AppError, AppResult, IoContext};

pub const INDEX: &str = "checkpoint.json";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct TensorRef {
    name: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct StatsRef {
    name: String,
    mean: String,
    var: String,
    initialized: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct Index {
    epoch: usize,
    model: ModelConfig,
    params: Vec<TensorRef>,
    buffers: Vec<StatsRef>,
}

/// A loaded checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: ModelParams,
}

fn write_into(dir: &Path, params: &ModelParams, epoch: usize) -> AppResult<()> {
    fs::create_dir_all(dir).at(dir)?;
    let mut index = Index {
        epoch,
        model: params.config.clone(),
        params: Vec::new(),
        buffers: Vec::new(),
    };
    for (name, t) in params.params() {
        let file = format!("{name}.avt");
        avt::write(&dir.join(&file), t)?;
        index.params.push(TensorRef {
            name,
            file,
            shape: t.shape().to_vec(),
        });
    }
    for (name, s) in params.buffers() {
        let (mean, var) = (format!("{name}.running_mean.avt"), format!("{name}.running_var.avt"));
        avt::write(&dir.join(&mean), &s.mean)?;
        avt::write(&dir.join(&var), &s.var)?;
        index.buffers.push(StatsRef {
            name,
            mean,
            var,
            initialized: s.initialized,
        });
    }
    let p = dir.join(INDEX);
    fs::write(&p, serde_json::to_string_pretty(&index).expect("index serializes")).at(&p)
}

/// Writes `params` to `dir`, replacing any previous checkpoint there only
/// once the new one is complete.
pub fn save(dir: &Path, params: &ModelParams, epoch: usize) -> AppResult<()> {
    let name = dir
        .file_name()
        .ok_or_else(|| AppError::validation(format!("checkpoint path {} has no file name", dir.display())))?;
    let staging: PathBuf = dir.with_file_name(format!(".{}.partial", name.to_string_lossy()));
    if staging.exists() {
        fs::remove_dir_all(&staging).at(&staging)?;
    }
    write_into(&staging, params, epoch)?;
    if dir.exists() {
        fs::remove_dir_all(dir).at(dir)?;
    }
    fs::rename(&staging, dir).at(dir)
}

fn read_shaped(dir: &Path, file: &str, shape: &[usize]) -> AppResult<Tensor<f32>> {
    let p = dir.join(file);
    let t = avt::read(&p)?;
    if t.shape() != shape {
        return Err(AppError::format(&p, format!("shape {:?}, expected {:?}", t.shape(), shape)));
    }
    Ok(t)
}

pub fn load(dir: &Path) -> AppResult<Checkpoint> {
    let ip = dir.join(INDEX);
    let text = fs::read_to_string(&ip).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AppError::validation(format!("{} is not a checkpoint (no {INDEX})", dir.display()))
        } else {
            AppError::Io { path: ip.clone(), source: e }
        }
    })?;
    let index: Index = serde_json::from_str(&text).map_err(|e| AppError::format(&ip, e.to_string()))?;
    let mut params = init_params::<f32>(&index.model, 0)?;
    let files: BTreeMap<&str, &TensorRef> = index.params.iter().map(|r| (r.name.as_str(), r)).collect();
    let stats: BTreeMap<&str, &StatsRef> = index.buffers.iter().map(|r| (r.name.as_str(), r)).collect();
    if files.len() != params.params().len() || stats.len() != params.buffers().len() {
        return Err(AppError::format(&ip, "tensor list does not match the model configuration"));
    }
    for (name, t) in params.params_mut() {
        let r = files
            .get(name.as_str())
            .ok_or_else(|| AppError::format(&ip, format!("missing parameter `{name}`")))?;
        *t = read_shaped(dir, &r.file, t.shape())?;
    }
    for (name, s) in params.buffers_mut() {
        let r = stats
            .get(name.as_str())
            .ok_or_else(|| AppError::format(&ip, format!("missing statistics `{name}`")))?;
        s.mean = read_shaped(dir, &r.mean, s.mean.shape())?;
        s.var = read_shaped(dir, &r.var, s.var.shape())?;
        s.initialized = r.initialized;
    }
    Ok(Checkpoint {
        epoch: index.epoch,
        params,
    })
}
