//! Checkpoints: a length-prefixed JSON header describing named tensors
//! (dtype, shape, byte range) followed by their little-endian data. The
//! header's `__metadata__` entry maps string keys to JSON-encoded values
//! holding the model config, hashes and training state.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use mars_chem::ElementSet;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ModelError;
use crate::model::{Model, ModelConfig};
use crate::optim::Adam;
use crate::params::Tensor;
use crate::Scalar;

pub const CHECKPOINT_FORMAT: &str = "mars-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 of the JSON serialization of `value`.
pub fn config_hash(value: &impl Serialize) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    mars_core::jsonl::sha256_hex(json.as_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    /// Optimizer updates applied.
    pub step: u64,
    /// Mean training loss of each completed epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T: Scalar> {
    pub model: Model<T>,
    pub config_hash: String,
    pub vocab_hash: String,
    pub state: TrainState,
    pub adam: Option<Adam<T>>,
    /// Caller-supplied extra metadata (for example the training config).
    pub extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    dtype: String,
    shape: [usize; 2],
    data_offsets: [usize; 2],
}

fn dtype_of<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "F32"
    } else {
        "F64"
    }
}

fn push_tensor<T: Scalar>(
    name: &str,
    t: &Tensor<T>,
    header: &mut serde_json::Map<String, Value>,
    data: &mut Vec<u8>,
) -> Result<(), ModelError> {
    let start = data.len();
    for &x in &t.data {
        if std::mem::size_of::<T>() == 4 {
            data.extend_from_slice(&x.to_f32().unwrap().to_le_bytes());
        } else {
            data.extend_from_slice(&x.to_f64().unwrap().to_le_bytes());
        }
    }
    let info = TensorInfo { dtype: dtype_of::<T>().into(), shape: [t.rows, t.cols], data_offsets: [start, data.len()] };
    header.insert(name.to_string(), serde_json::to_value(info)?);
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(path: &Path, ck: &Checkpoint<T>) -> Result<(), ModelError> {
    let mut header = serde_json::Map::new();
    let mut data = Vec::new();
    let params = &ck.model.params;
    for (name, t) in params.names().iter().zip(params.tensors()) {
        push_tensor(name, t, &mut header, &mut data)?;
    }
    if let Some(adam) = &ck.adam {
        for (i, (name, t)) in params.names().iter().zip(params.tensors()).enumerate() {
            let m = Tensor { rows: t.rows, cols: t.cols, data: adam.m[i].clone() };
            let v = Tensor { rows: t.rows, cols: t.cols, data: adam.v[i].clone() };
            push_tensor(&format!("adam.m.{name}"), &m, &mut header, &mut data)?;
            push_tensor(&format!("adam.v.{name}"), &v, &mut header, &mut data)?;
        }
    }
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut put = |k: &str, v: Value| meta.insert(k.to_string(), v.to_string());
    put("format", Value::from(CHECKPOINT_FORMAT));
    put("version", Value::from(CHECKPOINT_VERSION));
    put("model_config", serde_json::to_value(&ck.model.config)?);
    put("elements", serde_json::to_value(&ck.model.elements)?);
    put("vocab_size", Value::from(ck.model.vocab_size));
    put("config_hash", Value::from(ck.config_hash.clone()));
    put("vocab_hash", Value::from(ck.vocab_hash.clone()));
    put("train_state", serde_json::to_value(&ck.state)?);
    put("adam_step", Value::from(ck.adam.as_ref().map(|a| a.step)));
    for (k, v) in &ck.extra {
        put(&format!("extra.{k}"), v.clone());
    }
    header.insert("__metadata__".into(), serde_json::to_value(meta)?);
    let header = serde_json::to_vec(&Value::Object(header))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&(header.len() as u64).to_le_bytes())?;
        f.write_all(&header)?;
        f.write_all(&data)?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

fn read_tensor<T: Scalar>(info: &TensorInfo, data: &[u8]) -> Result<Tensor<T>, ModelError> {
    let [s, e] = info.data_offsets;
    let bytes = data.get(s..e).ok_or_else(|| bad("tensor data out of range"))?;
    let n = info.shape[0] * info.shape[1];
    let values: Vec<T> = match info.dtype.as_str() {
        "F32" if bytes.len() == 4 * n => {
            bytes.chunks_exact(4).map(|c| T::from(f32::from_le_bytes(c.try_into().unwrap())).unwrap()).collect()
        }
        "F64" if bytes.len() == 8 * n => {
            bytes.chunks_exact(8).map(|c| T::from(f64::from_le_bytes(c.try_into().unwrap())).unwrap()).collect()
        }
        d => return Err(bad(format!("dtype {d} does not match {n} values in {} bytes", bytes.len()))),
    };
    Ok(Tensor { rows: info.shape[0], cols: info.shape[1], data: values })
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, ModelError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(bad("truncated file"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?;
    let data = &bytes[8 + hlen..];
    let mut header: serde_json::Map<String, Value> = serde_json::from_slice(header_bytes)?;
    let meta: BTreeMap<String, String> =
        serde_json::from_value(header.remove("__metadata__").ok_or_else(|| bad("missing metadata"))?)?;
    let get = |k: &str| -> Result<Value, ModelError> {
        let s = meta.get(k).ok_or_else(|| bad(format!("missing metadata {k}")))?;
        Ok(serde_json::from_str(s)?)
    };
    if get("format")? != CHECKPOINT_FORMAT {
        return Err(bad("not a model checkpoint"));
    }
    let version: u32 = serde_json::from_value(get("version")?)?;
    if version > CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let config: ModelConfig = serde_json::from_value(get("model_config")?)?;
    let elements: ElementSet = serde_json::from_value(get("elements")?)?;
    let vocab_size: usize = serde_json::from_value(get("vocab_size")?)?;
    let mut model = Model::<T>::new(&config, elements, vocab_size)?;
    let mut infos: BTreeMap<String, TensorInfo> = BTreeMap::new();
    for (k, v) in header {
        infos.insert(k, serde_json::from_value(v)?);
    }
    let names = model.params.names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let info = infos.get(name).ok_or_else(|| bad(format!("missing tensor {name}")))?;
        let t = read_tensor::<T>(info, data)?;
        let slot = &mut model.params.tensors_mut()[i];
        if (t.rows, t.cols) != (slot.rows, slot.cols) {
            return Err(bad(format!("tensor {name} has shape {:?}, expected {:?}", info.shape, (slot.rows, slot.cols))));
        }
        *slot = t;
    }
    let adam_step: Option<u64> = serde_json::from_value(get("adam_step")?)?;
    let adam = match adam_step {
        None => None,
        Some(step) => {
            let mut adam = Adam::new(&model.params);
            adam.step = step;
            for (i, name) in names.iter().enumerate() {
                for (prefix, dst) in [("adam.m.", &mut adam.m[i]), ("adam.v.", &mut adam.v[i])] {
                    let info = infos.get(&format!("{prefix}{name}")).ok_or_else(|| bad(format!("missing {prefix}{name}")))?;
                    *dst = read_tensor::<T>(info, data)?.data;
                }
            }
            Some(adam)
        }
    };
    let extra = meta
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("extra.").map(|k| (k, v)))
        .map(|(k, v)| Ok((k.to_string(), serde_json::from_str(v)?)))
        .collect::<Result<_, ModelError>>()?;
    Ok(Checkpoint {
        model,
        config_hash: serde_json::from_value(get("config_hash")?)?,
        vocab_hash: serde_json::from_value(get("vocab_hash")?)?,
        state: serde_json::from_value(get("train_state")?)?,
        adam,
        extra,
    })
}
