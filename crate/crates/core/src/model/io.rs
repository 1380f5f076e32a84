//! Model files: magic, format version, JSON header (schema snapshot, config,
//! layout, fitted scaling, tensor manifest), little-endian f32 tensors, CRC32.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, push_f32s, WordReader};
use crate::error::{Error, Result};
use crate::model::{EmbNet, ModelConfig, ModelLayout};
use crate::nncore::Mode;
use crate::preprocess::{EncodedMatrix, Standardizer};
use crate::schema::DatasetSchema;

const MAGIC: &[u8; 8] = b"EMBMODEL";
const VERSION: u32 = 1;

/// A trained network together with everything needed to feed it new data.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    /// Schema with the training vocabularies.
    pub schema: DatasetSchema,
    pub standardizer: Standardizer,
    pub net: EmbNet<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: DatasetSchema,
    config: ModelConfig,
    layout: ModelLayout,
    standardizer: Standardizer,
    parameter_count: usize,
    tensors: Vec<TensorEntry>,
}

impl ModelBundle {
    /// Re-indexes `matrix` into the model's vocabularies (by category string;
    /// unseen values map to `nan`) and applies the fitted scaling.
    pub fn prepare(&self, matrix: &EncodedMatrix, data_schema: &DatasetSchema) -> Result<EncodedMatrix> {
        let layout = &self.net.layout;
        let data_conts: Vec<&str> = matrix.cont_specs.iter().map(|c| c.name.as_str()).collect();
        let model_conts: Vec<&str> = layout.cont.iter().map(|c| c.name.as_str()).collect();
        let data_cats: Vec<&str> = matrix.cat_specs.iter().map(|c| c.name.as_str()).collect();
        let model_cats: Vec<&str> = layout.cat.iter().map(|c| c.name.as_str()).collect();
        if data_conts != model_conts || data_cats != model_cats {
            return Err(Error::LayoutMismatch(format!(
                "model columns categorical {model_cats:?} continuous {model_conts:?}; \
                 data columns categorical {data_cats:?} continuous {data_conts:?}"
            )));
        }
        let mut maps = Vec::with_capacity(layout.cat.len());
        for spec in &layout.cat {
            let (Some(model_col), Some(data_col)) = (self.schema.column(&spec.name), data_schema.column(&spec.name))
            else {
                return Err(Error::LayoutMismatch(format!(
                    "column {} missing from a schema",
                    spec.name
                )));
            };
            let map: Vec<u32> = data_col
                .vocabulary
                .iter()
                .map(|v| {
                    model_col
                        .index_of(v)
                        .map(|i| i as u32)
                        .ok_or_else(|| Error::LayoutMismatch(format!("model vocabulary of {} lacks 'nan'", spec.name)))
                })
                .collect::<Result<_>>()?;
            maps.push(map);
        }
        let mut out = matrix.clone();
        out.cat_specs = layout.cat.clone();
        let k = layout.cat.len();
        for (i, v) in out.cat.iter_mut().enumerate() {
            let map = &maps[i % k];
            *v = *map.get(*v as usize).ok_or_else(|| {
                Error::LayoutMismatch(format!(
                    "index {v} outside the data vocabulary of {}",
                    layout.cat[i % k].name
                ))
            })?;
        }
        let out = match &matrix.cont_stats {
            Some(_) => out,
            None => self.standardizer.apply(&out)?,
        };
        layout.check(&out)?;
        Ok(out)
    }
}

pub fn model_to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let state = bundle.net.state();
    let header = serde_json::to_vec(&Header {
        schema: bundle.schema.clone(),
        config: bundle.net.config.clone(),
        layout: bundle.net.layout.clone(),
        standardizer: bundle.standardizer.clone(),
        parameter_count: bundle.net.count_parameters(),
        tensors: state
            .iter()
            .map(|(name, v)| TensorEntry {
                name: name.clone(),
                len: v.len(),
            })
            .collect(),
    })?;
    let mut payload = Vec::new();
    for (_, v) in &state {
        push_f32s(&mut payload, v.iter().copied());
    }
    Ok(container::encode(MAGIC, VERSION, &header, &payload))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
    let (header, payload) = container::decode(bytes, MAGIC, VERSION)?;
    let h: Header = serde_json::from_slice(header)?;
    h.schema.validate()?;
    let mut net = EmbNet::<f32>::new(h.layout, &h.config)?;
    let expected: Vec<(String, usize)> = net.state().into_iter().map(|(n, v)| (n, v.len())).collect();
    let stored: Vec<(String, usize)> = h.tensors.into_iter().map(|t| (t.name, t.len)).collect();
    if expected != stored {
        return Err(Error::Format("tensor manifest does not match the model layout".into()));
    }
    let mut reader = WordReader::new(payload);
    for slot in net.state_mut() {
        let values = reader.f32s(slot.len())?;
        slot.copy_from_slice(&values);
    }
    reader.finish()?;
    net.set_mode(Mode::Eval);
    Ok(ModelBundle {
        schema: h.schema,
        standardizer: h.standardizer,
        net,
    })
}

pub fn save_model(path: impl AsRef<Path>, bundle: &ModelBundle) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(bundle)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
