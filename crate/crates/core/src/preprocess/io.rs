//! Binary dataset files: a JSON header (schema snapshot and column specs)
//! followed by little-endian 32-bit columns and a CRC32 trailer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, push_f32s, push_u32s, WordReader};
use crate::error::{Error, Result};
use crate::preprocess::encode::{CatSpec, ContSpec, EncodedMatrix};
use crate::schema::DatasetSchema;

const MAGIC: &[u8; 8] = b"EMBDATA\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n_rows: usize,
    schema: DatasetSchema,
    cat_specs: Vec<CatSpec>,
    cont_specs: Vec<ContSpec>,
}

pub fn dataset_to_bytes(matrix: &EncodedMatrix, schema: &DatasetSchema) -> Result<Vec<u8>> {
    if matrix.cont_stats.is_some() {
        return Err(Error::invalid(
            "only unstandardized matrices are stored; scaling is refit per fold",
        ));
    }
    matrix.validate()?;
    let header = serde_json::to_vec(&Header {
        n_rows: matrix.n_rows(),
        schema: schema.clone(),
        cat_specs: matrix.cat_specs.clone(),
        cont_specs: matrix.cont_specs.clone(),
    })?;
    let mut payload = Vec::new();
    push_u32s(&mut payload, matrix.cat.iter().copied());
    push_f32s(&mut payload, matrix.cont.iter().map(|&v| v as f32));
    push_u32s(&mut payload, matrix.cont_missing.iter().map(|&m| m as u32));
    push_u32s(&mut payload, matrix.target.iter().map(|&t| t as u32));
    Ok(container::encode(MAGIC, VERSION, &header, &payload))
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<(EncodedMatrix, DatasetSchema)> {
    let (header, payload) = container::decode(bytes, MAGIC, VERSION)?;
    let h: Header = serde_json::from_slice(header)?;
    h.schema.validate()?;
    let n = h.n_rows;
    let mut r = WordReader::new(payload);
    let cat = r.u32s(n * h.cat_specs.len())?;
    let cont = r.f32s(n * h.cont_specs.len())?.into_iter().map(f64::from).collect();
    let cont_missing = r.u32s(n * h.cont_specs.len())?.into_iter().map(|m| m != 0).collect();
    let target = r
        .u32s(n)?
        .into_iter()
        .map(|t| u8::try_from(t).map_err(|_| Error::Format(format!("bad target value {t}"))))
        .collect::<Result<_>>()?;
    r.finish()?;
    let m = EncodedMatrix {
        cat,
        cont,
        cont_missing,
        target,
        cat_specs: h.cat_specs,
        cont_specs: h.cont_specs,
        cont_stats: None,
    };
    m.validate()?;
    Ok((m, h.schema))
}

pub fn save_dataset(path: impl AsRef<Path>, matrix: &EncodedMatrix, schema: &DatasetSchema) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_bytes(matrix, schema)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(EncodedMatrix, DatasetSchema)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    dataset_from_bytes(&bytes)
}
