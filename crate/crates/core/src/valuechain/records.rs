use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{GraphError, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BomRecord {
    pub node_c: String,
    pub node_b: String,
    pub node_g: String,
    pub role: Role,
    pub material: String,
    pub ratio: f64,
    /// Human-readable material name; optional trailing column.
    #[serde(default)]
    pub material_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BosRecord {
    pub node_c: String,
    pub node_b: String,
    pub node_g: String,
    pub role: Role,
    pub material: String,
    pub smiles: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixRecord {
    pub mix_c: String,
    pub mix_p: String,
    pub src_c: String,
    pub src_b: String,
    pub src_g: String,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InletRecord {
    pub mix_c: String,
    pub mix_p: String,
    pub smiles: String,
    pub element: String,
    pub attribute: String,
    pub share: f64,
}

/// All four input tables in one JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(default)]
    pub bom: Vec<BomRecord>,
    #[serde(default)]
    pub bos: Vec<BosRecord>,
    #[serde(default)]
    pub mix: Vec<MixRecord>,
    #[serde(default)]
    pub inlet: Vec<InletRecord>,
}

impl Bundle {
    pub fn read(path: &Path) -> Result<Self, GraphError> {
        let file = File::open(path).map_err(|e| GraphError::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| GraphError::Schema { file: path.display().to_string(), message: e.to_string() })
    }

    pub fn write(&self, path: &Path) -> Result<(), GraphError> {
        let file = File::create(path).map_err(|e| GraphError::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)
            .map_err(|e| GraphError::Schema { file: path.display().to_string(), message: e.to_string() })
    }
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, GraphError> {
    let file = File::open(path).map_err(|e| GraphError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| GraphError::Schema { file: path.display().to_string(), message: e.to_string() })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), GraphError> {
    let file = File::create(path).map_err(|e| GraphError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| GraphError::Schema { file: path.display().to_string(), message: e.to_string() })?;
    }
    writer.flush().map_err(|e| GraphError::io(path, e))
}
