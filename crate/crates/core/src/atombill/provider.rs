use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::Duration;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Requests per HTTP call; the service rejects larger batches.
pub const MAX_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MappedReaction {
    pub mapped: String,
    pub confidence: Option<f64>,
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("no mapping for {} reaction(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Missing(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("mapping service request failed: {0}")]
    Transport(String),
    #[error("mapping service rejected a reaction: {0}")]
    Rejected(String),
    #[error("reaction exceeds the mapping model's token budget: {0}")]
    TokenBudget(String),
    #[error("mapping service unavailable: {0}")]
    Unavailable(String),
    #[error("mapping service response violates the contract: {0}")]
    Contract(String),
}

/// Source of atom-mapped reaction SMILES. Output is the same length and
/// order as the input.
pub trait MappingProvider: Send + Sync {
    fn map(&self, reactions: &[String]) -> Result<Vec<MappedReaction>, MappingError>;

    fn describe(&self) -> String;
}

#[derive(Debug, Serialize, Deserialize)]
struct MapPair {
    unmapped: String,
    mapped: String,
}

fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>, MappingError> {
    let file = File::open(path).map_err(|source| MappingError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<MapPair>() {
        let row = row.map_err(|e| MappingError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        out.insert(row.unmapped, row.mapped);
    }
    Ok(out)
}

/// Mapped reactions from a two-column CSV (`unmapped,mapped`).
#[derive(Debug, Clone)]
pub struct FileProvider {
    path: PathBuf,
    table: BTreeMap<String, String>,
}

impl FileProvider {
    pub fn open(path: &Path) -> Result<Self, MappingError> {
        Ok(Self { path: path.to_path_buf(), table: read_pairs(path)? })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl MappingProvider for FileProvider {
    fn map(&self, reactions: &[String]) -> Result<Vec<MappedReaction>, MappingError> {
        let missing: Vec<String> = reactions.iter().filter(|r| !self.table.contains_key(*r)).cloned().collect();
        if !missing.is_empty() {
            return Err(MappingError::Missing(missing));
        }
        Ok(reactions
            .iter()
            .map(|r| MappedReaction { mapped: self.table[r].clone(), confidence: None })
            .collect())
    }

    fn describe(&self) -> String {
        format!("file:{}", self.path.display())
    }
}

#[derive(Debug, Serialize)]
struct MapRequest<'a> {
    reactions: &'a [String],
}

#[derive(Debug, Deserialize)]
struct MapResponse {
    mapped: Vec<String>,
    confidence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub model_version: Option<String>,
}

/// Client for the mapping service (`POST /map`, `GET /health`).
#[derive(Debug, Clone)]
pub struct HttpProvider {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(base_url: &str) -> Result<Self, MappingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| MappingError::Transport(e.to_string()))?;
        Ok(Self { base: base_url.trim_end_matches('/').to_string(), client })
    }

    pub fn health(&self) -> Result<HealthStatus, MappingError> {
        let resp = self
            .client
            .get(format!("{}/health", self.base))
            .send()
            .map_err(|e| MappingError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| MappingError::Transport(e.to_string()))?;
        match status {
            200 => serde_json::from_str(&body).map_err(|e| MappingError::Contract(e.to_string())),
            503 => Err(MappingError::Unavailable(body)),
            s => Err(MappingError::Transport(format!("/health returned {s}: {body}"))),
        }
    }

    fn map_batch(&self, batch: &[String]) -> Result<Vec<MappedReaction>, MappingError> {
        let resp = self
            .client
            .post(format!("{}/map", self.base))
            .json(&MapRequest { reactions: batch })
            .send()
            .map_err(|e| MappingError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| MappingError::Transport(e.to_string()))?;
        let parsed: MapResponse = match status {
            200 => serde_json::from_str(&body).map_err(|e| MappingError::Contract(e.to_string()))?,
            400 => return Err(MappingError::Rejected(body)),
            413 => return Err(MappingError::TokenBudget(body)),
            503 => return Err(MappingError::Unavailable(body)),
            s => return Err(MappingError::Transport(format!("/map returned {s}: {body}"))),
        };
        if parsed.mapped.len() != batch.len() || parsed.confidence.len() != batch.len() {
            return Err(MappingError::Contract(format!(
                "sent {} reactions, got {} mapped and {} confidence values",
                batch.len(),
                parsed.mapped.len(),
                parsed.confidence.len()
            )));
        }
        if let Some(c) = parsed.confidence.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(MappingError::Contract(format!("confidence {c} outside [0, 1]")));
        }
        Ok(parsed
            .mapped
            .into_iter()
            .zip(parsed.confidence)
            .map(|(mapped, c)| MappedReaction { mapped, confidence: Some(c) })
            .collect())
    }
}

impl MappingProvider for HttpProvider {
    fn map(&self, reactions: &[String]) -> Result<Vec<MappedReaction>, MappingError> {
        let mut out = Vec::with_capacity(reactions.len());
        for batch in reactions.chunks(MAX_BATCH) {
            debug!("posting {} reactions to {}/map", batch.len(), self.base);
            out.extend(self.map_batch(batch)?);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("http:{}", self.base)
    }
}

/// Mapped reactions keyed by the exact unmapped string. Safe for concurrent
/// lookup and insert.
#[derive(Debug, Default)]
pub struct MappingCache {
    entries: RwLock<HashMap<String, String>>,
}

impl MappingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load a cache file; a missing file gives an empty cache.
    pub fn load(path: &Path) -> Result<Self, MappingError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let pairs = read_pairs(path)?;
        Ok(Self { entries: RwLock::new(pairs.into_iter().collect()) })
    }

    pub fn save(&self, path: &Path) -> Result<(), MappingError> {
        let entries = self.entries.read().expect("cache lock poisoned");
        let sorted: BTreeMap<&String, &String> = entries.iter().collect();
        let file = File::create(path).map_err(|source| MappingError::Io { path: path.to_path_buf(), source })?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        let fmt_err = |e: csv::Error| MappingError::Format { path: path.to_path_buf(), message: e.to_string() };
        for (unmapped, mapped) in sorted {
            writer
                .serialize(MapPair { unmapped: unmapped.clone(), mapped: mapped.clone() })
                .map_err(fmt_err)?;
        }
        writer.flush().map_err(|source| MappingError::Io { path: path.to_path_buf(), source })
    }

    pub fn get(&self, unmapped: &str) -> Option<String> {
        self.entries.read().expect("cache lock poisoned").get(unmapped).cloned()
    }

    pub fn insert(&self, unmapped: String, mapped: String) {
        self.entries.write().expect("cache lock poisoned").insert(unmapped, mapped);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolve every reaction, asking `provider` only for cache misses.
    pub fn resolve(&self, provider: &dyn MappingProvider, reactions: &[String]) -> Result<Vec<String>, MappingError> {
        let misses: Vec<String> = reactions
            .iter()
            .filter(|r| self.get(r).is_none())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !misses.is_empty() {
            info!("mapping {} reaction(s) via {}", misses.len(), provider.describe());
            let mapped = provider.map(&misses)?;
            if mapped.len() != misses.len() {
                return Err(MappingError::Contract(format!(
                    "provider returned {} results for {} reactions",
                    mapped.len(),
                    misses.len()
                )));
            }
            for (unmapped, m) in misses.into_iter().zip(mapped) {
                self.insert(unmapped, m.mapped);
            }
        }
        Ok(reactions.iter().map(|r| self.get(r).expect("inserted above")).collect())
    }
}
