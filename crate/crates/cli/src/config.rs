use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use thiserror::Error;

use carat_core::valuechain::DEFAULT_THRESHOLD;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Input and run flags shared by every subcommand. Each may also come from
/// a `CARAT_*` variable or the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Bill of materials CSV
    #[arg(long, env = "CARAT_BOM")]
    pub bom: Option<PathBuf>,
    /// Bill of substances CSV
    #[arg(long, env = "CARAT_BOS")]
    pub bos: Option<PathBuf>,
    /// Consumption mix CSV
    #[arg(long, env = "CARAT_MIX")]
    pub mix: Option<PathBuf>,
    /// Inlet attribute shares CSV
    #[arg(long, env = "CARAT_INLET")]
    pub inlet: Option<PathBuf>,
    /// JSON file holding bom, bos, mix and inlet tables
    #[arg(long, env = "CARAT_BUNDLE")]
    pub bundle: Option<PathBuf>,
    /// Tracked elements, comma separated
    #[arg(long, env = "CARAT_ELEMENTS", value_delimiter = ',')]
    pub elements: Option<Vec<String>>,
    /// Attribute set, comma separated
    #[arg(long, env = "CARAT_ATTRIBUTES", value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// Drop substance rows whose ratio falls below this
    #[arg(long, env = "CARAT_THRESHOLD")]
    pub threshold: Option<f64>,
    /// file:<path> or http:<url>
    #[arg(long, env = "CARAT_MAPPER")]
    pub mapper: Option<String>,
    /// Output directory
    #[arg(long, env = "CARAT_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub bom: Option<PathBuf>,
    pub bos: Option<PathBuf>,
    pub mix: Option<PathBuf>,
    pub inlet: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub elements: Option<Vec<String>>,
    pub attributes: Option<Vec<String>>,
    pub threshold: Option<f64>,
    pub mapper: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Vec<String>,
    pub scenario: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File { path: path.to_path_buf(), message: e.to_string() })?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| ConfigError::File { path: path.to_path_buf(), message: e.to_string() })?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.bom, &mut cfg.bos, &mut cfg.mix, &mut cfg.inlet, &mut cfg.bundle, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(m) = cfg.mapper.as_mut() {
            if let Some(rest) = m.strip_prefix("file:") {
                if Path::new(rest).is_relative() {
                    *m = format!("file:{}", base.join(rest).display());
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mapper {
    File(PathBuf),
    Http(String),
}

impl Mapper {
    pub fn parse(spec: &str) -> Result<Self, ConfigError> {
        if let Some(rest) = spec.strip_prefix("file:") {
            return Ok(Mapper::File(PathBuf::from(rest)));
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(Mapper::Http(spec.to_string()));
        }
        if let Some(rest) = spec.strip_prefix("http:") {
            return Ok(Mapper::Http(rest.to_string()));
        }
        Err(ConfigError::Invalid(format!("mapper must be file:<path> or http:<url>, got {spec:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    Tables { bom: PathBuf, bos: PathBuf, mix: Option<PathBuf> },
    Bundle(PathBuf),
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub inlet: Option<PathBuf>,
    pub elements: Vec<String>,
    pub attributes: Vec<String>,
    pub threshold: f64,
    pub mapper: Option<Mapper>,
    pub out: PathBuf,
    pub overrides: Vec<String>,
    pub scenario: String,
}

fn clean_list(v: Vec<String>) -> Vec<String> {
    v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    /// Flags and environment (already merged by clap) over the file over defaults.
    pub fn resolve(args: RunArgs, file: FileConfig) -> Result<Self, ConfigError> {
        let bundle = args.bundle.or(file.bundle);
        let bom = args.bom.or(file.bom);
        let bos = args.bos.or(file.bos);
        let mix = args.mix.or(file.mix);
        let inputs = match (bundle, bom, bos) {
            (Some(b), None, None) => Inputs::Bundle(b),
            (Some(_), _, _) => return Err(ConfigError::Invalid("--bundle excludes --bom/--bos/--mix".into())),
            (None, Some(bom), Some(bos)) => Inputs::Tables { bom, bos, mix },
            _ => return Err(ConfigError::Invalid("need --bundle, or --bom and --bos".into())),
        };
        let elements = clean_list(args.elements.or(file.elements).unwrap_or_else(|| vec!["C".into()]));
        let attributes =
            clean_list(args.attributes.or(file.attributes).unwrap_or_else(|| vec!["fossil".into(), "biogenic".into()]));
        if elements.is_empty() || attributes.is_empty() {
            return Err(ConfigError::Invalid("element and attribute sets must be non-empty".into()));
        }
        let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
        if !(threshold >= 0.0) {
            return Err(ConfigError::Invalid(format!("threshold must be non-negative, got {threshold}")));
        }
        let mapper = args.mapper.or(file.mapper).map(|m| Mapper::parse(&m)).transpose()?;
        Ok(RunConfig {
            inputs,
            inlet: args.inlet.or(file.inlet),
            elements,
            attributes,
            threshold,
            mapper,
            out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("carat-out")),
            overrides: file.overrides,
            scenario: file.scenario.unwrap_or_else(|| "scenario".into()),
        })
    }

    /// mapcache.csv sits next to the input tables.
    pub fn cache_path(&self) -> PathBuf {
        let anchor = match &self.inputs {
            Inputs::Tables { bom, .. } => bom,
            Inputs::Bundle(b) => b,
        };
        anchor.parent().unwrap_or(Path::new(".")).join("mapcache.csv")
    }
}
