//! Pipeline settings, loadable from a TOML key/value file:
//!
//! ```toml
//! input = "cohort"
//! output = "out"
//! reference_id = "10"
//! methods = ["E", "E+A"]
//! alpha = "auto"
//! jobs = 4
//! seed = 7
//! format = "png"
//! keep_going = false
//!
//! [refine]
//! max_iters = 100
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{RasterFormat, SubjectId, DEFAULT_REFERENCE};
use crate::error::{Error, Result};
use crate::hulls::Alpha;
use crate::registration::{RefineConfig, RegistrationMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub reference_id: SubjectId,
    pub methods: Vec<RegistrationMethod>,
    pub refine: RefineConfig,
    pub alpha: Alpha,
    pub jobs: usize,
    pub seed: u64,
    pub format: RasterFormat,
    pub keep_going: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            output: None,
            reference_id: DEFAULT_REFERENCE,
            methods: RegistrationMethod::ALL.to_vec(),
            refine: RefineConfig::default(),
            alpha: Alpha::Auto,
            jobs: 1,
            seed: 7,
            format: RasterFormat::Png,
            keep_going: false,
        }
    }
}

/// On-disk form; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    reference_id: Option<toml::Value>,
    methods: Option<Vec<String>>,
    refine: Option<RefineConfig>,
    alpha: Option<toml::Value>,
    jobs: Option<usize>,
    seed: Option<u64>,
    format: Option<String>,
    keep_going: Option<bool>,
}

/// Accepts `"36.1"`, `10` or `36.1` for ids and `"auto"` or a number for alpha.
fn scalar_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut cfg = PipelineConfig::default();
        cfg.input = raw.input;
        cfg.output = raw.output;
        if let Some(id) = raw.reference_id {
            cfg.reference_id = scalar_text(&id).parse()?;
        }
        if let Some(m) = raw.methods {
            cfg.methods = parse_methods(&m.join(","))?;
        }
        if let Some(r) = raw.refine {
            cfg.refine = r;
        }
        if let Some(a) = raw.alpha {
            cfg.alpha = scalar_text(&a).parse()?;
        }
        if let Some(j) = raw.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = raw.seed {
            cfg.seed = s;
        }
        if let Some(f) = raw.format {
            cfg.format = f.parse()?;
        }
        if let Some(k) = raw.keep_going {
            cfg.keep_going = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        if self.jobs < 1 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        self.refine.validate()
    }
}

/// Comma-separated method labels, duplicates removed, order kept.
pub fn parse_methods(list: &str) -> Result<Vec<RegistrationMethod>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: RegistrationMethod = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("method list is empty".into()));
    }
    Ok(out)
}
