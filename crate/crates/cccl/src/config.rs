//! Run configuration from a TOML file. Relative paths are resolved against
//! the directory holding the file; command-line flags override file values.
//!
//! ```toml
//! inventory = "cccl_v1.tsv"
//! corrections = "corrections_v1.tsv"
//! text_store = "stores/text.jsonl"
//! provider = "http://localhost:8000"
//! seed = 0
//! k = 10
//!
//! [models]
//! SD2 = "stores/sd2.jsonl"
//!
//! [templates]
//! en = "a photo of {}"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cccl_core::inventory::{ConceptId, LanguageCode};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fs::read_text;

pub const DEFAULT_N: u32 = 9;
pub const DEFAULT_OUT: &str = "reports";
pub const DEFAULT_RUN_ID: &str = "default";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    inventory: Option<PathBuf>,
    corrections: Option<PathBuf>,
    blocklist: Option<PathBuf>,
    text_store: Option<PathBuf>,
    provider: Option<String>,
    languages: Option<Vec<String>>,
    pseudo_languages: Option<Vec<String>>,
    n: Option<u32>,
    k: Option<u32>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    run_id: Option<String>,
    ci_level: Option<f64>,
    removals: Option<Vec<String>>,
    #[serde(default)]
    models: BTreeMap<String, PathBuf>,
    #[serde(default)]
    templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inventory: Option<PathBuf>,
    pub corrections: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub text_store: Option<PathBuf>,
    pub provider: Option<String>,
    /// Languages scored; `None` means every language with corrections.
    pub languages: Option<Vec<LanguageCode>>,
    /// Languages for pseudocorrections; `None` means every non-source language.
    pub pseudo_languages: Option<Vec<LanguageCode>>,
    pub n: u32,
    pub k: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub run_id: String,
    pub ci_level: f64,
    pub removals: Vec<ConceptId>,
    /// Image store per model id.
    pub models: BTreeMap<String, PathBuf>,
    pub templates: BTreeMap<LanguageCode, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inventory: None,
            corrections: None,
            blocklist: None,
            text_store: None,
            provider: None,
            languages: None,
            pseudo_languages: None,
            n: DEFAULT_N,
            k: cccl_core::pseudo::DEFAULT_K,
            seed: DEFAULT_SEED,
            out: PathBuf::from(DEFAULT_OUT),
            run_id: DEFAULT_RUN_ID.to_owned(),
            ci_level: cccl_core::stats::DEFAULT_CI_LEVEL,
            removals: Vec::new(),
            models: BTreeMap::new(),
            templates: BTreeMap::new(),
        }
    }
}

fn languages(codes: Vec<String>) -> Result<Vec<LanguageCode>> {
    codes
        .into_iter()
        .map(|c| LanguageCode::new(c).map_err(|e| Error::Config(e.to_string())))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let defaults = Self::default();
        let config = Self {
            inventory: file.inventory.map(resolve),
            corrections: file.corrections.map(resolve),
            blocklist: file.blocklist.map(resolve),
            text_store: file.text_store.map(resolve),
            provider: file.provider,
            languages: file.languages.map(languages).transpose()?,
            pseudo_languages: file.pseudo_languages.map(languages).transpose()?,
            n: file.n.unwrap_or(defaults.n),
            k: file.k.unwrap_or(defaults.k),
            seed: file.seed.unwrap_or(defaults.seed),
            out: file.out.map(resolve).unwrap_or(defaults.out),
            run_id: file.run_id.unwrap_or(defaults.run_id),
            ci_level: file.ci_level.unwrap_or(defaults.ci_level),
            removals: file
                .removals
                .unwrap_or_default()
                .into_iter()
                .map(|c| ConceptId::new(c).map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<_>>()?,
            models: file
                .models
                .into_iter()
                .map(|(k, v)| (k, resolve(v)))
                .collect(),
            templates: file
                .templates
                .into_iter()
                .map(|(k, v)| {
                    Ok((
                        LanguageCode::new(k).map_err(|e| Error::Config(e.to_string()))?,
                        v,
                    ))
                })
                .collect::<Result<_>>()?,
        };
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&read_text(path)?, base)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!(
                "ci_level {} is outside (0, 1)",
                self.ci_level
            )));
        }
        if self.run_id.is_empty()
            || self.run_id.contains(['/', '\\'])
            || self.run_id.starts_with('.')
        {
            return Err(Error::Config(format!("invalid run id {:?}", self.run_id)));
        }
        for model in self.models.keys() {
            if model.is_empty() || model.contains(['/', '\\', '\t', '|']) {
                return Err(Error::Config(format!("invalid model id {model:?}")));
            }
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(&self.run_id)
    }
}
