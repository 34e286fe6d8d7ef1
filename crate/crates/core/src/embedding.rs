//! Keyed embedding vectors for text surfaces and generated images.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::inventory::{ConceptId, LanguageCode, Variant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("vector has dimension {found}, store expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vectors must have at least one component")]
    EmptyVector,
    #[error("component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("text keys must use index 0, got {0}")]
    TextIndex(u32),
    #[error("extractor id must not be empty")]
    EmptyExtractor,
    #[error("invalid modality {0:?}")]
    InvalidModality(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Text,
    Image,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Image => "image",
        })
    }
}

impl FromStr for Modality {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            _ => Err(StoreError::InvalidModality(s.into())),
        }
    }
}

/// Address of one vector: `(concept, language, variant, modality, index)`.
/// `index` is the image sample number and is always 0 for text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EmbeddingKey {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub variant: Variant,
    pub modality: Modality,
    pub index: u32,
}

impl EmbeddingKey {
    pub fn text(concept: ConceptId, language: LanguageCode, variant: Variant) -> Self {
        Self {
            concept,
            language,
            variant,
            modality: Modality::Text,
            index: 0,
        }
    }

    pub fn image(concept: ConceptId, language: LanguageCode, variant: Variant, index: u32) -> Self {
        Self {
            concept,
            language,
            variant,
            modality: Modality::Image,
            index,
        }
    }
}

/// `concept|language|variant|modality|index`
impl fmt::Display for EmbeddingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}|{}",
            self.concept, self.language, self.variant, self.modality, self.index
        )
    }
}

/// A finite, non-empty real vector. Stored exactly as produced by the
/// extractor; nothing is normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, StoreError> {
        if components.is_empty() {
            return Err(StoreError::EmptyVector);
        }
        if let Some((index, &value)) = components.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(StoreError::NonFinite { index, value });
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = StoreError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

/// All vectors produced by one extractor. The dimension is fixed by the first
/// insertion when the store is created without one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    extractor_id: String,
    entries: BTreeMap<EmbeddingKey, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(extractor_id: impl Into<String>, dim: Option<usize>) -> Result<Self, StoreError> {
        let extractor_id = extractor_id.into();
        if extractor_id.is_empty() {
            return Err(StoreError::EmptyExtractor);
        }
        if dim == Some(0) {
            return Err(StoreError::EmptyVector);
        }
        Ok(Self {
            dim,
            extractor_id,
            entries: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn extractor_id(&self) -> &str {
        &self.extractor_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or replaces a vector; the last put for a key wins.
    pub fn put(&mut self, key: EmbeddingKey, vector: EmbeddingVector) -> Result<(), StoreError> {
        self.check_dim(vector.dim())?;
        if key.modality == Modality::Text && key.index != 0 {
            return Err(StoreError::TextIndex(key.index));
        }
        self.dim = Some(vector.dim());
        self.entries.insert(key, vector);
        Ok(())
    }

    /// Fails when `dim` disagrees with the store's dimension.
    pub fn check_dim(&self, dim: usize) -> Result<(), StoreError> {
        match self.dim {
            Some(expected) if expected != dim => Err(StoreError::DimensionMismatch {
                expected,
                found: dim,
            }),
            _ => Ok(()),
        }
    }

    pub fn get(&self, key: &EmbeddingKey) -> Option<&EmbeddingVector> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &EmbeddingKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EmbeddingKey, &EmbeddingVector)> + '_ {
        self.entries.iter()
    }

    /// All image vectors for one prompt, ordered by sample index.
    pub fn population(
        &self,
        concept: &ConceptId,
        language: &LanguageCode,
        variant: Variant,
    ) -> Vec<&EmbeddingVector> {
        let lo = EmbeddingKey::image(concept.clone(), language.clone(), variant, 0);
        let hi = EmbeddingKey::image(concept.clone(), language.clone(), variant, u32::MAX);
        self.entries.range(lo..=hi).map(|(_, v)| v).collect()
    }

    /// Re-checks the uniform-dimension invariant over every entry.
    pub fn verify_dims(&self) -> Result<(), StoreError> {
        let mut dims = self.entries.values().map(EmbeddingVector::dim);
        let Some(expected) = self.dim.or_else(|| dims.next()) else {
            return Ok(());
        };
        match dims.find(|&d| d != expected) {
            Some(found) => Err(StoreError::DimensionMismatch { expected, found }),
            None => Ok(()),
        }
    }
}

/// Human-readable prompt prefix used in missing-key reports.
pub(crate) fn prefix_label(
    modality: Modality,
    concept: &ConceptId,
    language: &LanguageCode,
    variant: Variant,
) -> String {
    format!("{modality}:{concept}|{language}|{variant}")
}
