//! Cosine similarity, image-population cross-consistency and the two
//! per-correction deltas: ΔX_c in image space and ΔSEM in text space.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::embedding::{prefix_label, EmbeddingKey, EmbeddingStore, EmbeddingVector, Modality};
use crate::inventory::{
    ConceptId, ConceptInventory, CorrectionRecord, ErrorTypes, InventoryError, LanguageCode,
    Variant,
};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity of a zero-norm vector is undefined")]
    ZeroNorm,
    #[error("image population is empty")]
    EmptyPopulation,
    #[error("{} missing embedding(s): {}", .0.len(), MissingList(.0))]
    MissingEmbeddings(Vec<MissingKey>),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(
        "invalid pseudocorrection sample for `{concept}`/{language} #{sample_index}: {reason}"
    )]
    InvalidSample {
        concept: ConceptId,
        language: LanguageCode,
        sample_index: u32,
        reason: &'static str,
    },
}

/// A text vector or an image population that scoring needed but did not find.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MissingKey {
    pub modality: Modality,
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub variant: Variant,
}

impl fmt::Display for MissingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&prefix_label(
            self.modality,
            &self.concept,
            &self.language,
            self.variant,
        ))
    }
}

struct MissingList<'a>(&'a [MissingKey]);

impl fmt::Display for MissingList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, key) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{key}")?;
        }
        Ok(())
    }
}

/// (⟨a,b⟩, ‖a‖², ‖b‖²)
fn dot_and_norms(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut dot = CompensatedSum::new();
    let mut aa = CompensatedSum::new();
    let mut bb = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        dot.add(x * y);
        aa.add(x * x);
        bb.add(y * y);
    }
    (dot.total(), aa.total(), bb.total())
}

/// √(aa·bb), taken as one root when the product is representable so that
/// cos(a, a) comes out as exactly 1.
fn norm_product(aa: f64, bb: f64) -> f64 {
    let product = aa * bb;
    if product.is_normal() {
        libm::sqrt(product)
    } else {
        libm::sqrt(aa) * libm::sqrt(bb)
    }
}

/// ⟨a,b⟩ / (‖a‖‖b‖), clamped to [−1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (dot, aa, bb) = dot_and_norms(a.as_slice(), b.as_slice());
    if aa == 0.0 || bb == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot / norm_product(aa, bb)).clamp(-1.0, 1.0))
}

/// The image vectors generated from one prompt.
#[derive(Debug, Clone)]
pub struct ImagePopulation<'a> {
    vectors: Vec<&'a EmbeddingVector>,
}

impl<'a> ImagePopulation<'a> {
    pub fn new(vectors: Vec<&'a EmbeddingVector>) -> Result<Self, SimilarityError> {
        let first = vectors.first().ok_or(SimilarityError::EmptyPopulation)?;
        if let Some(v) = vectors.iter().find(|v| v.dim() != first.dim()) {
            return Err(SimilarityError::DimensionMismatch {
                left: first.dim(),
                right: v.dim(),
            });
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[&'a EmbeddingVector] {
        &self.vectors
    }
}

/// Mean pairwise cosine similarity between every vector of `test` and every
/// vector of `source`: (1 / (n_t·n_s)) Σ_i Σ_j cos(test_i, source_j).
pub fn cross_consistency(
    test: &ImagePopulation<'_>,
    source: &ImagePopulation<'_>,
) -> Result<f64, SimilarityError> {
    if test.dim() != source.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: test.dim(),
            right: source.dim(),
        });
    }
    let mut total = CompensatedSum::new();
    for a in &test.vectors {
        for b in &source.vectors {
            total.add(cosine_similarity(a, b)?);
        }
    }
    Ok(total.total() / (test.len() * source.len()) as f64)
}

/// X_c(corrected) − X_c(original), both measured against the same source population.
pub fn delta_xc(
    original: &ImagePopulation<'_>,
    corrected: &ImagePopulation<'_>,
    source: &ImagePopulation<'_>,
) -> Result<f64, SimilarityError> {
    Ok(cross_consistency(corrected, source)? - cross_consistency(original, source)?)
}

/// SIM(source, corrected) − SIM(source, original) over text embeddings.
pub fn delta_sem(
    source: &EmbeddingVector,
    original: &EmbeddingVector,
    corrected: &EmbeddingVector,
) -> Result<f64, SimilarityError> {
    Ok(cosine_similarity(source, corrected)? - cosine_similarity(source, original)?)
}

/// Scores of one correction (real or pseudo) for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptResult {
    pub concept: ConceptId,
    pub language: LanguageCode,
    /// Pseudocorrection sample index; `None` for real corrections.
    pub sample_index: Option<u32>,
    pub original: String,
    pub corrected: String,
    pub xc_original: f64,
    pub xc_corrected: f64,
    pub delta_xc: f64,
    pub delta_sem: f64,
    pub error_types: ErrorTypes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScores {
    pub model_id: String,
    pub results: Vec<ConceptResult>,
}

/// (concept, language, variant) of a prompt whose text vector or image
/// population is looked up in the stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PromptRef {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub variant: Variant,
}

impl PromptRef {
    pub(crate) fn new(concept: &ConceptId, language: &LanguageCode, variant: Variant) -> Self {
        Self {
            concept: concept.clone(),
            language: language.clone(),
            variant,
        }
    }

    fn text_key(&self) -> EmbeddingKey {
        EmbeddingKey::text(self.concept.clone(), self.language.clone(), self.variant)
    }

    fn missing(&self, modality: Modality) -> MissingKey {
        MissingKey {
            modality,
            concept: self.concept.clone(),
            language: self.language.clone(),
            variant: self.variant,
        }
    }
}

/// The three prompts a correction is measured on.
pub(crate) struct Triple {
    pub source: PromptRef,
    pub original_text: PromptRef,
    pub original_image: PromptRef,
    pub corrected: PromptRef,
}

pub(crate) struct Stores<'a> {
    pub images: &'a EmbeddingStore,
    pub text: &'a EmbeddingStore,
}

impl Stores<'_> {
    pub(crate) fn note_missing(&self, triple: &Triple, missing: &mut BTreeSet<MissingKey>) {
        for p in [&triple.source, &triple.original_text, &triple.corrected] {
            if !self.text.contains(&p.text_key()) {
                missing.insert(p.missing(Modality::Text));
            }
        }
        for p in [&triple.source, &triple.original_image, &triple.corrected] {
            if self
                .images
                .population(&p.concept, &p.language, p.variant)
                .is_empty()
            {
                missing.insert(p.missing(Modality::Image));
            }
        }
    }

    fn population(&self, p: &PromptRef) -> Result<ImagePopulation<'_>, SimilarityError> {
        ImagePopulation::new(self.images.population(&p.concept, &p.language, p.variant))
    }

    fn text(&self, p: &PromptRef) -> Result<&EmbeddingVector, SimilarityError> {
        self.text.get(&p.text_key()).ok_or_else(|| {
            SimilarityError::MissingEmbeddings(alloc::vec![p.missing(Modality::Text)])
        })
    }

    /// (xc_original, xc_corrected, delta_sem)
    pub(crate) fn measure(&self, triple: &Triple) -> Result<(f64, f64, f64), SimilarityError> {
        let source = self.population(&triple.source)?;
        let xc_original = cross_consistency(&self.population(&triple.original_image)?, &source)?;
        let xc_corrected = cross_consistency(&self.population(&triple.corrected)?, &source)?;
        let sem = delta_sem(
            self.text(&triple.source)?,
            self.text(&triple.original_text)?,
            self.text(&triple.corrected)?,
        )?;
        Ok((xc_original, xc_corrected, sem))
    }
}

pub(crate) fn missing_error(missing: BTreeSet<MissingKey>) -> Result<(), SimilarityError> {
    if missing.is_empty() {
        Ok(())
    } else {
        Err(SimilarityError::MissingEmbeddings(
            missing.into_iter().collect(),
        ))
    }
}

/// Scores every correction against one model's image store.
///
/// Requires, per correction, text vectors and image populations for the
/// source-language prompt, the original translation and the corrected
/// translation. Every absent key is collected and reported before any
/// scoring happens. Results are ordered by (concept, language).
pub fn score_concepts(
    inv: &ConceptInventory,
    corrections: &[CorrectionRecord],
    image_store: &EmbeddingStore,
    text_store: &EmbeddingStore,
    model_id: &str,
) -> Result<ModelScores, SimilarityError> {
    inv.check_corrections(corrections)?;
    let source_language = inv.source_language();
    let stores = Stores {
        images: image_store,
        text: text_store,
    };
    let mut ordered: Vec<&CorrectionRecord> = corrections.iter().collect();
    ordered.sort_by(|a, b| (&a.concept, &a.language).cmp(&(&b.concept, &b.language)));

    let triples: Vec<Triple> = ordered
        .iter()
        .map(|r| {
            let original = PromptRef::new(&r.concept, &r.language, Variant::Original);
            Triple {
                source: PromptRef::new(&r.concept, source_language, Variant::Original),
                original_text: original.clone(),
                original_image: original,
                corrected: PromptRef::new(&r.concept, &r.language, Variant::Corrected),
            }
        })
        .collect();

    let mut missing = BTreeSet::new();
    for triple in &triples {
        stores.note_missing(triple, &mut missing);
    }
    missing_error(missing)?;

    let results = ordered
        .iter()
        .zip(&triples)
        .map(|(record, triple)| {
            let (xc_original, xc_corrected, delta_sem) = stores.measure(triple)?;
            Ok(ConceptResult {
                concept: record.concept.clone(),
                language: record.language.clone(),
                sample_index: None,
                original: record.original.clone(),
                corrected: record.corrected.clone(),
                xc_original,
                xc_corrected,
                delta_xc: xc_corrected - xc_original,
                delta_sem,
                error_types: record.error_types,
            })
        })
        .collect::<Result<Vec<_>, SimilarityError>>()?;
    Ok(ModelScores {
        model_id: model_id.to_string(),
        results,
    })
}
