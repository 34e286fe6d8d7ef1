//! Pseudocorrections: a concept is given another concept's in-language
//! translation as a fake "original", then corrected back to its true one.
//!
//! Donor selection is reproducible across implementations. For each
//! (seed, language, concept) a ChaCha8 stream is keyed by
//!
//! ```text
//! SHA-256( "cccl-pseudo-v1" ‖ seed as u64 LE
//!          ‖ len(language) as u64 LE ‖ language
//!          ‖ len(concept) as u64 LE ‖ concept )
//! ```
//!
//! Eligible donors (other active concepts whose surface in the language
//! differs from the target's, ordered by concept id) are shuffled with a
//! partial Fisher–Yates pass of length k. Each draw takes one `u32` from the
//! stream and maps it to `[0, n)` with Lemire's multiply-and-reject method.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::EmbeddingStore;
use crate::inventory::{
    ConceptId, ConceptInventory, ErrorTypes, InventoryError, LanguageCode, Variant,
};
use crate::similarity::{
    missing_error, ConceptResult, ModelScores, PromptRef, SimilarityError, Stores, Triple,
};

pub const DEFAULT_K: u32 = 10;

const STREAM_DOMAIN: &[u8] = b"cccl-pseudo-v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PseudoError {
    #[error("language {0} is not in the inventory")]
    UnknownLanguage(LanguageCode),
    #[error("pseudocorrections are not defined for the source language {0}")]
    SourceLanguage(LanguageCode),
    #[error("k must be positive")]
    ZeroK,
    #[error("`{concept}`/{language}: k = {k} exceeds the {available} eligible donor(s)")]
    InsufficientDonors {
        concept: ConceptId,
        language: LanguageCode,
        k: u32,
        available: usize,
    },
}

/// One synthetic correction: `concept` was "mistranslated" as the surface of
/// `donor_concept` and corrected back to its own surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoCorrectionSample {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub sample_index: u32,
    pub donor_concept: ConceptId,
    pub pseudo_original: String,
    pub corrected: String,
}

/// The per-concept random stream.
pub fn concept_stream(seed: u64, language: &LanguageCode, concept: &ConceptId) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(STREAM_DOMAIN);
    hasher.update(seed.to_le_bytes());
    for part in [language.as_str(), concept.as_str()] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Uniform integer in `[0, n)`, `n > 0`, without modulo bias.
pub fn bounded_u32<R: RngCore>(rng: &mut R, n: u32) -> u32 {
    debug_assert!(n > 0);
    let mut m = u64::from(rng.next_u32()) * u64::from(n);
    if (m as u32) < n {
        let threshold = n.wrapping_neg() % n;
        while (m as u32) < threshold {
            m = u64::from(rng.next_u32()) * u64::from(n);
        }
    }
    (m >> 32) as u32
}

/// The first `k` positions of a Fisher–Yates shuffle of `items`.
fn choose_distinct<T: Clone, R: RngCore>(rng: &mut R, items: &[T], k: usize) -> Vec<T> {
    let mut pool: Vec<T> = items.to_vec();
    for i in 0..k {
        let j = i + bounded_u32(rng, (pool.len() - i) as u32) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Donors eligible for `concept` in `language`, ordered by concept id.
pub fn eligible_donors<'a>(
    inv: &'a ConceptInventory,
    concept: &ConceptId,
    language: &LanguageCode,
) -> Vec<(&'a ConceptId, &'a str)> {
    let target = inv.surface(concept, language);
    let mut donors: Vec<(&ConceptId, &str)> = inv
        .concepts()
        .filter(|c| *c != concept)
        .filter_map(|c| inv.surface(c, language).map(|s| (c, s)))
        .filter(|(_, s)| Some(*s) != target)
        .collect();
    donors.sort_by(|a, b| a.0.cmp(b.0));
    donors
}

/// Draws `k` distinct donors for every active concept of `language`.
/// Samples come out ordered by (concept id, sample index).
pub fn generate_pseudocorrections(
    inv: &ConceptInventory,
    language: &LanguageCode,
    k: u32,
    seed: u64,
) -> Result<Vec<PseudoCorrectionSample>, PseudoError> {
    if inv.language_index(language).is_none() {
        return Err(PseudoError::UnknownLanguage(language.clone()));
    }
    if language == inv.source_language() {
        return Err(PseudoError::SourceLanguage(language.clone()));
    }
    if k == 0 {
        return Err(PseudoError::ZeroK);
    }
    let mut concepts: Vec<&ConceptId> = inv.concepts().collect();
    concepts.sort();

    let mut samples = Vec::with_capacity(concepts.len() * k as usize);
    for concept in concepts {
        let donors = eligible_donors(inv, concept, language);
        if donors.len() < k as usize {
            return Err(PseudoError::InsufficientDonors {
                concept: concept.clone(),
                language: language.clone(),
                k,
                available: donors.len(),
            });
        }
        let corrected = inv.surface(concept, language).unwrap_or_default();
        let mut rng = concept_stream(seed, language, concept);
        for (i, (donor, surface)) in choose_distinct(&mut rng, &donors, k as usize)
            .into_iter()
            .enumerate()
        {
            samples.push(PseudoCorrectionSample {
                concept: concept.clone(),
                language: language.clone(),
                sample_index: i as u32,
                donor_concept: donor.clone(),
                pseudo_original: surface.into(),
                corrected: corrected.into(),
            });
        }
    }
    Ok(samples)
}

fn invalid(sample: &PseudoCorrectionSample, reason: &'static str) -> SimilarityError {
    SimilarityError::InvalidSample {
        concept: sample.concept.clone(),
        language: sample.language.clone(),
        sample_index: sample.sample_index,
        reason,
    }
}

/// Scores pseudocorrections as if they were real corrections, with the
/// pseudo-original in the role of the original translation.
///
/// The pseudo-original prompt is `(concept, language, pseudo:K)` when the
/// stores hold it; otherwise the donor's own original prompt stands in, since
/// its surface is the same text. Results are ordered by (concept, sample index).
pub fn evaluate_pseudocorrections(
    inv: &ConceptInventory,
    samples: &[PseudoCorrectionSample],
    image_store: &EmbeddingStore,
    text_store: &EmbeddingStore,
    model_id: &str,
) -> Result<ModelScores, SimilarityError> {
    let mut seen = BTreeSet::new();
    for s in samples {
        for c in [&s.concept, &s.donor_concept] {
            if !inv.contains_concept(c) {
                return Err(InventoryError::UnknownConcept(c.clone()).into());
            }
        }
        if inv.language_index(&s.language).is_none() {
            return Err(InventoryError::UnknownLanguage(s.language.clone()).into());
        }
        if s.donor_concept == s.concept {
            return Err(invalid(s, "donor is the concept itself"));
        }
        if s.pseudo_original == s.corrected {
            return Err(invalid(s, "pseudo-original equals the corrected surface"));
        }
        if !seen.insert((&s.concept, &s.language, s.sample_index)) {
            return Err(invalid(s, "duplicate sample index"));
        }
    }

    let mut ordered: Vec<&PseudoCorrectionSample> = samples.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.concept, &a.language, a.sample_index).cmp(&(&b.concept, &b.language, b.sample_index))
    });

    let stores = Stores {
        images: image_store,
        text: text_store,
    };
    let source_language = inv.source_language();
    let triples: Vec<Triple> = ordered
        .iter()
        .map(|s| {
            let staged = PromptRef::new(
                &s.concept,
                &s.language,
                Variant::PseudoOriginal(s.sample_index),
            );
            let donor = PromptRef::new(&s.donor_concept, &s.language, Variant::Original);
            let staged_text = crate::embedding::EmbeddingKey::text(
                staged.concept.clone(),
                staged.language.clone(),
                staged.variant,
            );
            let original_text = if text_store.contains(&staged_text) {
                staged.clone()
            } else {
                donor.clone()
            };
            let original_image = if image_store
                .population(&staged.concept, &staged.language, staged.variant)
                .is_empty()
            {
                donor
            } else {
                staged
            };
            Triple {
                source: PromptRef::new(&s.concept, source_language, Variant::Original),
                original_text,
                original_image,
                corrected: PromptRef::new(&s.concept, &s.language, Variant::Original),
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
        .map(|(s, triple)| {
            let (xc_original, xc_corrected, delta_sem) = stores.measure(triple)?;
            Ok(ConceptResult {
                concept: s.concept.clone(),
                language: s.language.clone(),
                sample_index: Some(s.sample_index),
                original: s.pseudo_original.clone(),
                corrected: s.corrected.clone(),
                xc_original,
                xc_corrected,
                delta_xc: xc_corrected - xc_original,
                delta_sem,
                error_types: ErrorTypes::empty(),
            })
        })
        .collect::<Result<Vec<_>, SimilarityError>>()?;
    Ok(ModelScores {
        model_id: model_id.into(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingKey, EmbeddingVector};
    use alloc::string::ToString;
    use alloc::vec;

    fn lang(s: &str) -> LanguageCode {
        LanguageCode::new(s).unwrap()
    }

    fn cid(s: &str) -> ConceptId {
        ConceptId::new(s).unwrap()
    }

    fn inventory(rows: &[(&str, &str, &str)]) -> ConceptInventory {
        let mut inv =
            ConceptInventory::new("v1", lang("en"), vec![lang("en"), lang("id")]).unwrap();
        for (c, en, id) in rows {
            inv.add_concept(cid(c), vec![en.to_string(), id.to_string()])
                .unwrap();
        }
        inv
    }

    fn wide(n: usize) -> ConceptInventory {
        let mut inv =
            ConceptInventory::new("v1", lang("en"), vec![lang("en"), lang("id")]).unwrap();
        for i in 0..n {
            inv.add_concept(
                cid(&alloc::format!("c{i:03}")),
                vec![alloc::format!("w{i}"), alloc::format!("kata{i}")],
            )
            .unwrap();
        }
        inv
    }

    #[test]
    fn two_concepts_swap() {
        let inv = inventory(&[("eye", "eye", "mata"), ("teacher", "teacher", "guru")]);
        let samples = generate_pseudocorrections(&inv, &lang("id"), 1, 7).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].concept, cid("eye"));
        assert_eq!(samples[0].donor_concept, cid("teacher"));
        assert_eq!(samples[0].pseudo_original, "guru");
        assert_eq!(samples[0].corrected, "mata");
        assert_eq!(samples[1].donor_concept, cid("eye"));
    }

    #[test]
    fn count_and_invariants() {
        let inv = wide(25);
        let samples = generate_pseudocorrections(&inv, &lang("id"), 10, 42).unwrap();
        assert_eq!(samples.len(), 250);
        for chunk in samples.chunks(10) {
            let donors: BTreeSet<_> = chunk.iter().map(|s| &s.donor_concept).collect();
            assert_eq!(donors.len(), 10);
            for (i, s) in chunk.iter().enumerate() {
                assert_eq!(s.sample_index, i as u32);
                assert_ne!(s.donor_concept, s.concept);
                assert_ne!(s.pseudo_original, s.corrected);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let inv = wide(30);
        let a = generate_pseudocorrections(&inv, &lang("id"), 10, 1).unwrap();
        let b = generate_pseudocorrections(&inv, &lang("id"), 10, 1).unwrap();
        let c = generate_pseudocorrections(&inv, &lang("id"), 10, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn homograph_donors_excluded() {
        // teacher and doctor share a surface; neither may donate to the other
        let inv = inventory(&[
            ("doctor", "doctor", "sensei"),
            ("teacher", "teacher", "sensei"),
            ("rock", "rock", "iwa"),
        ]);
        let donors: Vec<_> = eligible_donors(&inv, &cid("teacher"), &lang("id"))
            .into_iter()
            .map(|(c, _)| c.as_str())
            .collect();
        assert_eq!(donors, vec!["rock"]);
        let err = generate_pseudocorrections(&inv, &lang("id"), 2, 0).unwrap_err();
        assert!(matches!(
            err,
            PseudoError::InsufficientDonors { available: 1, .. }
        ));
    }

    #[test]
    fn argument_errors() {
        let inv = wide(3);
        assert_eq!(
            generate_pseudocorrections(&inv, &lang("he"), 1, 0),
            Err(PseudoError::UnknownLanguage(lang("he")))
        );
        assert_eq!(
            generate_pseudocorrections(&inv, &lang("en"), 1, 0),
            Err(PseudoError::SourceLanguage(lang("en")))
        );
        assert_eq!(
            generate_pseudocorrections(&inv, &lang("id"), 0, 0),
            Err(PseudoError::ZeroK)
        );
        assert!(matches!(
            generate_pseudocorrections(&inv, &lang("id"), 3, 0),
            Err(PseudoError::InsufficientDonors {
                k: 3,
                available: 2,
                ..
            })
        ));
    }

    #[test]
    fn stream_is_keyed_by_concept_not_position() {
        let mut a = concept_stream(5, &lang("id"), &cid("eye"));
        let mut b = concept_stream(5, &lang("id"), &cid("eye"));
        let mut c = concept_stream(5, &lang("id"), &cid("eyes"));
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    /// Replays a fixed word sequence.
    struct Replay(Vec<u32>);

    impl RngCore for Replay {
        fn next_u32(&mut self) -> u32 {
            self.0.remove(0)
        }
        fn next_u64(&mut self) -> u64 {
            u64::from(self.next_u32())
        }
        fn fill_bytes(&mut self, _: &mut [u8]) {
            unimplemented!()
        }
    }

    #[test]
    fn lemire_rejects_biased_words() {
        // n = 3: threshold = 2^32 mod 3 = 1, so a low product word of 0 is rejected
        let mut rng = Replay(vec![0, u32::MAX]);
        assert_eq!(bounded_u32(&mut rng, 3), 2);
        assert!(rng.0.is_empty());
        let mut rng = Replay(vec![1 << 31]);
        assert_eq!(bounded_u32(&mut rng, 2), 1);
        let mut rng = Replay(vec![12345]);
        assert_eq!(bounded_u32(&mut rng, 1), 0);
    }

    fn put_text(store: &mut EmbeddingStore, c: &str, l: &str, v: Variant, vec: &[f64]) {
        store
            .put(
                EmbeddingKey::text(cid(c), lang(l), v),
                EmbeddingVector::new(vec.to_vec()).unwrap(),
            )
            .unwrap();
    }

    fn put_images(store: &mut EmbeddingStore, c: &str, l: &str, v: Variant, vec: &[f64]) {
        for i in 0..3 {
            store
                .put(
                    EmbeddingKey::image(cid(c), lang(l), v, i),
                    EmbeddingVector::new(vec.to_vec()).unwrap(),
                )
                .unwrap();
        }
    }

    fn eye_teacher_stores() -> (ConceptInventory, EmbeddingStore, EmbeddingStore) {
        let inv = inventory(&[("eye", "eye", "mata"), ("teacher", "teacher", "guru")]);
        let mut text = EmbeddingStore::new("sbert", None).unwrap();
        put_text(&mut text, "eye", "en", Variant::Original, &[1.0, 0.0]);
        put_text(&mut text, "eye", "id", Variant::Original, &[1.0, 1.0]);
        put_text(&mut text, "teacher", "id", Variant::Original, &[0.0, 1.0]);
        let mut images = EmbeddingStore::new("clip", None).unwrap();
        put_images(&mut images, "eye", "en", Variant::Original, &[1.0, 0.0]);
        put_images(&mut images, "eye", "id", Variant::Original, &[1.0, 0.0]);
        put_images(&mut images, "teacher", "id", Variant::Original, &[0.0, 1.0]);
        (inv, text, images)
    }

    #[test]
    fn evaluates_with_donor_prompts() {
        let (inv, text, images) = eye_teacher_stores();
        let samples = vec![PseudoCorrectionSample {
            concept: cid("eye"),
            language: lang("id"),
            sample_index: 0,
            donor_concept: cid("teacher"),
            pseudo_original: "guru".into(),
            corrected: "mata".into(),
        }];
        let scores = evaluate_pseudocorrections(&inv, &samples, &images, &text, "m").unwrap();
        let r = &scores.results[0];
        // SIM(eye, mata) − SIM(eye, guru) = 1/√2 − 0
        assert!((r.delta_sem - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!((r.xc_original, r.xc_corrected, r.delta_xc), (0.0, 1.0, 1.0));
        assert_eq!(r.sample_index, Some(0));
        assert!(r.error_types.is_empty());
        assert_eq!(r.original, "guru");
    }

    #[test]
    fn staged_pseudo_prompt_preferred() {
        let (inv, mut text, mut images) = eye_teacher_stores();
        put_text(
            &mut text,
            "eye",
            "id",
            Variant::PseudoOriginal(0),
            &[1.0, 0.0],
        );
        put_images(
            &mut images,
            "eye",
            "id",
            Variant::PseudoOriginal(0),
            &[1.0, 0.0],
        );
        let samples = vec![PseudoCorrectionSample {
            concept: cid("eye"),
            language: lang("id"),
            sample_index: 0,
            donor_concept: cid("teacher"),
            pseudo_original: "guru".into(),
            corrected: "mata".into(),
        }];
        let r = &evaluate_pseudocorrections(&inv, &samples, &images, &text, "m")
            .unwrap()
            .results[0];
        assert_eq!(r.xc_original, 1.0);
        assert!((r.delta_sem - (core::f64::consts::FRAC_1_SQRT_2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_report_names_donor_prompt() {
        let (inv, text, _) = eye_teacher_stores();
        let images = EmbeddingStore::new("clip", None).unwrap();
        let samples = generate_pseudocorrections(&inv, &lang("id"), 1, 3).unwrap();
        let err = evaluate_pseudocorrections(&inv, &samples, &images, &text, "m").unwrap_err();
        let SimilarityError::MissingEmbeddings(keys) = err else {
            panic!("{err:?}");
        };
        let labels: Vec<_> = keys.iter().map(|k| k.to_string()).collect();
        assert_eq!(
            labels,
            vec![
                "text:teacher|en|original",
                "image:eye|en|original",
                "image:eye|id|original",
                "image:teacher|en|original",
                "image:teacher|id|original",
            ]
        );
    }

    #[test]
    fn rejects_invalid_samples() {
        let (inv, text, images) = eye_teacher_stores();
        let mut bad = PseudoCorrectionSample {
            concept: cid("eye"),
            language: lang("id"),
            sample_index: 0,
            donor_concept: cid("eye"),
            pseudo_original: "guru".into(),
            corrected: "mata".into(),
        };
        let err =
            evaluate_pseudocorrections(&inv, &[bad.clone()], &images, &text, "m").unwrap_err();
        assert!(matches!(err, SimilarityError::InvalidSample { .. }));
        bad.donor_concept = cid("teacher");
        bad.pseudo_original = "mata".into();
        let err = evaluate_pseudocorrections(&inv, &[bad], &images, &text, "m").unwrap_err();
        assert!(matches!(err, SimilarityError::InvalidSample { .. }));
    }
}
