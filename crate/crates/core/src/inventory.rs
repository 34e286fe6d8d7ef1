//! The multilingual concept benchmark: a concept × language matrix of
//! translations plus the correction records that revise it.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InventoryError {
    #[error(
        "invalid concept id {0:?}: must be non-empty lowercase text without tabs, newlines or '|'"
    )]
    InvalidConceptId(String),
    #[error("invalid language code {0:?}: must be non-empty without whitespace or '|'")]
    InvalidLanguageCode(String),
    #[error("duplicate concept id `{0}`")]
    DuplicateConcept(ConceptId),
    #[error("duplicate language `{0}`")]
    DuplicateLanguage(LanguageCode),
    #[error("source language `{0}` is not one of the inventory languages")]
    SourceNotInLanguages(LanguageCode),
    #[error("concept `{concept}` has {found} cells, expected {expected}")]
    RowWidth {
        concept: ConceptId,
        expected: usize,
        found: usize,
    },
    #[error("missing cell for concept `{concept}` in language `{language}`")]
    MissingCell {
        concept: ConceptId,
        language: LanguageCode,
    },
    #[error("surface {0:?} contains a tab or line break")]
    InvalidSurface(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("unknown language `{0}`")]
    UnknownLanguage(LanguageCode),
    #[error("unknown error type tag {0:?}")]
    UnknownErrorType(String),
    #[error("correction for `{concept}`/{language} has no error types")]
    EmptyErrorTypes {
        concept: ConceptId,
        language: LanguageCode,
    },
    #[error("correction for `{concept}`/{language} does not change the surface")]
    UnchangedCorrection {
        concept: ConceptId,
        language: LanguageCode,
    },
    #[error(
        "correction for `{concept}`/{language} expects original {expected:?} but the inventory has {found:?}"
    )]
    OriginalMismatch {
        concept: ConceptId,
        language: LanguageCode,
        expected: String,
        found: String,
    },
    #[error("source languages differ: `{left}` vs `{right}`")]
    SourceLanguageMismatch {
        left: LanguageCode,
        right: LanguageCode,
    },
    #[error("no prompt template for language `{0}`")]
    MissingTemplate(LanguageCode),
    #[error("template for `{language}` has {count} `{{}}` placeholders, expected exactly one")]
    TemplatePlaceholder {
        language: LanguageCode,
        count: usize,
    },
    #[error("invalid variant tag {0:?}")]
    InvalidVariant(String),
}

/// Canonical concept identifier: the source-language (English) lemma.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Result<Self, InventoryError> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.trim() == id
            && !id.contains(['\t', '\n', '\r', '|'])
            && !id.chars().any(char::is_uppercase);
        if valid {
            Ok(Self(id))
        } else {
            Err(InventoryError::InvalidConceptId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ConceptId {
    type Err = InventoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Short language tag such as `en`, `ja` or `zh`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl Into<String>) -> Result<Self, InventoryError> {
        let code = code.into();
        if code.is_empty() || code.chars().any(|c| c.is_whitespace() || c == '|') {
            Err(InventoryError::InvalidLanguageCode(code))
        } else {
            Ok(Self(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageCode {
    type Err = InventoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Which translation of a cell a surface (or an embedding) belongs to.
///
/// Serialized as `original`, `corrected` or `pseudo:K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Original,
    Corrected,
    PseudoOriginal(u32),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => f.write_str("original"),
            Variant::Corrected => f.write_str("corrected"),
            Variant::PseudoOriginal(k) => write!(f, "pseudo:{k}"),
        }
    }
}

impl FromStr for Variant {
    type Err = InventoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "corrected" => Ok(Variant::Corrected),
            _ => s
                .strip_prefix("pseudo:")
                .filter(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|k| k.parse().ok())
                .map(Variant::PseudoOriginal)
                .ok_or_else(|| InventoryError::InvalidVariant(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub surface: String,
    pub variant: Variant,
}

/// Six-way translation error typology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorType {
    /// Formality
    F,
    /// Commonality
    C,
    /// Ambiguity
    A,
    /// Transliteration
    T,
    /// Incoming sense error
    IS,
    /// Outgoing sense error
    OS,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::F,
        ErrorType::C,
        ErrorType::A,
        ErrorType::T,
        ErrorType::IS,
        ErrorType::OS,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ErrorType::F => "F",
            ErrorType::C => "C",
            ErrorType::A => "A",
            ErrorType::T => "T",
            ErrorType::IS => "IS",
            ErrorType::OS => "OS",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ErrorType {
    type Err = InventoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| InventoryError::UnknownErrorType(s.to_owned()))
    }
}

/// A set of [`ErrorType`]s, iterated and printed in canonical `F,C,A,T,IS,OS` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErrorTypes(u8);

impl ErrorTypes {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, t: ErrorType) {
        self.0 |= t.bit();
    }

    pub fn contains(&self, t: ErrorType) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = ErrorType> + '_ {
        ErrorType::ALL.into_iter().filter(|t| self.contains(*t))
    }
}

impl FromIterator<ErrorType> for ErrorTypes {
    fn from_iter<I: IntoIterator<Item = ErrorType>>(iter: I) -> Self {
        let mut set = Self::empty();
        for t in iter {
            set.insert(t);
        }
        set
    }
}

impl fmt::Display for ErrorTypes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(t.tag())?;
        }
        Ok(())
    }
}

/// Parses a comma separated tag list (`"IS,T"`, `"C, T"`). The empty string
/// parses to the empty set.
impl FromStr for ErrorTypes {
    type Err = InventoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(Self::empty());
        }
        s.split(',')
            .map(|tag| tag.trim().parse::<ErrorType>())
            .collect()
    }
}

/// One human-verified translation correction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionRecord {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub original: String,
    pub corrected: String,
    pub error_types: ErrorTypes,
    pub note: Option<String>,
}

impl CorrectionRecord {
    pub fn new(
        concept: ConceptId,
        language: LanguageCode,
        original: impl Into<String>,
        corrected: impl Into<String>,
        error_types: ErrorTypes,
        note: Option<String>,
    ) -> Result<Self, InventoryError> {
        let original = checked_surface(original.into())?;
        let corrected = checked_surface(corrected.into())?;
        if error_types.is_empty() {
            return Err(InventoryError::EmptyErrorTypes { concept, language });
        }
        if original == corrected {
            return Err(InventoryError::UnchangedCorrection { concept, language });
        }
        Ok(Self {
            concept,
            language,
            original,
            corrected,
            error_types,
            note,
        })
    }
}

fn checked_surface(surface: String) -> Result<String, InventoryError> {
    if surface.contains(['\t', '\n', '\r']) {
        Err(InventoryError::InvalidSurface(surface))
    } else {
        Ok(surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Cell {
    original: String,
    corrected: Option<String>,
    pseudo: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ConceptEntry {
    id: ConceptId,
    cells: Vec<Cell>,
}

/// A benchmark release: concepts × languages with one original surface per
/// cell, optional staged corrected / pseudo-original variants, and the
/// concepts removed from it.
///
/// Operations never mutate an inventory in place; they return a new value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptInventory {
    version: String,
    source_language: LanguageCode,
    languages: Vec<LanguageCode>,
    entries: Vec<ConceptEntry>,
    index: BTreeMap<ConceptId, usize>,
    removed: BTreeMap<ConceptId, String>,
}

pub const DEFAULT_VERSION: &str = "v1";
pub const REMOVAL_REASON_INTANGIBLE: &str = "intangible";

impl ConceptInventory {
    pub fn new(
        version: impl Into<String>,
        source_language: LanguageCode,
        languages: Vec<LanguageCode>,
    ) -> Result<Self, InventoryError> {
        let mut seen = BTreeSet::new();
        for lang in &languages {
            if !seen.insert(lang) {
                return Err(InventoryError::DuplicateLanguage(lang.clone()));
            }
        }
        if !languages.contains(&source_language) {
            return Err(InventoryError::SourceNotInLanguages(source_language));
        }
        Ok(Self {
            version: version.into(),
            source_language,
            languages,
            entries: Vec::new(),
            index: BTreeMap::new(),
            removed: BTreeMap::new(),
        })
    }

    /// Appends a concept row; `surfaces` follow [`languages`](Self::languages) order.
    pub fn add_concept(
        &mut self,
        id: ConceptId,
        surfaces: Vec<String>,
    ) -> Result<(), InventoryError> {
        if self.index.contains_key(&id) || self.removed.contains_key(&id) {
            return Err(InventoryError::DuplicateConcept(id));
        }
        if surfaces.len() != self.languages.len() {
            return Err(InventoryError::RowWidth {
                concept: id,
                expected: self.languages.len(),
                found: surfaces.len(),
            });
        }
        let cells = surfaces
            .into_iter()
            .map(|s| {
                checked_surface(s).map(|original| Cell {
                    original,
                    ..Cell::default()
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push(ConceptEntry { id, cells });
        Ok(())
    }

    /// Records a concept as removed from the release.
    pub fn mark_removed(
        &mut self,
        id: ConceptId,
        reason: impl Into<String>,
    ) -> Result<(), InventoryError> {
        if self.index.contains_key(&id) || self.removed.contains_key(&id) {
            return Err(InventoryError::DuplicateConcept(id));
        }
        self.removed.insert(id, reason.into());
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn source_language(&self) -> &LanguageCode {
        &self.source_language
    }

    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    /// Active concepts in inventory order.
    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> + '_ {
        self.entries.iter().map(|e| &e.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn removed(&self) -> &BTreeMap<ConceptId, String> {
        &self.removed
    }

    pub fn contains_concept(&self, id: &ConceptId) -> bool {
        self.index.contains_key(id)
    }

    pub fn language_index(&self, language: &LanguageCode) -> Option<usize> {
        self.languages.iter().position(|l| l == language)
    }

    /// The original-variant surface of a cell.
    pub fn surface(&self, concept: &ConceptId, language: &LanguageCode) -> Option<&str> {
        self.cell(concept, language).map(|c| c.original.as_str())
    }

    /// The surface of any variant of a cell.
    pub fn variant_surface(
        &self,
        concept: &ConceptId,
        language: &LanguageCode,
        variant: Variant,
    ) -> Option<&str> {
        let cell = self.cell(concept, language)?;
        match variant {
            Variant::Original => Some(cell.original.as_str()),
            Variant::Corrected => cell.corrected.as_deref(),
            Variant::PseudoOriginal(k) => cell.pseudo.get(k as usize).map(String::as_str),
        }
    }

    fn cell(&self, concept: &ConceptId, language: &LanguageCode) -> Option<&Cell> {
        let row = *self.index.get(concept)?;
        let col = self.language_index(language)?;
        Some(&self.entries[row].cells[col])
    }

    fn cell_mut(
        &mut self,
        concept: &ConceptId,
        language: &LanguageCode,
    ) -> Result<&mut Cell, InventoryError> {
        let row = *self
            .index
            .get(concept)
            .ok_or_else(|| InventoryError::UnknownConcept(concept.clone()))?;
        let col = self
            .language_index(language)
            .ok_or_else(|| InventoryError::UnknownLanguage(language.clone()))?;
        Ok(&mut self.entries[row].cells[col])
    }

    /// Every translation, ordered by concept (inventory order), language
    /// (header order), then variant.
    pub fn translations(&self) -> impl Iterator<Item = Translation> + '_ {
        self.entries.iter().flat_map(move |entry| {
            entry
                .cells
                .iter()
                .zip(&self.languages)
                .flat_map(move |(cell, language)| {
                    let make = move |surface: &str, variant| Translation {
                        concept: entry.id.clone(),
                        language: language.clone(),
                        surface: surface.to_owned(),
                        variant,
                    };
                    core::iter::once(make(&cell.original, Variant::Original))
                        .chain(
                            cell.corrected
                                .as_deref()
                                .map(|s| make(s, Variant::Corrected)),
                        )
                        .chain(
                            cell.pseudo
                                .iter()
                                .enumerate()
                                .map(move |(k, s)| make(s, Variant::PseudoOriginal(k as u32))),
                        )
                })
        })
    }

    /// Checks that every correction points at an existing concept and a
    /// non-source language of this inventory.
    pub fn check_corrections(
        &self,
        corrections: &[CorrectionRecord],
    ) -> Result<(), InventoryError> {
        for record in corrections {
            if !self.contains_concept(&record.concept) {
                return Err(InventoryError::UnknownConcept(record.concept.clone()));
            }
            if self.language_index(&record.language).is_none() {
                return Err(InventoryError::UnknownLanguage(record.language.clone()));
            }
        }
        Ok(())
    }

    /// Stages each correction as the `corrected` variant of its cell, leaving
    /// originals untouched. Used to build generation manifests and scoring
    /// inputs before a release is revised.
    pub fn with_corrections(
        &self,
        corrections: &[CorrectionRecord],
    ) -> Result<ConceptInventory, InventoryError> {
        let mut out = self.clone();
        for record in corrections {
            let cell = out.cell_mut(&record.concept, &record.language)?;
            if cell.original != record.original {
                return Err(mismatch(record, &cell.original));
            }
            cell.corrected = Some(record.corrected.clone());
        }
        Ok(out)
    }

    /// Stages pseudo-original surfaces for a cell as variants `pseudo:0..k`.
    pub fn with_pseudo_originals(
        &self,
        concept: &ConceptId,
        language: &LanguageCode,
        surfaces: Vec<String>,
    ) -> Result<ConceptInventory, InventoryError> {
        let mut out = self.clone();
        let surfaces = surfaces
            .into_iter()
            .map(checked_surface)
            .collect::<Result<Vec<_>, _>>()?;
        out.cell_mut(concept, language)?.pseudo = surfaces;
        Ok(out)
    }
}

fn mismatch(record: &CorrectionRecord, found: &str) -> InventoryError {
    InventoryError::OriginalMismatch {
        concept: record.concept.clone(),
        language: record.language.clone(),
        expected: record.original.clone(),
        found: found.to_owned(),
    }
}

/// Concepts considered intangible. Matching concepts are reported by
/// [`validate_inventory`]; removing them is a separate revision step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntangibleBlocklist(BTreeSet<ConceptId>);

impl IntangibleBlocklist {
    pub fn new(concepts: impl IntoIterator<Item = ConceptId>) -> Self {
        Self(concepts.into_iter().collect())
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.0.contains(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConceptId> + '_ {
        self.0.iter()
    }
}

impl Default for IntangibleBlocklist {
    fn default() -> Self {
        Self::new(
            ["history", "film", "jump"]
                .into_iter()
                .map(|s| ConceptId(s.to_owned())),
        )
    }
}

/// Validation diagnostics. None of these make an inventory unusable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Issue {
    EmptyCell {
        concept: ConceptId,
        language: LanguageCode,
    },
    /// Several concepts share one surface within a language; either a
    /// mistranslation or an incoming duplicate.
    DuplicateSurface {
        language: LanguageCode,
        surface: String,
        concepts: Vec<ConceptId>,
    },
    IntangibleConcept {
        concept: ConceptId,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::EmptyCell { concept, language } => {
                write!(f, "empty cell: {concept} [{language}]")
            }
            Issue::DuplicateSurface {
                language,
                surface,
                concepts,
            } => {
                write!(
                    f,
                    "duplicate surface {surface:?} in [{language}] shared by "
                )?;
                for (i, c) in concepts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Issue::IntangibleConcept { concept } => {
                write!(f, "intangible concept on blocklist: {concept}")
            }
        }
    }
}

/// Reports empty cells, surfaces shared by several concepts within one
/// language, and active concepts on the intangibility blocklist. The result is
/// sorted, so it depends only on the inventory contents and the blocklist.
pub fn validate_inventory(inv: &ConceptInventory, blocklist: &IntangibleBlocklist) -> Vec<Issue> {
    let mut issues = Vec::new();
    for (col, language) in inv.languages.iter().enumerate() {
        let mut by_surface: BTreeMap<&str, Vec<ConceptId>> = BTreeMap::new();
        for entry in &inv.entries {
            let surface = entry.cells[col].original.as_str();
            if surface.trim().is_empty() {
                issues.push(Issue::EmptyCell {
                    concept: entry.id.clone(),
                    language: language.clone(),
                });
            } else {
                by_surface
                    .entry(surface)
                    .or_default()
                    .push(entry.id.clone());
            }
        }
        for (surface, mut concepts) in by_surface {
            if concepts.len() > 1 {
                concepts.sort();
                issues.push(Issue::DuplicateSurface {
                    language: language.clone(),
                    surface: surface.to_owned(),
                    concepts,
                });
            }
        }
    }
    issues.extend(
        inv.entries
            .iter()
            .filter(|e| blocklist.contains(&e.id))
            .map(|e| Issue::IntangibleConcept {
                concept: e.id.clone(),
            }),
    );
    issues.sort();
    issues
}

/// Produces the next release: corrected surfaces replace originals and the
/// `removals` move to the removed set with reason `intangible`. All other
/// cells are copied unchanged and staged variants are dropped.
///
/// The version becomes `version_override` when given, else the input version
/// with `.1` appended.
pub fn revise_benchmark(
    inv: &ConceptInventory,
    corrections: &[CorrectionRecord],
    removals: &BTreeSet<ConceptId>,
    version_override: Option<&str>,
) -> Result<ConceptInventory, InventoryError> {
    for id in removals {
        if !inv.contains_concept(id) {
            return Err(InventoryError::UnknownConcept(id.clone()));
        }
    }
    let mut out = inv.clone();
    for entry in &mut out.entries {
        for cell in &mut entry.cells {
            cell.corrected = None;
            cell.pseudo.clear();
        }
    }
    for record in corrections {
        let cell = out.cell_mut(&record.concept, &record.language)?;
        if cell.original != record.original {
            return Err(mismatch(record, &cell.original));
        }
        cell.original = record.corrected.clone();
    }
    out.entries.retain(|e| !removals.contains(&e.id));
    out.index = out
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.clone(), i))
        .collect();
    for id in removals {
        out.removed
            .insert(id.clone(), REMOVAL_REASON_INTANGIBLE.to_owned());
    }
    out.version = match version_override {
        Some(v) => v.to_owned(),
        None => format!("{}.1", inv.version),
    };
    Ok(out)
}

/// `concept|language|variant`, the stable key shared by manifests, listings
/// and embedding stores.
pub fn prompt_key(concept: &ConceptId, language: &LanguageCode, variant: Variant) -> String {
    format!("{concept}|{language}|{variant}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestLine {
    pub key: String,
    pub prompt: String,
}

pub const PLACEHOLDER: &str = "{}";

/// One prompt per translation (every staged variant included), in
/// [`ConceptInventory::translations`] order. Each template must contain
/// exactly one `{}` placeholder.
pub fn generation_manifest(
    inv: &ConceptInventory,
    template_by_language: &BTreeMap<LanguageCode, String>,
) -> Result<Vec<ManifestLine>, InventoryError> {
    for language in &inv.languages {
        let template = template_by_language
            .get(language)
            .ok_or_else(|| InventoryError::MissingTemplate(language.clone()))?;
        let count = template.matches(PLACEHOLDER).count();
        if count != 1 {
            return Err(InventoryError::TemplatePlaceholder {
                language: language.clone(),
                count,
            });
        }
    }
    Ok(inv
        .translations()
        .map(|t| ManifestLine {
            key: prompt_key(&t.concept, &t.language, t.variant),
            prompt: template_by_language[&t.language].replacen(PLACEHOLDER, &t.surface, 1),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceChange {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Changeset {
    pub added_concepts: Vec<ConceptId>,
    pub removed_concepts: Vec<ConceptId>,
    pub added_languages: Vec<LanguageCode>,
    pub removed_languages: Vec<LanguageCode>,
    pub surface_changes: Vec<SurfaceChange>,
}

impl Changeset {
    pub fn is_empty(&self) -> bool {
        self.added_concepts.is_empty()
            && self.removed_concepts.is_empty()
            && self.added_languages.is_empty()
            && self.removed_languages.is_empty()
            && self.surface_changes.is_empty()
    }
}

/// Compares the active concepts and original surfaces of two releases.
/// Concept lists are sorted; surface changes follow `a`'s concept order and
/// language order.
pub fn diff_inventories(
    a: &ConceptInventory,
    b: &ConceptInventory,
) -> Result<Changeset, InventoryError> {
    if a.source_language != b.source_language {
        return Err(InventoryError::SourceLanguageMismatch {
            left: a.source_language.clone(),
            right: b.source_language.clone(),
        });
    }
    let mut changes = Changeset {
        added_concepts: b
            .index
            .keys()
            .filter(|id| !a.contains_concept(id))
            .cloned()
            .collect(),
        removed_concepts: a
            .index
            .keys()
            .filter(|id| !b.contains_concept(id))
            .cloned()
            .collect(),
        added_languages: b
            .languages
            .iter()
            .filter(|l| a.language_index(l).is_none())
            .cloned()
            .collect(),
        removed_languages: a
            .languages
            .iter()
            .filter(|l| b.language_index(l).is_none())
            .cloned()
            .collect(),
        surface_changes: Vec::new(),
    };
    for entry in &a.entries {
        for (language, cell) in a.languages.iter().zip(&entry.cells) {
            if let Some(after) = b.surface(&entry.id, language) {
                if after != cell.original {
                    changes.surface_changes.push(SurfaceChange {
                        concept: entry.id.clone(),
                        language: language.clone(),
                        before: cell.original.clone(),
                        after: after.to_string(),
                    });
                }
            }
        }
    }
    Ok(changes)
}
