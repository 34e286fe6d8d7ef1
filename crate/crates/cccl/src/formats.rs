//! Tab-separated file formats: inventories, corrections, blocklists,
//! manifests, embedding listings, changesets and pseudocorrection samples.
//!
//! All files are UTF-8 with LF line endings. Fields are separated by a single
//! tab and are never quoted or escaped, so tabs and line breaks cannot appear
//! inside a field.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cccl_core::inventory::{
    Changeset, ConceptId, ConceptInventory, CorrectionRecord, ErrorTypes, IntangibleBlocklist,
    InventoryError, LanguageCode, ManifestLine, Variant, DEFAULT_VERSION,
};
use cccl_core::PseudoCorrectionSample;

use crate::error::{Error, FormatError, Result};
use crate::fs::read_text;

pub const CORRECTIONS_HEADER: &str = "concept\tlanguage\toriginal\tcorrected\terror_types\tnote";
pub const SAMPLES_HEADER: &str =
    "concept\tlanguage\tsample_index\tdonor_concept\tpseudo_original\tcorrected";
pub const MANIFEST_HEADER: &str = "key\tprompt";
pub const CHANGESET_HEADER: &str = "kind\tconcept\tlanguage\tbefore\tafter";

const DEFAULT_SOURCE: &str = "en";

/// Numbered lines; a trailing newline does not produce an extra empty line.
fn numbered_lines(text: &str) -> Result<Vec<(usize, &str)>, FormatError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            if line.contains('\r') {
                Err(FormatError::syntax(
                    i + 1,
                    "carriage return; files must use LF line endings",
                ))
            } else {
                Ok((i + 1, line))
            }
        })
        .collect()
}

fn at<T>(line: usize, r: Result<T, InventoryError>) -> Result<T, FormatError> {
    r.map_err(|e| FormatError::new(line, e))
}

fn with_path<T>(path: &Path, r: Result<T, FormatError>) -> Result<T> {
    r.map_err(|e| Error::format(path, e))
}

/// Parses an inventory TSV.
///
/// Optional `#` preamble lines may precede the header:
/// `# version: v1`, `# source: en` and any number of
/// `# removed: <concept>\t<reason>`. Other `#` lines are comments. The header
/// is `concept` followed by one language code per column.
pub fn parse_inventory(text: &str) -> Result<ConceptInventory, FormatError> {
    let lines = numbered_lines(text)?;
    let mut version: Option<String> = None;
    let mut source: Option<(usize, String)> = None;
    let mut removed: Vec<(usize, String, String)> = Vec::new();
    let mut iter = lines.into_iter();

    let (header_line, header) = loop {
        let Some((no, line)) = iter.next() else {
            return Err(FormatError::syntax(1, "missing header line"));
        };
        let Some(comment) = line.strip_prefix('#') else {
            break (no, line);
        };
        let Some((key, value)) = comment.split_once(':') else {
            continue;
        };
        let value = value.trim_start_matches(' ');
        match key.trim() {
            "version" => version = Some(value.trim().to_owned()),
            "source" => source = Some((no, value.trim().to_owned())),
            "removed" => {
                let (id, reason) = value.split_once('\t').unwrap_or((value, ""));
                removed.push((no, id.trim().to_owned(), reason.to_owned()));
            }
            _ => {}
        }
    };

    let mut fields = header.split('\t');
    if fields.next() != Some("concept") {
        return Err(FormatError::syntax(
            header_line,
            "header must start with `concept`",
        ));
    }
    let languages = fields
        .map(LanguageCode::new)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FormatError::new(header_line, e))?;
    if languages.is_empty() {
        return Err(FormatError::syntax(
            header_line,
            "header lists no languages",
        ));
    }
    let (source_line, source) = match source {
        Some((no, code)) => (no, at(no, LanguageCode::new(code))?),
        None => {
            let default = languages
                .iter()
                .find(|l| l.as_str() == DEFAULT_SOURCE)
                .unwrap_or(&languages[0]);
            (header_line, default.clone())
        }
    };
    let mut inv = at(
        source_line.max(header_line),
        ConceptInventory::new(
            version.unwrap_or_else(|| DEFAULT_VERSION.to_owned()),
            source,
            languages.clone(),
        ),
    )?;

    for (no, line) in iter {
        let mut fields = line.split('\t');
        let id = at(no, ConceptId::new(fields.next().unwrap_or_default()))?;
        let cells: Vec<&str> = fields.collect();
        if cells.len() > languages.len() {
            return Err(FormatError::new(
                no,
                InventoryError::RowWidth {
                    concept: id,
                    expected: languages.len(),
                    found: cells.len(),
                },
            ));
        }
        let mut surfaces = Vec::with_capacity(languages.len());
        for (i, language) in languages.iter().enumerate() {
            match cells.get(i) {
                Some(cell) if !cell.is_empty() => surfaces.push((*cell).to_owned()),
                _ => {
                    return Err(FormatError::new(
                        no,
                        InventoryError::MissingCell {
                            concept: id,
                            language: language.clone(),
                        },
                    ))
                }
            }
        }
        at(no, inv.add_concept(id, surfaces))?;
    }
    for (no, id, reason) in removed {
        let id = at(no, ConceptId::new(id))?;
        at(no, inv.mark_removed(id, reason))?;
    }
    Ok(inv)
}

/// Renders an inventory with its full preamble; [`parse_inventory`] reads it back unchanged.
pub fn render_inventory(inv: &ConceptInventory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# version: {}", inv.version());
    let _ = writeln!(out, "# source: {}", inv.source_language());
    for (id, reason) in inv.removed() {
        let _ = writeln!(out, "# removed: {id}\t{reason}");
    }
    out.push_str("concept");
    for language in inv.languages() {
        let _ = write!(out, "\t{language}");
    }
    out.push('\n');
    for concept in inv.concepts() {
        out.push_str(concept.as_str());
        for language in inv.languages() {
            out.push('\t');
            out.push_str(inv.surface(concept, language).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

pub fn load_inventory(path: &Path) -> Result<ConceptInventory> {
    with_path(path, parse_inventory(&read_text(path)?))
}

/// Parses a corrections TSV. The `note` column is optional.
pub fn parse_corrections(text: &str) -> Result<Vec<CorrectionRecord>, FormatError> {
    let lines = numbered_lines(text)?;
    let Some(((_, header), rows)) = lines.split_first() else {
        return Err(FormatError::syntax(1, "missing header line"));
    };
    let short_header = CORRECTIONS_HEADER
        .rsplit_once('\t')
        .map(|(h, _)| h)
        .unwrap_or_default();
    if *header != CORRECTIONS_HEADER && *header != short_header {
        return Err(FormatError::syntax(
            1,
            format!("expected header {CORRECTIONS_HEADER:?}"),
        ));
    }
    rows.iter()
        .map(|&(no, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if !(5..=6).contains(&fields.len()) {
                return Err(FormatError::syntax(
                    no,
                    format!("expected 5 or 6 fields, found {}", fields.len()),
                ));
            }
            let concept = at(no, ConceptId::new(fields[0]))?;
            let language = at(no, LanguageCode::new(fields[1]))?;
            let error_types: ErrorTypes = at(no, fields[4].parse())?;
            let note = fields
                .get(5)
                .filter(|n| !n.is_empty())
                .map(|n| (*n).to_owned());
            at(
                no,
                CorrectionRecord::new(concept, language, fields[2], fields[3], error_types, note),
            )
        })
        .collect()
}

pub fn render_corrections(records: &[CorrectionRecord]) -> String {
    let mut out = format!("{CORRECTIONS_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.concept,
            r.language,
            r.original,
            r.corrected,
            r.error_types,
            r.note.as_deref().unwrap_or_default()
        );
    }
    out
}

pub fn load_corrections(path: &Path) -> Result<Vec<CorrectionRecord>> {
    with_path(path, parse_corrections(&read_text(path)?))
}

/// One concept id per line; blank lines and `#` comments are skipped.
pub fn parse_blocklist(text: &str) -> Result<IntangibleBlocklist, FormatError> {
    let mut ids = Vec::new();
    for (no, line) in numbered_lines(text)? {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        ids.push(at(no, ConceptId::new(line))?);
    }
    Ok(IntangibleBlocklist::new(ids))
}

pub fn load_blocklist(path: &Path) -> Result<IntangibleBlocklist> {
    with_path(path, parse_blocklist(&read_text(path)?))
}

pub fn render_manifest(lines: &[ManifestLine]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for line in lines {
        let _ = writeln!(out, "{}\t{}", line.key, line.prompt);
    }
    out
}

/// `concept|language|variant`
pub fn parse_prompt_key(key: &str) -> Result<(ConceptId, LanguageCode, Variant), InventoryError> {
    let mut parts = key.split('|');
    let (Some(c), Some(l), Some(v), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(InventoryError::InvalidVariant(key.to_owned()));
    };
    Ok((ConceptId::new(c)?, LanguageCode::new(l)?, v.parse()?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextListingEntry {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub variant: Variant,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageListingEntry {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub variant: Variant,
    pub index: u32,
    pub path: PathBuf,
}

fn listing_rows<'a>(
    text: &'a str,
    header: &str,
    width: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, FormatError> {
    numbered_lines(text)?
        .into_iter()
        .filter(|(no, line)| !(line.starts_with('#') || (*no == 1 && *line == header)))
        .map(|(no, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != width {
                Err(FormatError::syntax(
                    no,
                    format!("expected {width} fields, found {}", fields.len()),
                ))
            } else {
                Ok((no, fields))
            }
        })
        .collect()
}

/// `concept|language|variant<TAB>surface`, optional `key\tsurface` header.
pub fn parse_text_listing(text: &str) -> Result<Vec<TextListingEntry>, FormatError> {
    listing_rows(text, "key\tsurface", 2)?
        .into_iter()
        .map(|(no, f)| {
            let (concept, language, variant) = at(no, parse_prompt_key(f[0]))?;
            if f[1].is_empty() {
                return Err(FormatError::syntax(no, "empty surface"));
            }
            Ok(TextListingEntry {
                concept,
                language,
                variant,
                surface: f[1].to_owned(),
            })
        })
        .collect()
}

/// `concept|language|variant<TAB>index<TAB>path`, optional header. Relative
/// paths are resolved against `base`.
pub fn parse_image_listing(text: &str, base: &Path) -> Result<Vec<ImageListingEntry>, FormatError> {
    listing_rows(text, "key\tindex\tpath", 3)?
        .into_iter()
        .map(|(no, f)| {
            let (concept, language, variant) = at(no, parse_prompt_key(f[0]))?;
            let index = f[1]
                .parse()
                .map_err(|_| FormatError::syntax(no, format!("invalid image index {:?}", f[1])))?;
            if f[2].is_empty() {
                return Err(FormatError::syntax(no, "empty image path"));
            }
            Ok(ImageListingEntry {
                concept,
                language,
                variant,
                index,
                path: base.join(f[2]),
            })
        })
        .collect()
}

pub fn render_changeset(changes: &Changeset) -> String {
    let mut out = format!("{CHANGESET_HEADER}\n");
    for c in &changes.removed_concepts {
        let _ = writeln!(out, "removed_concept\t{c}\t\t\t");
    }
    for c in &changes.added_concepts {
        let _ = writeln!(out, "added_concept\t{c}\t\t\t");
    }
    for l in &changes.removed_languages {
        let _ = writeln!(out, "removed_language\t\t{l}\t\t");
    }
    for l in &changes.added_languages {
        let _ = writeln!(out, "added_language\t\t{l}\t\t");
    }
    for s in &changes.surface_changes {
        let _ = writeln!(
            out,
            "surface\t{}\t{}\t{}\t{}",
            s.concept, s.language, s.before, s.after
        );
    }
    out
}

pub fn render_samples(samples: &[PseudoCorrectionSample]) -> String {
    let mut out = format!("{SAMPLES_HEADER}\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.concept, s.language, s.sample_index, s.donor_concept, s.pseudo_original, s.corrected
        );
    }
    out
}

pub fn parse_samples(text: &str) -> Result<Vec<PseudoCorrectionSample>, FormatError> {
    let lines = numbered_lines(text)?;
    match lines.first() {
        Some((_, h)) if *h == SAMPLES_HEADER => {}
        _ => {
            return Err(FormatError::syntax(
                1,
                format!("expected header {SAMPLES_HEADER:?}"),
            ))
        }
    }
    lines[1..]
        .iter()
        .map(|&(no, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(FormatError::syntax(
                    no,
                    format!("expected 6 fields, found {}", f.len()),
                ));
            }
            Ok(PseudoCorrectionSample {
                concept: at(no, ConceptId::new(f[0]))?,
                language: at(no, LanguageCode::new(f[1]))?,
                sample_index: f[2].parse().map_err(|_| {
                    FormatError::syntax(no, format!("invalid sample index {:?}", f[2]))
                })?,
                donor_concept: at(no, ConceptId::new(f[3]))?,
                pseudo_original: f[4].to_owned(),
                corrected: f[5].to_owned(),
            })
        })
        .collect()
}
