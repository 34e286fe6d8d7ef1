//! `cccl` subcommands: validate, manifest, embed, score, pseudo, revise, report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use base64::Engine as _;
use clap::{Args, Parser, Subcommand};

use cccl_core::inventory::{
    diff_inventories, generation_manifest, revise_benchmark, validate_inventory, ConceptId,
    ConceptInventory, CorrectionRecord, IntangibleBlocklist, InventoryError, LanguageCode, Variant,
};
use cccl_core::pseudo::{evaluate_pseudocorrections, generate_pseudocorrections};
use cccl_core::similarity::score_concepts;
use cccl_core::{EmbeddingKey, EmbeddingStore, Modality, ModelScores, SimilarityError};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats;
use crate::fs::write_atomic;
use crate::provider::{ProviderClient, DEFAULT_BACKOFF};
use crate::report::{fit_table, write_fitstats, write_report};
use crate::results::{load_results, render_results, ResultsTable};
use crate::store_io::{load_store, load_store_if_exists, save_store};

pub const PROVIDER_ENV: &str = "EMBEDDER_URL";

#[derive(Debug, Parser)]
#[command(
    name = "cccl",
    version,
    about = "Evaluation harness for multilingual text-to-image concept benchmarks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; relative paths inside it resolve against its directory
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; files go to <out>/<run-id>/
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    #[arg(long, global = true)]
    pub inventory: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corrections: Option<PathBuf>,
    #[arg(long, global = true)]
    pub text_store: Option<PathBuf>,
    /// Image store of a model, `ID=PATH`, or `ID` to select one from the config
    #[arg(long = "model", global = true, value_name = "ID[=PATH]")]
    pub models: Vec<String>,
    /// Embedding provider base URL (overrides EMBEDDER_URL and the config)
    #[arg(long, global = true)]
    pub provider: Option<String>,
    #[arg(long, global = true, hide = true)]
    pub retry_backoff_ms: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an inventory (and corrections, if given) and list warnings
    Validate {
        #[arg(long)]
        blocklist: Option<PathBuf>,
    },
    /// Write the image generation manifest: one prompt per translation variant
    Manifest {
        /// Per-language prompt template with one `{}`, `LANG=TEMPLATE`
        #[arg(long = "template", value_name = "LANG=TEMPLATE")]
        templates: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fetch embeddings from the provider into a store
    Embed {
        #[command(subcommand)]
        target: EmbedTarget,
    },
    /// Score corrections and fit ΔX_c against ΔSEM per model and language
    Score {
        #[arg(long = "language")]
        languages: Vec<String>,
        #[arg(long)]
        ci_level: Option<f64>,
    },
    /// Generate and score pseudocorrections
    Pseudo {
        #[arg(long = "language")]
        languages: Vec<String>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        ci_level: Option<f64>,
    },
    /// Apply corrections and removals, writing the next release and a changeset
    Revise {
        #[arg(long = "remove", value_name = "CONCEPT")]
        remove: Vec<String>,
        /// Apply only corrections with ΔSEM ≥ T in the results file
        #[arg(long, value_name = "T", allow_negative_numbers = true)]
        min_delta_sem: Option<f64>,
        /// Apply only corrections with ΔX_c ≥ T for --xc-model
        #[arg(long, value_name = "T", allow_negative_numbers = true)]
        min_delta_xc: Option<f64>,
        #[arg(long)]
        xc_model: Option<String>,
        #[arg(long)]
        results: Option<PathBuf>,
        /// Version of the revised release (default: current version + ".1")
        #[arg(long = "release", alias = "new-version")]
        release: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit statistics, scatter plots and histograms from a results file
    Report {
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        ci_level: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EmbedTarget {
    /// Text surfaces; default listing is every inventory cell plus corrected surfaces
    Text {
        /// `concept|language|variant<TAB>surface` lines
        #[arg(long)]
        listing: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Generated images for one model (select it with --model)
    Image {
        /// `concept|language|variant<TAB>index<TAB>path` lines
        #[arg(long)]
        listing: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Similarity(SimilarityError::MissingEmbeddings(keys)) = &e {
                for key in keys {
                    eprintln!("  missing {key}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn warn(message: impl std::fmt::Display) {
    eprintln!("warning: {message}");
}

struct Context {
    config: RunConfig,
    global: GlobalArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(v) = g.seed {
        config.seed = v;
    }
    if let Some(v) = &g.out {
        config.out = v.clone();
    }
    if let Some(v) = &g.run_id {
        config.run_id = v.clone();
    }
    if let Some(v) = &g.inventory {
        config.inventory = Some(v.clone());
    }
    if let Some(v) = &g.corrections {
        config.corrections = Some(v.clone());
    }
    if let Some(v) = &g.text_store {
        config.text_store = Some(v.clone());
    }
    if let Ok(url) = std::env::var(PROVIDER_ENV) {
        if !url.is_empty() {
            config.provider = Some(url);
        }
    }
    if let Some(v) = &g.provider {
        config.provider = Some(v.clone());
    }
    config.check()?;
    let ctx = Context {
        config,
        global: cli.global,
    };
    match cli.command {
        Command::Validate { blocklist } => ctx.validate(blocklist),
        Command::Manifest { templates, output } => ctx.manifest(&templates, output),
        Command::Embed { target } => match target {
            EmbedTarget::Text { listing, force } => ctx.embed_text(listing, force),
            EmbedTarget::Image { listing, force } => ctx.embed_image(&listing, force),
        },
        Command::Score {
            languages,
            ci_level,
        } => ctx.score(&languages, ci_level),
        Command::Pseudo {
            languages,
            k,
            ci_level,
        } => ctx.pseudo(&languages, k, ci_level),
        Command::Revise {
            remove,
            min_delta_sem,
            min_delta_xc,
            xc_model,
            results,
            release,
            output,
        } => ctx.revise(RevisePlan {
            remove,
            min_delta_sem,
            min_delta_xc,
            xc_model,
            results,
            release,
            output,
        }),
        Command::Report { results, ci_level } => ctx.report(results, ci_level),
    }
}

struct RevisePlan {
    remove: Vec<String>,
    min_delta_sem: Option<f64>,
    min_delta_xc: Option<f64>,
    xc_model: Option<String>,
    results: Option<PathBuf>,
    release: Option<String>,
    output: Option<PathBuf>,
}

fn parse_languages(codes: &[String]) -> Result<Option<Vec<LanguageCode>>> {
    if codes.is_empty() {
        return Ok(None);
    }
    codes
        .iter()
        .map(|c| LanguageCode::new(c.as_str()).map_err(Error::from))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn ci(level: Option<f64>, config: &RunConfig) -> Result<f64> {
    let level = level.unwrap_or(config.ci_level);
    if level > 0.0 && level < 1.0 {
        Ok(level)
    } else {
        Err(Error::Usage(format!("ci level {level} is outside (0, 1)")))
    }
}

impl Context {
    fn required<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("no {what} given (flag --{what} or config key)")))
    }

    fn inventory(&self) -> Result<ConceptInventory> {
        formats::load_inventory(self.required(&self.config.inventory, "inventory")?)
    }

    fn corrections(&self) -> Result<Vec<CorrectionRecord>> {
        formats::load_corrections(self.required(&self.config.corrections, "corrections")?)
    }

    /// Corrections if configured, checked against the inventory.
    fn staged(&self, inv: &ConceptInventory) -> Result<(ConceptInventory, Vec<CorrectionRecord>)> {
        let records = match &self.config.corrections {
            Some(path) => formats::load_corrections(path)?,
            None => Vec::new(),
        };
        check_not_source(inv, &records)?;
        Ok((inv.with_corrections(&records)?, records))
    }

    fn text_store(&self) -> Result<EmbeddingStore> {
        load_store(self.required(&self.config.text_store, "text-store")?)
    }

    /// `(model id, image store path)` for the models selected by `--model`,
    /// or every configured model.
    fn models(&self) -> Result<Vec<(String, PathBuf)>> {
        let mut selected = Vec::new();
        for spec in &self.global.models {
            let (id, path) = match spec.split_once('=') {
                Some((id, path)) => (id.to_owned(), PathBuf::from(path)),
                None => {
                    let path = self.config.models.get(spec).ok_or_else(|| {
                        Error::Usage(format!("model `{spec}` has no image store in the config"))
                    })?;
                    (spec.clone(), path.clone())
                }
            };
            if id.is_empty() || id.contains(['/', '\\', '\t', '|']) {
                return Err(Error::Usage(format!("invalid model id {id:?}")));
            }
            if selected.iter().any(|(s, _)| *s == id) {
                return Err(Error::Usage(format!("model `{id}` given twice")));
            }
            selected.push((id, path));
        }
        if selected.is_empty() {
            selected = self
                .config
                .models
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
        }
        if selected.is_empty() {
            return Err(Error::Usage(
                "no models: pass --model ID=PATH or add a [models] table to the config".into(),
            ));
        }
        Ok(selected)
    }

    fn client(&self) -> Result<ProviderClient> {
        let url = self.config.provider.clone().ok_or_else(|| {
            Error::Usage(format!(
                "no provider endpoint: set {PROVIDER_ENV}, --provider or `provider` in the config"
            ))
        })?;
        let backoff = self
            .global
            .retry_backoff_ms
            .map(Duration::from_millis)
            .unwrap_or(DEFAULT_BACKOFF);
        Ok(ProviderClient::new(url).with_backoff(backoff))
    }

    fn validate(&self, blocklist: Option<PathBuf>) -> Result<()> {
        let inv = self.inventory()?;
        let blocklist = match blocklist.or_else(|| self.config.blocklist.clone()) {
            Some(path) => formats::load_blocklist(&path)?,
            None => IntangibleBlocklist::default(),
        };
        let issues = validate_inventory(&inv, &blocklist);
        for issue in &issues {
            println!("warning: {issue}");
        }
        let (_, records) = self.staged(&inv)?;
        println!(
            "{}: {} concepts, {} languages, {} corrections, {} warning(s)",
            inv.version(),
            inv.len(),
            inv.languages().len(),
            records.len(),
            issues.len()
        );
        Ok(())
    }

    fn manifest(&self, flags: &[String], output: Option<PathBuf>) -> Result<()> {
        let inv = self.inventory()?;
        let (staged, _) = self.staged(&inv)?;
        let mut templates = self.config.templates.clone();
        for spec in flags {
            let (lang, template) = spec
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("template {spec:?} is not LANG=TEMPLATE")))?;
            templates.insert(LanguageCode::new(lang)?, template.to_owned());
        }
        let lines = generation_manifest(&staged, &templates)?;
        let path = output.unwrap_or_else(|| self.config.run_dir().join("manifest.tsv"));
        write_atomic(&path, formats::render_manifest(&lines).as_bytes())?;
        println!("wrote {} prompts to {}", lines.len(), path.display());
        Ok(())
    }

    /// Puts missing `items` into the store at `path` and saves it, also when
    /// the provider fails part way.
    fn embed_items(
        &self,
        path: &Path,
        modality: Modality,
        items: Vec<(EmbeddingKey, String)>,
        force: bool,
        model: Option<&str>,
    ) -> Result<()> {
        let client = self.client()?.with_model(model.map(str::to_owned));
        let mut store = match load_store_if_exists(path)? {
            Some(store) => store,
            None => {
                let health = client.health()?;
                EmbeddingStore::new(health.model_id, Some(health.dim))?
            }
        };
        let total = items.len();
        let mut seen = BTreeSet::new();
        let todo: Vec<(EmbeddingKey, String)> = items
            .into_iter()
            .filter(|(key, _)| seen.insert(key.clone()))
            .filter(|(key, _)| force || !store.contains(key))
            .collect();
        let skipped = seen.len() - todo.len();
        if todo.is_empty() {
            println!("0 new {modality} vectors ({skipped} already present of {total} listed)");
            return Ok(());
        }
        let result = client.embed_into(&mut store, modality, &todo);
        save_store(&store, path)?;
        let done = result?;
        println!(
            "{done} new {modality} vectors ({skipped} already present) in {}",
            path.display()
        );
        Ok(())
    }

    fn embed_text(&self, listing: Option<PathBuf>, force: bool) -> Result<()> {
        let path = self
            .required(&self.config.text_store, "text-store")?
            .to_owned();
        let items: Vec<(EmbeddingKey, String)> = match listing {
            Some(listing) => {
                let text = crate::fs::read_text(&listing)?;
                formats::parse_text_listing(&text)
                    .map_err(|e| Error::format(&listing, e))?
                    .into_iter()
                    .map(|e| {
                        (
                            EmbeddingKey::text(e.concept, e.language, e.variant),
                            e.surface,
                        )
                    })
                    .collect()
            }
            None => {
                let (staged, _) = self.staged(&self.inventory()?)?;
                staged
                    .translations()
                    .map(|t| {
                        (
                            EmbeddingKey::text(t.concept, t.language, t.variant),
                            t.surface,
                        )
                    })
                    .collect()
            }
        };
        self.embed_items(&path, Modality::Text, items, force, None)
    }

    fn embed_image(&self, listing: &Path, force: bool) -> Result<()> {
        let models = self.models()?;
        let [(model, path)] = models.as_slice() else {
            return Err(Error::Usage("embed image needs exactly one --model".into()));
        };
        let text = crate::fs::read_text(listing)?;
        let base = listing.parent().unwrap_or(Path::new("."));
        let entries =
            formats::parse_image_listing(&text, base).map_err(|e| Error::format(listing, e))?;
        let mut items = Vec::with_capacity(entries.len());
        for e in entries {
            let bytes = std::fs::read(&e.path).map_err(|err| Error::io(&e.path, err))?;
            let payload = base64::engine::general_purpose::STANDARD.encode(bytes);
            items.push((
                EmbeddingKey::image(e.concept, e.language, e.variant, e.index),
                payload,
            ));
        }
        let _ = model;
        self.embed_items(path, Modality::Image, items, force, None)
    }

    /// Runs `score` for every model, reporting the union of missing keys.
    fn score_models<F>(&self, models: &[(String, PathBuf)], score: F) -> Result<Vec<ModelScores>>
    where
        F: Fn(&str, &EmbeddingStore) -> std::result::Result<ModelScores, SimilarityError>,
    {
        let mut all = Vec::new();
        let mut missing = BTreeSet::new();
        for (model, path) in models {
            let images = load_store(path)?;
            match score(model, &images) {
                Ok(s) => all.push(s),
                Err(SimilarityError::MissingEmbeddings(keys)) => {
                    for key in keys {
                        missing.insert(key);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        if !missing.is_empty() {
            return Err(SimilarityError::MissingEmbeddings(missing.into_iter().collect()).into());
        }
        Ok(all)
    }

    fn warn_population_sizes(
        &self,
        images: &EmbeddingStore,
        model: &str,
        prompts: &BTreeSet<(ConceptId, LanguageCode, Variant)>,
    ) {
        let n = self.config.n as usize;
        for (c, l, v) in prompts {
            let size = images.population(c, l, *v).len();
            if size != 0 && size != n {
                warn(format!(
                    "{model}: {c}|{l}|{v} has {size} images, expected {n}"
                ));
            }
        }
    }

    fn score(&self, languages: &[String], ci_level: Option<f64>) -> Result<()> {
        let ci_level = ci(ci_level, &self.config)?;
        let inv = self.inventory()?;
        let mut records = self.corrections()?;
        check_not_source(&inv, &records)?;
        inv.with_corrections(&records)?;
        if let Some(langs) = parse_languages(languages)?.or_else(|| self.config.languages.clone()) {
            records.retain(|r| langs.contains(&r.language));
        }
        let text = self.text_store()?;
        let models = self.models()?;
        let scores = self.score_models(&models, |model, images| {
            let prompts: BTreeSet<_> = records
                .iter()
                .flat_map(|r| {
                    [
                        (
                            r.concept.clone(),
                            inv.source_language().clone(),
                            Variant::Original,
                        ),
                        (r.concept.clone(), r.language.clone(), Variant::Original),
                        (r.concept.clone(), r.language.clone(), Variant::Corrected),
                    ]
                })
                .collect();
            self.warn_population_sizes(images, model, &prompts);
            score_concepts(&inv, &records, images, &text, model)
        })?;
        let dir = self.config.run_dir();
        self.write_scores(&dir, &scores, ci_level)
    }

    fn write_scores(&self, dir: &Path, scores: &[ModelScores], ci_level: f64) -> Result<()> {
        let table = ResultsTable::from_scores(scores)?;
        let results = dir.join("results.tsv");
        write_atomic(&results, render_results(&table).as_bytes())?;
        println!(
            "wrote {} result rows to {}",
            table.rows.len(),
            results.display()
        );
        let (fits, warnings) = fit_table(&table, ci_level)?;
        for w in warnings {
            warn(w);
        }
        let mut files = Vec::new();
        write_fitstats(dir, &fits, &mut files)?;
        for f in files {
            println!("wrote {}", f.display());
        }
        Ok(())
    }

    fn pseudo(&self, languages: &[String], k: Option<u32>, ci_level: Option<f64>) -> Result<()> {
        let ci_level = ci(ci_level, &self.config)?;
        let k = k.unwrap_or(self.config.k);
        let inv = self.inventory()?;
        let languages =
            match parse_languages(languages)?.or_else(|| self.config.pseudo_languages.clone()) {
                Some(langs) => langs,
                None => inv
                    .languages()
                    .iter()
                    .filter(|l| *l != inv.source_language())
                    .cloned()
                    .collect(),
            };
        let dir = self.config.run_dir().join("pseudo");
        let mut samples = Vec::new();
        for language in &languages {
            let batch = generate_pseudocorrections(&inv, language, k, self.config.seed)?;
            let path = dir.join(format!("samples_{language}.tsv"));
            write_atomic(&path, formats::render_samples(&batch).as_bytes())?;
            println!("wrote {} samples to {}", batch.len(), path.display());
            samples.extend(batch);
        }
        let text = self.text_store()?;
        let models = self.models()?;
        let scores = self.score_models(&models, |model, images| {
            evaluate_pseudocorrections(&inv, &samples, images, &text, model)
        })?;
        self.write_scores(&dir, &scores, ci_level)
    }

    fn revise(&self, plan: RevisePlan) -> Result<()> {
        let inv = self.inventory()?;
        let records = self.corrections()?;
        check_not_source(&inv, &records)?;
        let removals: BTreeSet<ConceptId> = if plan.remove.is_empty() {
            self.config.removals.iter().cloned().collect()
        } else {
            plan.remove
                .iter()
                .map(|c| ConceptId::new(c.as_str()))
                .collect::<std::result::Result<_, _>>()?
        };

        let filtered = plan.min_delta_sem.is_some() || plan.min_delta_xc.is_some();
        let applied: Vec<CorrectionRecord> = if filtered {
            let path = plan
                .results
                .clone()
                .unwrap_or_else(|| self.config.run_dir().join("results.tsv"));
            if !path.exists() {
                return Err(Error::Usage(format!(
                    "threshold filters need a results file; {} does not exist",
                    path.display()
                )));
            }
            let table = load_results(&path)?;
            let xc_column = match plan.min_delta_xc {
                None => None,
                Some(_) => Some(match (&plan.xc_model, table.models.as_slice()) {
                    (Some(m), _) => table.model_index(m).ok_or_else(|| {
                        Error::Usage(format!("results have no column for model `{m}`"))
                    })?,
                    (None, [_]) => 0,
                    (None, _) => {
                        return Err(Error::Usage("--min-delta-xc needs --xc-model".into()));
                    }
                }),
            };
            let rows: BTreeMap<(&ConceptId, &LanguageCode), &crate::results::ResultRow> = table
                .rows
                .iter()
                .filter(|r| r.sample.is_none())
                .map(|r| ((&r.concept, &r.language), r))
                .collect();
            records
                .iter()
                .filter(|rec| {
                    let Some(row) = rows.get(&(&rec.concept, &rec.language)) else {
                        return false;
                    };
                    plan.min_delta_sem.is_none_or(|t| row.delta_sem >= t)
                        && match (plan.min_delta_xc, xc_column) {
                            (Some(t), Some(col)) => row.delta_xc[col] >= t,
                            _ => true,
                        }
                })
                .cloned()
                .collect()
        } else {
            records.clone()
        };

        let revised = revise_benchmark(&inv, &applied, &removals, plan.release.as_deref())
            .map_err(|e| match e {
                InventoryError::OriginalMismatch { .. } => Error::RevisionConflict(e),
                other => Error::Inventory(other),
            })?;
        let changes = diff_inventories(&inv, &revised)?;
        let dir = self.config.run_dir();
        let path = plan
            .output
            .unwrap_or_else(|| dir.join(format!("cccl_{}.tsv", revised.version())));
        write_atomic(&path, formats::render_inventory(&revised).as_bytes())?;
        let changeset = path.with_file_name("changeset.tsv");
        write_atomic(&changeset, formats::render_changeset(&changes).as_bytes())?;
        for rec in &applied {
            println!(
                "applied {}\t{}\t{} -> {}",
                rec.concept, rec.language, rec.original, rec.corrected
            );
        }
        println!(
            "{}: applied {} of {} corrections, removed {} concept(s), {} concepts; wrote {} and {}",
            revised.version(),
            applied.len(),
            records.len(),
            removals.len(),
            revised.len(),
            path.display(),
            changeset.display()
        );
        Ok(())
    }

    fn report(&self, results: Option<PathBuf>, ci_level: Option<f64>) -> Result<()> {
        let ci_level = ci(ci_level, &self.config)?;
        let path = results.unwrap_or_else(|| self.config.run_dir().join("results.tsv"));
        let table = load_results(&path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let report = write_report(&dir, &table, ci_level)?;
        for w in &report.warnings {
            warn(w);
        }
        for f in &report.files {
            println!("wrote {}", f.display());
        }
        Ok(())
    }
}

fn check_not_source(inv: &ConceptInventory, records: &[CorrectionRecord]) -> Result<()> {
    match records
        .iter()
        .find(|r| &r.language == inv.source_language())
    {
        Some(r) => Err(Error::Usage(format!(
            "correction for `{}` targets the source language {}",
            r.concept, r.language
        ))),
        None => Ok(()),
    }
}
