//! Batch commands: `prepare`, `train`, `eval`, `search`, `predict` and
//! `export-embeddings`.
//!
//! Settings come from a flat `key = value` file (`--config`) whose values
//! the command-line flags override. Every output is written atomically.
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a
//! configuration or input error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use crate::embed::{export_embeddings, mz_grid, sinusoidal_embed_with, FloatFormat};
use crate::encoder::{EmbeddingKind, EncoderConfig, SpectrumEncoder};
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};
use crate::kv::KeyValues;
use crate::property::{
    evaluate_properties, predictions_text, train_properties, BaselineConfig, LabelScaler,
    PropertyData, PropertyModel,
};
use crate::search::{
    accuracy_report, build_index, evaluate_search, search_all, search_modified_cosine,
    EmbeddingIndex, QueryOutcome, SearchResult, SetAccuracy,
};
use crate::similarity::{pair_cache_text, train_siamese, SiameseData, TrainConfig};
use crate::spectra::{
    clean_spectra, load_labels, parse_mgf, serialize_mgf, split_dataset, LabelTable, Peak,
    SplitAssignment, SplitCounts, SplitName, Spectrum,
};
use crate::tensor::checkpoint::{self, ConfigDigest};
use crate::tensor::{rng, ParamStore, Precision};

pub const SCHEMA_VERSION: u32 = 1;
const INIT_STREAM: u64 = 0x696e_6974;

#[derive(Debug, Parser)]
#[command(name = "ms2embed", version, about = "Train and evaluate spectrum embedding models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Key-value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Floating-point width the m/z inputs are cast through.
    #[arg(long, global = true, value_parser = ["16", "32", "64"])]
    pub precision: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub embedding: Option<EmbeddingArg>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Clean spectra, check labels and write the split manifest.
    Prepare,
    /// Train a model and write its checkpoint and log.
    Train,
    /// Evaluate a checkpoint on the known and novel splits.
    Eval,
    /// Rank the training library against query spectra.
    Search,
    /// Predict properties for spectra.
    Predict,
    /// Write per-m/z embeddings over a grid.
    ExportEmbeddings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbeddingArg {
    Sin,
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Siamese,
    Properties,
    PropertiesBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Siamese,
    Properties,
    PropertiesBaseline,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Siamese => "siamese",
            TrainMode::Properties => "properties",
            TrainMode::PropertiesBaseline => "properties-baseline",
        })
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "siamese" => Ok(TrainMode::Siamese),
            "properties" => Ok(TrainMode::Properties),
            "properties-baseline" => Ok(TrainMode::PropertiesBaseline),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

const KEYS: &[&str] = &[
    "schema_version",
    "seed",
    "threads",
    "mode",
    "output_dir",
    "data.spectra",
    "data.fingerprints",
    "data.properties",
    "split.novel_structures",
    "split.known_spectra",
    "split.novel_fraction",
    "split.known_fraction",
    "prepare.manifest",
    "prepare.cleaned",
    "prepare.rejections",
    "prepare.label_audit",
    "model.checkpoint",
    "train.log",
    "train.pairs",
    "train.report",
    "eval.report",
    "eval.audit",
    "eval.threshold",
    "eval.tolerance",
    "eval.modified_cosine",
    "search.queries",
    "search.output",
    "search.k",
    "predict.input",
    "predict.output",
    "export.output",
    "export.source",
    "export.start",
    "export.end",
    "export.count",
    "encoder.d",
    "encoder.layers",
    "encoder.heads",
    "encoder.hidden",
    "encoder.dropout",
    "encoder.embedding",
    "encoder.mz_precision",
    "encoder.mz_emulation",
    "encoder.lambda_min",
    "encoder.lambda_max",
    "encoder.token_resolution",
    "encoder.token_max_mz",
    "encoder.max_fragments",
    "encoder.weights",
    "train.epochs",
    "train.batch_size",
    "train.pairs_per_epoch",
    "train.eval_pairs",
    "train.bins",
    "train.learning_rate",
    "train.beta1",
    "train.beta2",
    "train.eps",
    "train.weight_decay",
    "train.clip",
    "train.seed",
    "baseline.bin_width",
    "baseline.max_mz",
    "baseline.hidden",
    "baseline.dropout",
];

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub kv: KeyValues,
    pub seed: u64,
    pub threads: Option<usize>,
    pub mode: TrainMode,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut kv = match &cli.config {
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::Config(format!("config file {} not found", path.display())));
                }
                KeyValues::parse(&read_text(path)?)?
            }
            None => KeyValues::default(),
        };
        for o in &cli.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            kv.set(k.trim(), v.trim());
        }
        if let Some(s) = cli.seed {
            kv.set("seed", s);
        }
        if let Some(t) = cli.threads {
            kv.set("threads", t);
        }
        if let Some(p) = &cli.precision {
            kv.set("encoder.mz_precision", format!("binary{p}"));
        }
        if let Some(e) = cli.embedding {
            kv.set(
                "encoder.embedding",
                match e {
                    EmbeddingArg::Sin => EmbeddingKind::Sinusoidal,
                    EmbeddingArg::Token => EmbeddingKind::Token,
                },
            );
        }
        if let Some(m) = cli.mode {
            kv.set(
                "mode",
                match m {
                    ModeArg::Siamese => TrainMode::Siamese,
                    ModeArg::Properties => TrainMode::Properties,
                    ModeArg::PropertiesBaseline => TrainMode::PropertiesBaseline,
                },
            );
        }
        kv.reject_unknown(KEYS)?;
        let version: u32 = kv.get_or("schema_version", SCHEMA_VERSION)?;
        if version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {version} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
        let seed = kv.get_or("seed", 0u64)?;
        if kv.raw("train.seed").is_none() {
            kv.set("train.seed", seed);
        }
        let threads = kv.get("threads")?;
        if threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        let encoder = EncoderConfig::from_kv(&kv)?;
        let train = TrainConfig::from_kv(&kv)?;
        let baseline = BaselineConfig::from_kv(&kv, encoder.d, encoder.dropout)?;
        Ok(RunConfig {
            command: cli.command,
            seed,
            threads,
            mode: kv.get_or("mode", TrainMode::Siamese)?,
            kv,
            encoder,
            train,
            baseline,
        })
    }

    /// Path under `key`, or `default_name` inside `output_dir`.
    pub fn path(&self, key: &str, default_name: &str) -> PathBuf {
        match self.kv.raw(key) {
            Some(p) => PathBuf::from(p),
            None => Path::new(self.kv.raw("output_dir").unwrap_or("out")).join(default_name),
        }
    }

    fn required(&self, key: &str) -> Result<PathBuf> {
        self.kv
            .raw(key)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("{key} must be set")))
    }

    /// Model-defining settings; their digest is stored in checkpoints.
    pub fn model_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.set("schema_version", SCHEMA_VERSION);
        kv.set("model.mode", self.mode);
        match self.mode {
            TrainMode::PropertiesBaseline => self.baseline.write_kv(&mut kv),
            _ => self.encoder.write_kv(&mut kv),
        }
        kv.to_text()
    }

    pub fn digest(&self) -> ConfigDigest {
        ConfigDigest::of_text(&self.model_text())
    }
}

fn require_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::Config(format!("input file {} not found", p.display())));
        }
    }
    Ok(())
}

/// Maps an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Label(_)
        | Error::Split(_)
        | Error::Domain(_)
        | Error::Cast { .. }
        | Error::Normalization(_)
        | Error::Checkpoint(_)
        | Error::DigestMismatch { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match RunConfig::from_cli(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    if let Some(n) = cfg.threads {
        // A pool already configured by an earlier call in this process stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cfg.command {
        Command::Prepare => cmd_prepare(cfg),
        Command::Train => cmd_train(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Search => cmd_search(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::ExportEmbeddings => cmd_export(cfg),
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Label(m) => Error::Label(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn read_mgf(path: &Path) -> Result<Vec<Spectrum>> {
    parse_mgf(&read_text(path)?).map_err(|e| with_path(path, e))
}

fn read_labels(cfg: &RunConfig) -> Result<LabelTable> {
    let fp = cfg.required("data.fingerprints")?;
    let props = cfg.required("data.properties")?;
    require_inputs(&[&fp, &props])?;
    load_labels(&fp, &props)
}

pub fn cmd_prepare(cfg: &RunConfig) -> Result<()> {
    let spectra_path = cfg.required("data.spectra")?;
    let fp = cfg.required("data.fingerprints")?;
    let props = cfg.required("data.properties")?;
    require_inputs(&[&spectra_path, &fp, &props])?;
    let spectra = read_mgf(&spectra_path)?;
    let labels = load_labels(&fp, &props)?;
    let report = clean_spectra(spectra);
    labels.check_resolves(&report.kept)?;

    let structures: std::collections::BTreeSet<&str> =
        report.kept.iter().map(|s| s.structure_id.as_str()).collect();
    let novel_fraction: f64 = cfg.kv.get_or("split.novel_fraction", 0.1)?;
    let known_fraction: f64 = cfg.kv.get_or("split.known_fraction", 0.1)?;
    let counts = SplitCounts {
        novel_structures: cfg
            .kv
            .get("split.novel_structures")?
            .unwrap_or((structures.len() as f64 * novel_fraction).floor() as usize),
        known_spectra: cfg
            .kv
            .get("split.known_spectra")?
            .unwrap_or((report.kept.len() as f64 * known_fraction).floor() as usize),
    };
    let split = split_dataset(&report.kept, &labels, counts, cfg.seed)?;

    let mut audit = String::from("item\tcount\n");
    audit.push_str(&format!("spectra_read\t{}\n", report.kept.len() + report.rejected.len()));
    audit.push_str(&format!("spectra_rejected\t{}\n", report.rejected.len()));
    audit.push_str(&format!("spectra_kept\t{}\n", report.kept.len()));
    audit.push_str(&format!("structures\t{}\n", structures.len()));
    audit.push_str(&format!(
        "label_records_unused\t{}\n",
        labels.records().filter(|r| !structures.contains(r.structure_id.as_str())).count()
    ));
    audit.push_str(&format!("fingerprint_width\t{}\n", labels.width()));
    for (name, n) in [
        ("train", split.train_spectra().len()),
        ("known", split.known_spectra().len()),
        ("novel", split.novel_spectra().len()),
    ] {
        audit.push_str(&format!("{name}_spectra\t{n}\n"));
    }

    write_atomic(&cfg.path("prepare.cleaned", "cleaned.mgf"), serialize_mgf(&report.kept).as_bytes())?;
    write_atomic(&cfg.path("prepare.rejections", "rejections.tsv"), report.rejection_log().as_bytes())?;
    write_atomic(&cfg.path("prepare.label_audit", "label_audit.tsv"), audit.as_bytes())?;
    write_atomic(&cfg.path("prepare.manifest", "manifest.tsv"), split.manifest().as_bytes())?;
    Ok(())
}

/// Cleaned spectra, labels and the split written by `prepare`.
pub struct Prepared {
    pub spectra: Vec<Spectrum>,
    pub labels: LabelTable,
    pub split: SplitAssignment,
}

impl Prepared {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let cleaned = cfg.path("prepare.cleaned", "cleaned.mgf");
        let manifest = cfg.path("prepare.manifest", "manifest.tsv");
        require_inputs(&[&cleaned, &manifest])?;
        let spectra = read_mgf(&cleaned)?;
        let labels = read_labels(cfg)?;
        let split = SplitAssignment::parse_manifest(&read_text(&manifest)?).map_err(|e| with_path(&manifest, e))?;
        for s in &spectra {
            if split.split_of(&s.id).is_none() {
                return Err(Error::Config(format!(
                    "spectrum {} is missing from {}",
                    s.id,
                    manifest.display()
                )));
            }
        }
        labels.check_resolves(&spectra)?;
        Ok(Prepared {
            spectra,
            labels,
            split,
        })
    }

    pub fn select(&self, which: SplitName) -> Vec<&Spectrum> {
        self.split.select(&self.spectra, which)
    }
}

/// A model laid out from the config, with freshly initialized weights.
pub enum Model {
    Siamese(SpectrumEncoder),
    Property(PropertyModel),
}

pub fn build_model(cfg: &RunConfig) -> Result<(Model, ParamStore)> {
    let mut store = ParamStore::new(cfg.encoder.weight_precision);
    let mut r = rng::stream(cfg.seed, INIT_STREAM);
    let model = match cfg.mode {
        TrainMode::Siamese => Model::Siamese(SpectrumEncoder::new(&cfg.encoder, &mut store, "encoder", &mut r)?),
        TrainMode::Properties => {
            let enc = SpectrumEncoder::new(&cfg.encoder, &mut store, "encoder", &mut r)?;
            Model::Property(PropertyModel::transformer(enc, &mut store, &mut r)?)
        }
        TrainMode::PropertiesBaseline => {
            store = ParamStore::new(Precision::Binary32);
            Model::Property(PropertyModel::baseline(cfg.baseline, &mut store, &mut r)?)
        }
    };
    Ok((model, store))
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.path("model.checkpoint", "model.ckpt")
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".cfg");
    path.with_file_name(name)
}

fn save_checkpoint(cfg: &RunConfig, path: &Path, store: &ParamStore, scaler: Option<&LabelScaler>) -> Result<()> {
    let mut out = store.clone();
    if let Some(s) = scaler {
        s.add_to(&mut out)?;
    }
    checkpoint::write_file(path, &out, &cfg.digest())?;
    write_atomic(&sidecar(path), cfg.model_text().as_bytes())
}

/// Builds the configured model and loads the checkpoint into it, refusing
/// a checkpoint written under a different model config.
pub fn load_model(cfg: &RunConfig) -> Result<(Model, ParamStore, Option<LabelScaler>)> {
    let path = checkpoint_path(cfg);
    require_inputs(&[&path])?;
    let ckpt = checkpoint::read_file(&path)?;
    let digest = cfg.digest();
    if ckpt.digest != digest {
        return Err(Error::DigestMismatch {
            checkpoint: ckpt.digest.to_string(),
            config: digest.to_string(),
        });
    }
    let (model, mut store) = build_model(cfg)?;
    let extra = store.assign_from(&ckpt.params)?;
    let scaler = match &model {
        Model::Property(_) => Some(LabelScaler::from_store(&ckpt.params)?),
        Model::Siamese(_) => None,
    };
    if let Some(name) = extra.iter().find(|n| !n.starts_with("scaler.")) {
        return Err(Error::Checkpoint(format!("unexpected parameter {name}")));
    }
    Ok((model, store, scaler))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let data = Prepared::load(cfg)?;
    let (model, mut store) = build_model(cfg)?;
    let ckpt = checkpoint_path(cfg);
    let train = data.select(SplitName::Train);
    let known = data.select(SplitName::Known);
    let novel = data.select(SplitName::Novel);
    let diverged = |store: &ParamStore, scaler: Option<&LabelScaler>, e: Error| -> Error {
        if matches!(e, Error::Divergence { .. }) {
            let mut snap = ckpt.clone().into_os_string();
            snap.push(".diverged");
            if save_checkpoint(cfg, Path::new(&snap), store, scaler).is_ok() {
                eprintln!("last good weights saved to {}", Path::new(&snap).display());
            }
        }
        e
    };
    match &model {
        Model::Siamese(encoder) => {
            let sd = SiameseData {
                train,
                known,
                novel,
                labels: &data.labels,
            };
            let run = train_siamese(encoder, &mut store, &sd, &cfg.train).map_err(|e| diverged(&store, None, e))?;
            save_checkpoint(cfg, &ckpt, &store, None)?;
            write_atomic(&cfg.path("train.log", "train_log.tsv"), run.log.to_text().as_bytes())?;
            write_atomic(&cfg.path("train.pairs", "pairs.tsv"), pair_cache_text(&run.pairs).as_bytes())?;
        }
        Model::Property(pm) => {
            let pd = PropertyData {
                train,
                known,
                novel,
                labels: &data.labels,
            };
            let scaler = pd.fit_scaler()?;
            let run = train_properties(pm, &mut store, &scaler, &pd, &cfg.train, &cfg.mode.to_string())
                .map_err(|e| diverged(&store, Some(&scaler), e))?;
            save_checkpoint(cfg, &ckpt, &store, Some(&scaler))?;
            write_atomic(&cfg.path("train.log", "train_log.tsv"), run.log_text().as_bytes())?;
            write_atomic(&cfg.path("train.report", "property_report.tsv"), run.report.to_text().as_bytes())?;
        }
    }
    Ok(())
}

fn audit_rows(set: &str, outcomes: &[QueryOutcome], out: &mut String) {
    for o in outcomes {
        out.push_str(&format!(
            "{set}\t{}\t{}\t{:.6}\t{}\t{:.6}\n",
            o.query_id, o.hit_id, o.score, o.exact, o.tanimoto
        ));
    }
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let data = Prepared::load(cfg)?;
    let (model, store, scaler) = load_model(cfg)?;
    let train = data.select(SplitName::Train);
    let known = data.select(SplitName::Known);
    let novel = data.select(SplitName::Novel);
    match &model {
        Model::Siamese(encoder) => {
            let threshold: f64 = cfg.kv.get_or("eval.threshold", crate::search::DEFAULT_THRESHOLD)?;
            let index = build_index(encoder, &store, &train)?;
            let mut rows: Vec<SetAccuracy> = Vec::new();
            let mut audit = String::from("query_set\tquery_id\thit_id\tscore\texact\ttanimoto\n");
            let sets = [("known", &known, true), ("novel", &novel, false)];
            for (name, queries, exact) in sets {
                if queries.is_empty() {
                    continue;
                }
                let results = search_all(encoder, &store, &index, queries, 1)?;
                let ev = evaluate_search(name, queries, &results, &data.labels, threshold, exact)?;
                audit_rows(name, &ev.outcomes, &mut audit);
                rows.push(ev.accuracy);
            }
            if cfg.kv.get_or("eval.modified_cosine", false)? {
                let tol: f64 = cfg.kv.get_or("eval.tolerance", crate::search::DEFAULT_TOLERANCE)?;
                for (name, queries, exact) in sets {
                    if queries.is_empty() {
                        continue;
                    }
                    let results = queries
                        .iter()
                        .map(|q| search_modified_cosine(q, &train, 1, tol))
                        .collect::<Result<Vec<_>>>()?;
                    let set = format!("{name}_modified_cosine");
                    let ev = evaluate_search(&set, queries, &results, &data.labels, threshold, exact)?;
                    audit_rows(&set, &ev.outcomes, &mut audit);
                    rows.push(ev.accuracy);
                }
            }
            if rows.is_empty() {
                return Err(Error::Evaluation("known and novel splits are both empty".into()));
            }
            write_atomic(&cfg.path("eval.report", "eval_report.tsv"), accuracy_report(&rows).as_bytes())?;
            write_atomic(&cfg.path("eval.audit", "eval_audit.tsv"), audit.as_bytes())?;
        }
        Model::Property(pm) => {
            let pd = PropertyData {
                train,
                known,
                novel,
                labels: &data.labels,
            };
            let scaler = scaler.expect("property checkpoints carry a scaler");
            let report = evaluate_properties(pm, &store, &scaler, &pd, &cfg.mode.to_string())?;
            write_atomic(&cfg.path("eval.report", "eval_report.tsv"), report.to_text().as_bytes())?;
        }
    }
    Ok(())
}

fn results_text(results: &[SearchResult]) -> String {
    let mut out = String::from("query_id\trank\thit_id\tstructure_id\tscore\n");
    for r in results {
        for (i, h) in r.hits.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.6}\n",
                r.query_id,
                i + 1,
                h.spectrum_id,
                h.structure_id,
                h.score
            ));
        }
    }
    out
}

pub fn cmd_search(cfg: &RunConfig) -> Result<()> {
    let queries_path = cfg.required("search.queries")?;
    require_inputs(&[&queries_path])?;
    let data = Prepared::load(cfg)?;
    let (model, store, _) = load_model(cfg)?;
    let Model::Siamese(encoder) = &model else {
        return Err(Error::Config("search needs a siamese checkpoint (mode = siamese)".into()));
    };
    let queries = read_mgf(&queries_path)?;
    let k: usize = cfg.kv.get_or("search.k", 10)?;
    if k == 0 {
        return Err(Error::Config("search.k must be positive".into()));
    }
    let index: EmbeddingIndex = build_index(encoder, &store, &data.select(SplitName::Train))?;
    let refs: Vec<&Spectrum> = queries.iter().collect();
    let results = search_all(encoder, &store, &index, &refs, k)?;
    write_atomic(&cfg.path("search.output", "search_results.tsv"), results_text(&results).as_bytes())
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let input = cfg.required("predict.input")?;
    require_inputs(&[&input])?;
    let (model, store, scaler) = load_model(cfg)?;
    let Model::Property(pm) = &model else {
        return Err(Error::Config("predict needs a property checkpoint (mode = properties or properties-baseline)".into()));
    };
    let scaler = scaler.expect("property checkpoints carry a scaler");
    let spectra = read_mgf(&input)?;
    let refs: Vec<&Spectrum> = spectra.iter().collect();
    let preds = pm.predict_all(&store, &scaler, &refs)?;
    let ids: Vec<&str> = spectra.iter().map(|s| s.id.as_str()).collect();
    write_atomic(&cfg.path("predict.output", "predictions.tsv"), predictions_text(&ids, &preds).as_bytes())
}

pub fn cmd_export(cfg: &RunConfig) -> Result<()> {
    let start: f64 = cfg.kv.get_or("export.start", 0.0)?;
    let end: f64 = cfg.kv.get_or("export.end", 1000.0)?;
    let count: usize = cfg.kv.get_or("export.count", 50_000)?;
    if !(start >= 0.0 && end > start) || count == 0 {
        return Err(Error::Config("export needs 0 <= start < end and count > 0".into()));
    }
    let grid = mz_grid(start, end, count);
    let label = cfg.encoder.mz_precision.label();
    let text = match cfg.kv.raw("export.source").unwrap_or("raw") {
        "raw" => {
            if cfg.encoder.embedding != EmbeddingKind::Sinusoidal {
                return Err(Error::Config("raw export needs the sinusoidal embedding".into()));
            }
            let sin = cfg.encoder.sinusoidal();
            let mode = cfg.encoder.mz_precision;
            export_embeddings(&grid, &label, |mz| sinusoidal_embed_with(mz, &sin, mode))?
        }
        "learned" => {
            let (model, store, _) = load_model(cfg)?;
            let encoder = match &model {
                Model::Siamese(e) => e,
                Model::Property(PropertyModel::Transformer { encoder, .. }) => encoder,
                Model::Property(PropertyModel::Baseline { .. }) => {
                    return Err(Error::Config("the binned baseline has no peak embedding".into()))
                }
            };
            // Grid points at 0 are not valid peaks; they start the grid only.
            let mut peaks = Vec::with_capacity(grid.len());
            for &mz in &grid {
                peaks.push(Peak::new(mz.max(f64::MIN_POSITIVE), 1.0)?);
            }
            let rows = encoder.peak_embedding().embed(&store, &peaks)?;
            let mut it = rows.into_iter();
            export_embeddings(&grid, &label, |_| Ok(it.next().expect("one row per grid point")))?
        }
        other => return Err(Error::Config(format!("export.source must be raw or learned, got {other:?}"))),
    };
    write_atomic(&cfg.path("export.output", "embeddings.csv"), text.as_bytes())
}

/// `FloatFormat` named by a `--precision` value.
pub fn precision_flag(bits: &str) -> Result<FloatFormat> {
    format!("binary{bits}").parse()
}
