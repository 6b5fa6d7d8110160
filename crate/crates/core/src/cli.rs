//! Command-line front end.
//!
//! Every subcommand reads its inputs from explicit paths or from earlier
//! stages' artifacts in the output directory, and writes only inside the
//! output directory. Settings come from flags, then from a `key = value`
//! config file (`--config`), then from built-in defaults. The output
//! directory falls back to `$PUNCTREST_OUT`, then `./out`.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::batcher::{plan_dataset, BatchPlan};
use crate::corpus::io::{read_corpus_dir, read_labels_dir, render_breakdown, write_labels, BreakdownColumn};
use crate::corpus::{
    dataset_stats, extract_labels, extract_labels_from_text, normalize, normalize_text, split_dataset, Dataset,
    ExtractWarning, LabeledWord, SplitConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    confusion, debias_batch_final, empty_balance, metrics, render_report, render_results_table, ConfusionMatrix4,
};
use crate::humaneval::{
    cohort_stats, generate_tests_sized, read_test_files, render_cohort, score_annotation, test_stem,
    write_test_files, AnnotatedReturn, ParticipantReport, TEST_WORDS,
};
use crate::label::PunctClass;
use crate::tagger::{
    argmax, token_accuracy, train, write_logit_file, ContextWindowModel, LogitRecord, ReplayBackend, TaggerBackend,
    TrainingConfig,
};
use crate::tokenizer::{apply_tags, encode_compound, Encoded, EncodedSequence, Vocab, DEFAULT_MAX_LEN};

pub const OUT_ENV: &str = "PUNCTREST_OUT";

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "out",
    "corpus",
    "labels",
    "vocab",
    "train_fraction",
    "max_len",
    "radius",
    "dim",
    "epochs",
    "learning_rate",
    "momentum",
    "batch_size",
    "model",
    "backend",
];

#[derive(Parser, Debug)]
#[command(name = "punctrest", version, about = "Punctuation restoration toolkit")]
struct Cli {
    /// Seed for every random choice (split, grouping, training order).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: $PUNCTREST_OUT or ./out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize raw documents and extract word labels.
    Preprocess {
        /// Directory of raw `.txt` documents.
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
    },
    /// Label counts of the preprocessed corpus.
    Stats(LabelsArg),
    /// Assign documents to train and test.
    Split {
        #[command(flatten)]
        labels: LabelsArg,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Group sentences of each split into compounds.
    Plan(LabelsArg),
    /// Fit the context-window tagger on the training compounds.
    Train {
        #[command(flatten)]
        enc: EncodeArgs,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Tag compounds and write predictions, punctuated text and logits.
    Predict {
        #[command(flatten)]
        enc: EncodeArgs,
        /// `trainable` or `replay:<logit file>`.
        #[arg(long)]
        backend: Option<String>,
        /// Model file for the trainable backend [default: <out>/model.txt].
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Which split to tag.
        #[arg(long, default_value = "test", value_parser = ["train", "test"])]
        part: String,
        /// Tag this text file as a single compound instead of a split.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Score predictions or a count matrix.
    Eval {
        /// Predictions file [default: <out>/predictions.tsv].
        #[arg(long, value_name = "FILE", conflicts_with = "matrix")]
        predictions: Option<PathBuf>,
        /// Confusion matrix count file instead of predictions.
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
        /// Row label in the results table.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Human-baseline tests.
    #[command(subcommand)]
    Human(HumanCommand),
}

#[derive(Subcommand, Debug)]
enum HumanCommand {
    /// Cut the test split into fixed-length tests.
    Gen {
        #[command(flatten)]
        labels: LabelsArg,
        /// Use every labeled document rather than the test split.
        #[arg(long)]
        whole: bool,
        #[arg(long, default_value_t = TEST_WORDS)]
        words: usize,
    },
    /// Score annotated returns against their tests.
    Score {
        /// Annotated return files, named after their test (`test_007...`).
        #[arg(required = true, value_name = "FILE")]
        annotations: Vec<PathBuf>,
        /// Test id, when a single return is not named after its test.
        #[arg(long)]
        test: Option<usize>,
        /// Directory holding the generated tests [default: <out>/human].
        #[arg(long, value_name = "DIR")]
        tests: Option<PathBuf>,
    },
    /// Aggregate scored returns into cohort statistics.
    Report {
        /// Directory of score files [default: <out>/human/scores].
        #[arg(long, value_name = "DIR")]
        scores: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct LabelsArg {
    /// Directory of labeled `.tsv` documents [default: <out>/labels].
    #[arg(long, value_name = "DIR")]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    labels: LabelsArg,
    /// WordPiece vocabulary, one piece per line.
    #[arg(long, value_name = "FILE")]
    vocab: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct HyperArgs {
    #[arg(long)]
    radius: Option<usize>,
    /// Hashed feature space size, a power of two.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

/// Runs the tool on `args` (program name first) and returns the exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

/// Values read from a `--config` file.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("config line {}: unknown key {k:?}", i + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("config line {}: duplicate key {k:?}", i + 1)));
            }
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config value {v:?} for {key} is invalid"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }
}

struct Ctx {
    settings: Settings,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn write_json(&self, rel: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    fn labels_dir(&self, arg: &LabelsArg) -> Result<PathBuf> {
        Ok(self
            .settings
            .get(arg.labels.clone(), "labels")?
            .unwrap_or_else(|| self.path("labels")))
    }

    fn labels(&self, arg: &LabelsArg) -> Result<Dataset> {
        read_labels_dir(&self.labels_dir(arg)?)
    }

    /// The `part` ("train" or "test") of the split recorded in the output
    /// directory.
    fn split_part(&self, arg: &LabelsArg, part: &str) -> Result<Dataset> {
        let all = self.labels(arg)?;
        let list = self.path(&format!("split/{part}.txt"));
        let text = fs::read_to_string(&list).map_err(|e| Error::io(&list, e))?;
        let mut docs = Vec::new();
        for (i, id) in text.lines().filter(|l| !l.is_empty()).enumerate() {
            let doc = all
                .document(id)
                .ok_or_else(|| Error::parse(list.display(), i + 1, format!("unknown document {id:?}")))?;
            docs.push(doc.clone());
        }
        Ok(Dataset::new(docs))
    }

    fn plan(&self, part: &str, ds: &Dataset) -> Result<BatchPlan> {
        let path = self.path(&format!("plan/{part}.plan"));
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        BatchPlan::read(BufReader::new(file), &path.display().to_string(), ds)
    }

    fn vocab(&self, enc: &EncodeArgs) -> Result<Vocab> {
        let path: PathBuf = self
            .settings
            .get(enc.vocab.clone(), "vocab")?
            .ok_or_else(|| Error::Config("no vocabulary given; pass --vocab or set vocab in the config".into()))?;
        Vocab::load(&path)
    }

    fn max_len(&self, enc: &EncodeArgs) -> Result<usize> {
        self.settings.get_or(enc.max_len, "max_len", DEFAULT_MAX_LEN)
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let seed = settings.get_or(cli.seed, "seed", 0)?;
    let out = match settings.get(cli.out, "out")? {
        Some(p) => p,
        None => std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from),
    };
    let ctx = Ctx { settings, seed, out };
    match cli.command {
        Command::Preprocess { corpus } => preprocess(&ctx, corpus),
        Command::Stats(labels) => stats(&ctx, &labels),
        Command::Split { labels, train_fraction } => split(&ctx, &labels, train_fraction),
        Command::Plan(labels) => plan(&ctx, &labels),
        Command::Train { enc, hyper } => train_cmd(&ctx, &enc, &hyper),
        Command::Predict { enc, backend, model, part, input } => {
            predict_cmd(&ctx, &enc, backend, model, &part, input.as_deref())
        }
        Command::Eval { predictions, matrix, name } => eval_cmd(&ctx, predictions, matrix, &name),
        Command::Human(HumanCommand::Gen { labels, whole, words }) => human_gen(&ctx, &labels, whole, words),
        Command::Human(HumanCommand::Score { annotations, test, tests }) => {
            human_score(&ctx, &annotations, test, tests)
        }
        Command::Human(HumanCommand::Report { scores }) => human_report(&ctx, scores),
    }
}

fn preprocess(ctx: &Ctx, corpus: Option<PathBuf>) -> Result<()> {
    let corpus: PathBuf = ctx
        .settings
        .get(corpus, "corpus")?
        .ok_or_else(|| Error::Config("no corpus given; pass --corpus or set corpus in the config".into()))?;
    let raw = read_corpus_dir(&corpus)?;
    if raw.is_empty() {
        return Err(Error::Argument(format!("{} holds no .txt documents", corpus.display())));
    }
    let mut warnings = String::new();
    let mut words = 0;
    for doc in &raw {
        let clean = normalize(doc);
        ctx.write(&format!("clean/{}.txt", clean.id), &clean.text)?;
        let ex = extract_labels(&clean);
        for w in &ex.warnings {
            let line = match w {
                ExtractWarning::DroppedMark { offset, mark } => {
                    format!("{}\tdropped {mark:?} at byte {offset}: no word to attach to", doc.id)
                }
                ExtractWarning::Unterminated { sentence } => {
                    format!("{}\tsentence {sentence} has no closing mark", doc.id)
                }
            };
            log::warn!("{line}");
            warnings.push_str(&line);
            warnings.push('\n');
        }
        words += ex.words().count();
        let mut tsv = Vec::new();
        write_labels(&mut tsv, &ex.sentences).map_err(|e| Error::io("labels", e))?;
        ctx.write(&format!("labels/{}.tsv", clean.id), tsv)?;
    }
    ctx.write("preprocess_warnings.txt", warnings)?;
    println!("preprocessed {} documents, {words} words", raw.len());
    Ok(())
}

fn stats(ctx: &Ctx, labels: &LabelsArg) -> Result<()> {
    let ds = ctx.labels(labels)?;
    let counts = dataset_stats(&ds);
    let table = render_breakdown(&[BreakdownColumn {
        name: "Full set".into(),
        documents: ds.len(),
        counts,
    }]);
    ctx.write("stats.txt", &table)?;
    ctx.write_json("stats.json", &json!({ "documents": ds.len(), "counts": counts }))?;
    print!("{table}");
    Ok(())
}

fn split(ctx: &Ctx, labels: &LabelsArg, train_fraction: Option<f64>) -> Result<()> {
    let cfg = SplitConfig {
        train_fraction: ctx.settings.get_or(train_fraction, "train_fraction", 0.8)?,
        seed: ctx.seed,
    };
    cfg.validate()?;
    let ds = ctx.labels(labels)?;
    let split = split_dataset(&ds, &cfg)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    let ids = |d: &Dataset| d.documents.iter().map(|d| format!("{}\n", d.id)).collect::<String>();
    ctx.write("split/train.txt", ids(&split.train))?;
    ctx.write("split/test.txt", ids(&split.test))?;
    let columns: Vec<BreakdownColumn> = [("Full set", &ds), ("Train set", &split.train), ("Test set", &split.test)]
        .into_iter()
        .map(|(name, d)| BreakdownColumn {
            name: name.into(),
            documents: d.len(),
            counts: dataset_stats(d),
        })
        .collect();
    let table = render_breakdown(&columns);
    ctx.write("split/breakdown.txt", &table)?;
    let summary: BTreeMap<&str, _> = columns
        .iter()
        .map(|c| (c.name.as_str(), json!({ "documents": c.documents, "counts": c.counts })))
        .collect();
    ctx.write_json("split/breakdown.json", &summary)?;
    print!("{table}");
    Ok(())
}

fn plan(ctx: &Ctx, labels: &LabelsArg) -> Result<()> {
    for part in ["train", "test"] {
        let ds = ctx.split_part(labels, part)?;
        let plan = plan_dataset(&ds, ctx.seed);
        let mut buf = Vec::new();
        plan.write(&mut buf).map_err(|e| Error::io("plan", e))?;
        ctx.write(&format!("plan/{part}.plan"), buf)?;
        let short = plan.groups.iter().filter(|g| g.short).count();
        println!(
            "{part}: {} compounds ({short} short), {} words",
            plan.len(),
            plan.word_count()
        );
    }
    Ok(())
}

/// Encodes each group of `plan`; groups that overflow `max_len` are skipped.
fn encode_plan(
    plan: &BatchPlan,
    ds: &Dataset,
    vocab: &Vocab,
    max_len: usize,
) -> Result<(Vec<(usize, Vec<LabeledWord>, EncodedSequence)>, usize)> {
    let mut out = Vec::new();
    let mut dropped = 0;
    for c in plan.compounds(ds)? {
        let words = c.labeled_words();
        if words.is_empty() {
            continue;
        }
        match encode_compound(&words, vocab, max_len)? {
            Encoded::Sequence(seq) => out.push((c.index, words, seq)),
            Encoded::Dropped { positions } => {
                log::warn!("compound {} needs {positions} positions (limit {max_len}); dropped", c.index);
                dropped += 1;
            }
        }
    }
    Ok((out, dropped))
}

fn train_cmd(ctx: &Ctx, enc: &EncodeArgs, h: &HyperArgs) -> Result<()> {
    let s = &ctx.settings;
    let ds = ctx.split_part(&enc.labels, "train")?;
    let plan = ctx.plan("train", &ds)?;
    let vocab = ctx.vocab(enc)?;
    let max_len = ctx.max_len(enc)?;
    let (encoded, dropped) = encode_plan(&plan, &ds, &vocab, max_len)?;
    let seqs: Vec<EncodedSequence> = encoded.into_iter().map(|(_, _, s)| s).collect();

    let defaults = TrainingConfig::default();
    let cfg = TrainingConfig {
        learning_rate: s.get_or(h.learning_rate, "learning_rate", defaults.learning_rate)?,
        momentum: s.get_or(h.momentum, "momentum", defaults.momentum)?,
        epochs: s.get_or(h.epochs, "epochs", defaults.epochs)?,
        batch_size: s.get_or(h.batch_size, "batch_size", defaults.batch_size)?,
        seed: ctx.seed,
        class_weights: None,
    };
    let radius = s.get_or(h.radius, "radius", 2)?;
    let dim = s.get_or(h.dim, "dim", 1 << 16)?;
    let model = ContextWindowModel::new(radius, dim, ctx.seed)?;
    let mut outcome = train(model, &seqs, &cfg)?;

    let mut buf = Vec::new();
    outcome.model.write(&mut buf).map_err(|e| Error::io("model", e))?;
    ctx.write("model.txt", buf)?;
    let mut losses = format!("epoch\tloss\n0\t{:?}\n", outcome.initial_loss);
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        let _ = writeln!(losses, "{}\t{l:?}", i + 1);
    }
    ctx.write("train_loss.tsv", losses)?;
    let accuracy = token_accuracy(&mut outcome.model, &seqs)?;
    ctx.write_json(
        "train_summary.json",
        &json!({
            "compounds": seqs.len(),
            "dropped": dropped,
            "words": seqs.iter().map(EncodedSequence::word_count).sum::<usize>(),
            "epochs": cfg.epochs,
            "initial_loss": outcome.initial_loss,
            "final_loss": outcome.epoch_losses.last(),
            "train_accuracy": accuracy,
        }),
    )?;
    println!("trained on {} compounds; training accuracy {accuracy:.4}", seqs.len());
    Ok(())
}

enum BackendChoice {
    Trainable,
    Replay(PathBuf),
}

fn parse_backend(s: &str) -> Result<BackendChoice> {
    match s {
        "trainable" => Ok(BackendChoice::Trainable),
        _ => match s.strip_prefix("replay:") {
            Some(p) if !p.is_empty() => Ok(BackendChoice::Replay(PathBuf::from(p))),
            _ => Err(Error::Config(format!(
                "unknown backend {s:?}; expected trainable or replay:<file>"
            ))),
        },
    }
}

fn predict_cmd(
    ctx: &Ctx,
    enc: &EncodeArgs,
    backend: Option<String>,
    model: Option<PathBuf>,
    part: &str,
    input: Option<&Path>,
) -> Result<()> {
    let choice = parse_backend(&ctx.settings.get_or(backend, "backend", "trainable".to_string())?)?;
    let mut backend: Box<dyn TaggerBackend> = match choice {
        BackendChoice::Trainable => {
            let path = ctx.settings.get(model, "model")?.unwrap_or_else(|| ctx.path("model.txt"));
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            Box::new(ContextWindowModel::read(BufReader::new(file), &path.display().to_string())?)
        }
        BackendChoice::Replay(path) => {
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            Box::new(ReplayBackend::from_reader(BufReader::new(file), &path.display().to_string())?)
        }
    };
    let vocab = ctx.vocab(enc)?;
    let max_len = ctx.max_len(enc)?;

    let (compounds, dropped) = match input {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let text = crate::corpus::io::decode_utf8(&path.display().to_string(), bytes)?;
            let words: Vec<LabeledWord> = extract_labels_from_text(&normalize_text(&text)).words().cloned().collect();
            if words.is_empty() {
                return Err(Error::Argument(format!("{} holds no words", path.display())));
            }
            match encode_compound(&words, &vocab, max_len)? {
                Encoded::Sequence(seq) => (vec![(0, words, seq)], 0),
                Encoded::Dropped { positions } => {
                    return Err(Error::Argument(format!(
                        "{} needs {positions} positions, more than max_len {max_len}",
                        path.display()
                    )))
                }
            }
        }
        None => {
            let ds = ctx.split_part(&enc.labels, part)?;
            let plan = ctx.plan(part, &ds)?;
            encode_plan(&plan, &ds, &vocab, max_len)?
        }
    };

    let mut rows = String::from("group\tword\tgold\tpred\n");
    let mut punctuated = String::new();
    let mut records = Vec::new();
    for (group, words, seq) in &compounds {
        let logits = backend.logits(seq)?;
        if logits.len() != seq.len() {
            return Err(Error::Protocol(format!(
                "backend returned {} logit vectors for a sequence of {} positions",
                logits.len(),
                seq.len()
            )));
        }
        let pred: Vec<PunctClass> = seq.word_starts.iter().map(|&p| argmax(&logits[p])).collect();
        for (w, p) in words.iter().zip(&pred) {
            let _ = writeln!(rows, "{group}\t{}\t{}\t{p}", w.word, w.label);
        }
        let plain: Vec<&str> = words.iter().map(|w| w.word.as_str()).collect();
        punctuated.push_str(&apply_tags(&plain, &pred)?);
        punctuated.push('\n');
        records.extend(seq.piece_positions().map(|p| LogitRecord {
            token: seq.tokens[p].clone(),
            logits: logits[p],
        }));
    }
    ctx.write("predictions.tsv", rows)?;
    ctx.write("punctuated.txt", &punctuated)?;
    let mut buf = Vec::new();
    write_logit_file(&mut buf, &records)?;
    ctx.write("logits.jsonl", buf)?;
    println!("tagged {} compounds ({dropped} dropped)", compounds.len());
    Ok(())
}

struct PredictionRow {
    group: usize,
    gold: PunctClass,
    pred: PunctClass,
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 && line.starts_with("group\t") || line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(&name, i + 1, m);
        let fields: Vec<&str> = line.split('\t').collect();
        let [group, _word, gold, pred] = fields[..] else {
            return Err(bad("expected group<TAB>word<TAB>gold<TAB>pred"));
        };
        rows.push(PredictionRow {
            group: group.parse().map_err(|_| bad("bad group index"))?,
            gold: gold.parse().map_err(|m: String| bad(&m))?,
            pred: pred.parse().map_err(|m: String| bad(&m))?,
        });
    }
    Ok(rows)
}

fn eval_cmd(ctx: &Ctx, predictions: Option<PathBuf>, matrix: Option<PathBuf>, name: &str) -> Result<()> {
    let (m, debiased) = match matrix {
        Some(path) => {
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            (ConfusionMatrix4::parse(BufReader::new(file), &path.display().to_string())?, None)
        }
        None => {
            let path = predictions.unwrap_or_else(|| ctx.path("predictions.tsv"));
            let rows = read_predictions(&path)?;
            let gold: Vec<PunctClass> = rows.iter().map(|r| r.gold).collect();
            let pred: Vec<PunctClass> = rows.iter().map(|r| r.pred).collect();
            // last word of every compound
            let finals: Vec<usize> = (0..rows.len())
                .filter(|&i| rows.get(i + 1).is_none_or(|next| next.group != rows[i].group))
                .collect();
            let debiased = debias_batch_final(&gold, &pred, &finals)?;
            (confusion(&gold, &pred)?, Some((finals.len(), debiased)))
        }
    };
    let report = metrics(&m)?;
    let (fp_empty, fn_empty) = empty_balance(&m);

    let mut text = render_results_table(&[(name, &report)]);
    text.push('\n');
    text.push_str(&render_report(&report));
    let _ = writeln!(text, "EMPTY false positives {fp_empty}, false negatives {fn_empty}");
    text.push_str("\nconfusion matrix (rows predicted, columns true):\n");
    text.push_str(&m.render());
    ctx.write("eval/matrix.txt", m.render())?;

    let mut doc = json!({
        "name": name,
        "matrix": m,
        "report": report,
        "empty_balance": { "false_positives": fp_empty, "false_negatives": fn_empty },
        "debiased": null,
    });
    if let Some((excluded, dm)) = debiased {
        let _ = writeln!(text, "\nwithout the {excluded} compound-final words:");
        match metrics(&dm) {
            Ok(dr) => {
                text.push_str(&render_results_table(&[(name, &dr)]));
                doc["debiased"] = json!({ "excluded": excluded, "matrix": dm, "report": dr });
            }
            Err(Error::UndefinedMetrics) => {
                text.push_str("no words left to score\n");
                doc["debiased"] = json!({ "excluded": excluded, "matrix": dm, "report": null });
            }
            Err(e) => return Err(e),
        }
        text.push_str(&dm.render());
        ctx.write("eval/matrix_debiased.txt", dm.render())?;
    }
    ctx.write("eval/report.txt", &text)?;
    ctx.write_json("eval/report.json", &doc)?;
    print!("{text}");
    Ok(())
}

fn human_gen(ctx: &Ctx, labels: &LabelsArg, whole: bool, words: usize) -> Result<()> {
    if words == 0 {
        return Err(Error::Config("--words must be positive".into()));
    }
    let ds = if whole {
        ctx.labels(labels)?
    } else {
        ctx.split_part(labels, "test")?
    };
    let tests = generate_tests_sized(&ds, words);
    if tests.is_empty() {
        return Err(Error::Argument("the test stream holds no words".into()));
    }
    let dir = ctx.path("human");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut index = String::from("test\twords\tPERIOD\tCOMMA\tQUESTION\tEMPTY\n");
    for t in &tests {
        write_test_files(&dir, t)?;
        let c = crate::corpus::ClassCounts::from_labels(t.gold.iter().copied());
        let _ = writeln!(
            index,
            "{}\t{}\t{}\t{}\t{}\t{}",
            test_stem(t.id),
            c.words,
            c.period,
            c.comma,
            c.question,
            c.empty
        );
    }
    ctx.write("human/index.tsv", index)?;
    let full = tests.iter().filter(|t| t.words.len() == words).count();
    println!(
        "{} tests: {full} of {words} words, {} shorter",
        tests.len(),
        tests.len() - full
    );
    Ok(())
}

/// `test_007.return.txt` → 7.
fn test_id_from_name(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    let digits: String = name.strip_prefix("test_")?.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn human_score(ctx: &Ctx, annotations: &[PathBuf], test: Option<usize>, tests: Option<PathBuf>) -> Result<()> {
    if test.is_some() && annotations.len() > 1 {
        return Err(Error::Config("--test applies to a single return".into()));
    }
    let dir = tests.unwrap_or_else(|| ctx.path("human"));
    for path in annotations {
        let id = test.or_else(|| test_id_from_name(path)).ok_or_else(|| {
            Error::Config(format!(
                "cannot tell which test {} answers; name it test_NNN... or pass --test",
                path.display()
            ))
        })?;
        let t = read_test_files(&dir, id)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = crate::corpus::io::decode_utf8(&path.display().to_string(), bytes)?;
        let report = score_annotation(&t, &AnnotatedReturn { test_id: id, text })?;
        ctx.write_json(&format!("human/scores/{}.json", test_stem(id)), &report)?;
        println!(
            "{}: PERIOD F1 {:.3}, COMMA F1 {:.3}",
            test_stem(id),
            report.report.period.f1,
            report.report.comma.f1
        );
    }
    Ok(())
}

fn human_report(ctx: &Ctx, scores: Option<PathBuf>) -> Result<()> {
    let dir = scores.unwrap_or_else(|| ctx.path("human/scores"));
    let mut reports: Vec<ParticipantReport> = Vec::new();
    for path in crate::corpus::io::list_files(&dir, "json")? {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        reports.push(serde_json::from_str(&text)?);
    }
    let stats = cohort_stats(&reports)?;
    let text = render_cohort(&reports, &stats);
    ctx.write("human/cohort.txt", &text)?;
    ctx.write_json("human/cohort.json", &json!({ "participants": reports, "stats": stats }))?;
    print!("{text}");
    Ok(())
}
