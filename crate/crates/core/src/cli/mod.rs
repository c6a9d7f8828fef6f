//! `kompet` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input/format error, 3 runtime or
//! network error.

mod render;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::agreement::{agreement_report, AnnotatorView, Level};
use crate::corpus::{corpus_stats, import_bio, parse_corpus_file, split_corpus, Corpus, SpanRecord};
use crate::error::{Error, Result};
use crate::evaluate::{
    align, baseline_predict, confusion_matrix, majority_label, read_predictions_file, weighted_macro_f1, Baseline,
    ConfusionMatrix, EvalReport, Normalization,
};
use crate::review::{ReviewContext, ReviewStore, DEFAULT_ALTERNATIVES, DEFAULT_PORT};
use crate::significance::{compare_all, AsoOptions, ScoreSample};
use crate::supervise::{
    distant_label, distant_label_online, label_distribution, read_label_file, silver_quality,
    write_label_records, LabelRecord, SpanDiagnostics, SuperviseOptions,
};
use crate::taxonomy::{
    load_taxonomy_file, online::BASE_URL_ENV, validate_concepts, CoarseLabel, ConceptKind,
    EscoClient, EscoClientConfig,
};

#[derive(Parser, Debug)]
#[command(name = "kompet", version, about = "Distant supervision and evaluation toolkit for skill spans in job postings")]
struct Cli {
    /// Optional key = value config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every random choice (splits, bootstrap).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Taxonomy snapshot validation and live lookups.
    #[command(subcommand)]
    Taxonomy(TaxonomyCommand),
    /// Corpus statistics (posts, sentences, tokens, span lengths).
    Stats(StatsArgs),
    /// Deterministic train/dev/test split at posting level.
    Split(SplitArgs),
    /// Assign silver coarse labels to every span.
    Supervise(SuperviseArgs),
    /// Label histogram of a label file.
    Distribution(DistributionArgs),
    /// Silver label accuracy and missing rate against gold labels.
    Audit(AuditArgs),
    /// Weighted macro-F1, per-class scores and confusion matrix.
    Evaluate(EvaluateArgs),
    /// Almost Stochastic Order comparison of all model pairs.
    Compare(CompareArgs),
    /// Cohen's and Fleiss' kappa between annotators.
    Agreement(AgreementArgs),
    /// HTTP review service for correcting silver labels.
    Serve(ServeArgs),
}

#[derive(Subcommand, Debug)]
enum TaxonomyCommand {
    /// Check a snapshot and summarize it.
    Validate {
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        language: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Query the live ESCO search API.
    Fetch {
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value_t = KindArg::Skill)]
        kind: KindArg,
        #[arg(long)]
        language: Option<String>,
        #[arg(long, default_value_t = 100)]
        limit: usize,
        /// Request timeout in seconds.
        #[arg(long)]
        timeout: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Skill,
    Knowledge,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CorpusFormat {
    /// One posting per line with token-offset spans.
    Jsonl,
    /// One sentence per line with BIO tags (tokens, tags_skill, tags_knowledge).
    Bio,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Corpus file; repeat to concatenate several files.
    #[arg(long = "corpus", required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = CorpusFormat::Jsonl)]
    format: CorpusFormat,
    /// Language tag for BIO input.
    #[arg(long, default_value = "da")]
    bio_lang: String,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Posting counts as train,dev,test.
    #[arg(long, value_parser = parse_sizes)]
    sizes: (usize, usize, usize),
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SuperviseArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Taxonomy language; defaults to the language of the first posting.
    #[arg(long)]
    language: Option<String>,
    /// Candidates retrieved per span.
    #[arg(long)]
    k: Option<usize>,
    /// Retrieve candidates from the live ESCO API instead of the snapshot.
    #[arg(long)]
    online: bool,
    #[arg(long)]
    timeout: Option<u64>,
    /// Output label file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-span diagnostics (candidate count, best distance, errors) as JSON lines.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DistributionArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long)]
    silver: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BaselineArg {
    Majority,
    Matcher,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormalizationArg {
    None,
    Row,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold label file (supervise format); predictions are joined on span id.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predictions: TSV (span_id, [gold,] pred) or JSON lines.
    #[arg(long, required_unless_present = "baseline")]
    pred: Option<PathBuf>,
    /// Score a built-in baseline instead of a predictions file.
    #[arg(long, value_enum, conflicts_with = "pred", requires = "gold")]
    baseline: Option<BaselineArg>,
    /// Training label file for the majority baseline.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Corpus holding the gold spans, for the matcher baseline.
    #[arg(long)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    language: Option<String>,
    /// Include a confusion matrix.
    #[arg(long, value_enum)]
    confusion: Option<NormalizationArg>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// JSON file: [{"model": str, "scores": [float, ...]}, ...]
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Also write the TSV grid here.
    #[arg(long)]
    tsv_out: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum LevelArg {
    Token,
    Span,
    Both,
}

#[derive(Args, Debug)]
struct AgreementArgs {
    /// One corpus file per annotator (at least two), sharing postings and tokens.
    #[arg(long = "view", required = true, num_args = 1..)]
    views: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LevelArg::Both)]
    level: LevelArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Silver label file to review.
    #[arg(long)]
    silver: PathBuf,
    /// Corpus for sentence context.
    #[arg(long)]
    corpus: Vec<PathBuf>,
    /// Taxonomy snapshot for alternative suggestions.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    language: Option<String>,
    /// Append-only decision log (default: <silver>.decisions.jsonl).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    host: Option<IpAddr>,
    #[arg(long)]
    port: Option<u16>,
    /// Directory with the compiled review UI.
    #[arg(long)]
    assets: Option<PathBuf>,
    /// Alternatives suggested per item.
    #[arg(long, default_value_t = DEFAULT_ALTERNATIVES)]
    alternatives: usize,
}

fn parse_sizes(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected train,dev,test".into());
    }
    let n = |p: &str| p.parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    Ok((n(parts[0])?, n(parts[1])?, n(parts[2])?))
}

/// Settings read from `--config`; any flag given on the command line wins.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    language: Option<String>,
    taxonomy: Option<PathBuf>,
    k: Option<usize>,
    alpha: Option<f64>,
    bootstrap: Option<usize>,
    grid: Option<usize>,
    threshold: Option<f64>,
    host: Option<IpAddr>,
    port: Option<u16>,
    esco_base_url: Option<String>,
    timeout_secs: Option<u64>,
    log: Option<PathBuf>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }
}

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config)
        .ok_or_else(|| Error::InvalidInput(format!("missing --{name} (flag or config key)")))
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    match cli.command {
        Command::Taxonomy(cmd) => taxonomy(cmd, &config, out),
        Command::Stats(args) => stats(args, out),
        Command::Split(args) => split(args, seed, out),
        Command::Supervise(args) => supervise(args, &config, out, err),
        Command::Distribution(args) => distribution(args, out),
        Command::Audit(args) => audit(args, out),
        Command::Evaluate(args) => evaluate(args, &config, out),
        Command::Compare(args) => compare(args, seed, &config, out),
        Command::Agreement(args) => agreement(args, out),
        Command::Serve(args) => serve(args, &config, err),
    }
}

fn emit_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    emit(&(text + "\n"), out)
}

fn emit(text: &str, out: &mut dyn Write) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let mut parts = Vec::with_capacity(args.corpus.len());
    for path in &args.corpus {
        parts.push(match args.format {
            CorpusFormat::Jsonl => parse_corpus_file(path)?,
            CorpusFormat::Bio => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                import_bio(file, &args.bio_lang)?
            }
        });
    }
    Corpus::merge(parts)
}

fn load_corpora(paths: &[PathBuf]) -> Result<Corpus> {
    load_corpus(&CorpusArgs {
        corpus: paths.to_vec(),
        format: CorpusFormat::Jsonl,
        bio_lang: String::new(),
    })
}

fn client_config(config: &Config, timeout: Option<u64>) -> EscoClientConfig {
    let mut c = EscoClientConfig::default();
    if std::env::var(BASE_URL_ENV).is_err() {
        if let Some(url) = &config.esco_base_url {
            c.base_url = url.clone();
        }
    }
    if let Some(secs) = timeout.or(config.timeout_secs) {
        c.timeout = Duration::from_secs(secs);
    }
    c
}

#[derive(Serialize)]
struct TaxonomySummary {
    language: String,
    concepts: usize,
    labeled_in_language: usize,
    by_kind: HashMap<&'static str, usize>,
    by_coarse_label: std::collections::BTreeMap<CoarseLabel, usize>,
}

fn taxonomy(cmd: TaxonomyCommand, config: &Config, out: &mut dyn Write) -> Result<()> {
    match cmd {
        TaxonomyCommand::Validate {
            taxonomy,
            language,
            json,
        } => {
            let path = required(taxonomy, config.taxonomy.clone(), "taxonomy")?;
            let language = required(language, config.language.clone(), "language")?;
            let index = load_taxonomy_file(&path, &language)?;
            let concepts = index.concepts();
            let mut by_kind = HashMap::new();
            for c in concepts {
                *by_kind.entry(c.kind.as_str()).or_insert(0) += 1;
            }
            let coarse = validate_concepts(concepts)?;
            let summary = TaxonomySummary {
                language: language.clone(),
                concepts: concepts.len(),
                labeled_in_language: concepts
                    .iter()
                    .filter(|c| c.preferred_label.contains_key(&language))
                    .count(),
                by_kind,
                by_coarse_label: label_distribution(coarse),
            };
            if json {
                return emit_json(&summary, out);
            }
            let mut text = format!(
                "{}: {} concepts ({} labeled in {})\n",
                path.display(),
                summary.concepts,
                summary.labeled_in_language,
                language
            );
            for kind in ["skill", "knowledge", "attitude", "language"] {
                text.push_str(&format!("  {kind:<10}{:>6}\n", summary.by_kind.get(kind).unwrap_or(&0)));
            }
            text.push_str(&render::distribution_table(&summary.by_coarse_label));
            emit(&text, out)
        }
        TaxonomyCommand::Fetch {
            query,
            kind,
            language,
            limit,
            timeout,
            json,
        } => {
            let language = required(language, config.language.clone(), "language")?;
            let client = EscoClient::new(client_config(config, timeout));
            let kind = match kind {
                KindArg::Skill => ConceptKind::Skill,
                KindArg::Knowledge => ConceptKind::Knowledge,
            };
            let concepts = client.fetch(&query, kind, &language, limit)?;
            if json {
                return emit_json(&concepts, out);
            }
            let mut text = String::new();
            for c in &concepts {
                let label = c.preferred_label.get(&language).map(String::as_str).unwrap_or("");
                let coarse = crate::taxonomy::coarse_label(c)
                    .map(|l| l.tag().to_string())
                    .unwrap_or_else(|_| "?".into());
                text.push_str(&format!("{}\t{}\t{}\t{}\n", c.code, c.kind.as_str(), coarse, label));
            }
            emit(&text, out)
        }
    }
}

fn stats(args: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let report = corpus_stats(&corpus);
    if args.json {
        return emit_json(&report, out);
    }
    let mut langs: Vec<String> = corpus.postings.iter().map(|p| p.lang.to_uppercase()).collect();
    langs.sort();
    langs.dedup();
    let column = if langs.is_empty() { "-".to_string() } else { langs.join("+") };
    emit(&render::stats_table(&report, &column), out)
}

fn split(args: SplitArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let split = split_corpus(&corpus, args.sizes, seed)?;
    if args.json {
        return emit_json(&split, out);
    }
    let mut text = String::new();
    for (name, ids) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        for id in ids {
            text.push_str(&format!("{name}\t{id}\n"));
        }
    }
    emit(&text, out)
}

#[derive(Serialize)]
struct DiagnosticLine<'a> {
    span_id: &'a str,
    #[serde(flatten)]
    diagnostics: &'a SpanDiagnostics,
}

fn supervise(args: SuperviseArgs, config: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let language = args
        .language
        .or_else(|| config.language.clone())
        .or_else(|| corpus.postings.first().map(|p| p.lang.clone()))
        .ok_or_else(|| Error::InvalidInput("missing --language and the corpus is empty".into()))?;
    let options = SuperviseOptions {
        k: args.k.or(config.k).unwrap_or(100),
        ..SuperviseOptions::default()
    };
    let labeled = if args.online {
        let client = EscoClient::new(client_config(config, args.timeout));
        distant_label_online(&corpus.spans, &client, &language, &options)
    } else {
        let path = required(args.taxonomy, config.taxonomy.clone(), "taxonomy")?;
        let index = load_taxonomy_file(&path, &language)?;
        distant_label(&corpus.spans, &index, &options)
    };
    let records: Vec<LabelRecord> = labeled.iter().map(|l| l.to_record()).collect();

    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            write_label_records(&records, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        None => {
            let mut buf = Vec::new();
            write_label_records(&records, &mut buf).map_err(|e| Error::io("<stdout>", e))?;
            out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    if let Some(path) = &args.diagnostics {
        let mut buf = Vec::new();
        for l in &labeled {
            let line = DiagnosticLine {
                span_id: &l.span.span_id,
                diagnostics: &l.diagnostics,
            };
            serde_json::to_writer(&mut buf, &line).map_err(|e| Error::InvalidInput(e.to_string()))?;
            buf.push(b'\n');
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    let missing = labeled.iter().filter(|l| l.missing).count();
    let failed = labeled.iter().filter(|l| l.diagnostics.error.is_some()).count();
    let _ = writeln!(
        err,
        "labeled {} spans: {} matched, {} missing (K99){}",
        labeled.len(),
        labeled.len() - missing,
        missing,
        if failed > 0 { format!(", {failed} with errors") } else { String::new() }
    );
    Ok(())
}

fn distribution(args: DistributionArgs, out: &mut dyn Write) -> Result<()> {
    let records = read_label_file(&args.labels)?;
    let hist = label_distribution(records.iter().map(|r| r.label));
    if args.json {
        return emit_json(&hist, out);
    }
    emit(&render::distribution_table(&hist), out)
}

fn audit(args: AuditArgs, out: &mut dyn Write) -> Result<()> {
    let silver = read_label_file(&args.silver)?;
    let gold = read_label_file(&args.gold)?;
    let audit = silver_quality(&silver, &gold)?;
    if args.json {
        return emit_json(&audit, out);
    }
    emit(&render::audit_table(&audit), out)
}

#[derive(Serialize)]
struct EvaluateOutput {
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    confusion_matrix: Option<ConfusionMatrix>,
}

fn evaluate(args: EvaluateArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let gold_records = args.gold.as_ref().map(read_label_file).transpose()?;
    let gold_pairs: Option<Vec<(String, CoarseLabel)>> = gold_records
        .as_ref()
        .map(|g| g.iter().map(|r| (r.span_id.clone(), r.label)).collect());

    let (gold, pred) = match (args.baseline, &args.pred) {
        (None, Some(path)) => align(&read_predictions_file(path)?, gold_pairs.as_deref())?,
        (Some(baseline), _) => {
            let gold_pairs = gold_pairs.expect("clap requires --gold with --baseline");
            let gold: Vec<CoarseLabel> = gold_pairs.iter().map(|(_, l)| *l).collect();
            let pred = match baseline {
                BaselineArg::Majority => {
                    let train_path = args
                        .train
                        .as_ref()
                        .ok_or_else(|| Error::InvalidInput("--baseline majority needs --train".into()))?;
                    let train = read_label_file(train_path)?;
                    let hist = label_distribution(train.iter().map(|r| r.label));
                    vec![majority_label(&hist)?; gold.len()]
                }
                BaselineArg::Matcher => {
                    if args.corpus.is_empty() {
                        return Err(Error::InvalidInput("--baseline matcher needs --corpus".into()));
                    }
                    let corpus = load_corpora(&args.corpus)?;
                    let by_id: HashMap<&str, &SpanRecord> =
                        corpus.spans.iter().map(|s| (s.span_id.as_str(), s)).collect();
                    let spans: Vec<SpanRecord> = gold_pairs
                        .iter()
                        .map(|(id, _)| {
                            by_id.get(id.as_str()).map(|s| (*s).clone()).ok_or_else(|| {
                                Error::InvalidInput(format!("gold span {id:?} is not in the corpus"))
                            })
                        })
                        .collect::<Result<_>>()?;
                    let language = args
                        .language
                        .clone()
                        .or_else(|| config.language.clone())
                        .or_else(|| corpus.postings.first().map(|p| p.lang.clone()))
                        .ok_or_else(|| Error::InvalidInput("missing --language".into()))?;
                    let path = required(args.taxonomy.clone(), config.taxonomy.clone(), "taxonomy")?;
                    let index = load_taxonomy_file(&path, &language)?;
                    baseline_predict(&spans, Baseline::Matcher(&index))?
                }
            };
            (gold, pred)
        }
        (None, None) => unreachable!("clap requires --pred or --baseline"),
    };

    let report = weighted_macro_f1(&gold, &pred)?;
    let confusion = args
        .confusion
        .map(|n| {
            let n = match n {
                NormalizationArg::None => Normalization::None,
                NormalizationArg::Row => Normalization::Row,
            };
            confusion_matrix(&gold, &pred, n)
        })
        .transpose()?;
    if args.json {
        return emit_json(
            &EvaluateOutput {
                report,
                confusion_matrix: confusion,
            },
            out,
        );
    }
    let mut text = render::eval_table(&report);
    if let Some(m) = &confusion {
        text.push('\n');
        text.push_str(&render::confusion_table(m));
    }
    emit(&text, out)
}

fn compare(args: CompareArgs, seed: u64, config: &Config, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&args.runs).map_err(|e| Error::io(&args.runs, e))?;
    let samples: Vec<ScoreSample> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(e.line(), format!("{}: {e}", args.runs.display())))?;
    for s in &samples {
        s.validate()?;
    }
    let defaults = AsoOptions::default();
    let options = AsoOptions {
        grid_size: args.grid.or(config.grid).unwrap_or(defaults.grid_size),
        bootstrap_iters: args.bootstrap.or(config.bootstrap).unwrap_or(defaults.bootstrap_iters),
        threshold: args.threshold.or(config.threshold).unwrap_or(defaults.threshold),
        seed,
    };
    let alpha = args.alpha.or(config.alpha).unwrap_or(0.05);
    let matrix = compare_all(&samples, alpha, &options)?;
    let tsv = matrix.to_tsv();
    let report = serde_json::to_string_pretty(&matrix).map_err(|e| Error::InvalidInput(e.to_string()))? + "\n";
    if let Some(path) = &args.tsv_out {
        fs::write(path, &tsv).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.report_out {
        fs::write(path, &report).map_err(|e| Error::io(path, e))?;
    }
    emit(if args.json { &report } else { &tsv }, out)
}

fn agreement(args: AgreementArgs, out: &mut dyn Write) -> Result<()> {
    if args.views.len() < 2 {
        return Err(Error::InvalidInput("agreement needs at least two --view files".into()));
    }
    let views = args
        .views
        .iter()
        .map(|path| {
            Ok(AnnotatorView {
                annotator_id: path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string()),
                corpus: parse_corpus_file(path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let levels: &[Level] = match args.level {
        LevelArg::Token => &[Level::Token],
        LevelArg::Span => &[Level::Span],
        LevelArg::Both => &[Level::Token, Level::Span],
    };
    let reports = levels
        .iter()
        .map(|&level| agreement_report(&views, level))
        .collect::<Result<Vec<_>>>()?;
    if args.json {
        return emit_json(&reports, out);
    }
    emit(&render::agreement_table(&reports), out)
}

fn serve(args: ServeArgs, config: &Config, err: &mut dyn Write) -> Result<()> {
    let silver = read_label_file(&args.silver)?;
    let corpus = if args.corpus.is_empty() {
        None
    } else {
        Some(load_corpora(&args.corpus)?)
    };
    let index = match args.taxonomy.clone().or_else(|| config.taxonomy.clone()) {
        None => None,
        Some(path) => {
            let language = args
                .language
                .clone()
                .or_else(|| config.language.clone())
                .or_else(|| corpus.as_ref().and_then(|c| c.postings.first()).map(|p| p.lang.clone()))
                .ok_or_else(|| Error::InvalidInput("missing --language for --taxonomy".into()))?;
            Some(load_taxonomy_file(&path, &language)?)
        }
    };
    let log_path = args.log.or_else(|| config.log.clone()).unwrap_or_else(|| {
        let mut p = args.silver.clone().into_os_string();
        p.push(".decisions.jsonl");
        PathBuf::from(p)
    });
    let store = ReviewStore::open(
        silver,
        ReviewContext {
            corpus: corpus.as_ref(),
            index: index.as_ref(),
            alternatives: args.alternatives,
        },
        &log_path,
    )?;
    let host = args.host.or(config.host).unwrap_or(IpAddr::from([127, 0, 0, 1]));
    let port = args.port.or(config.port).unwrap_or(DEFAULT_PORT);
    let addr = SocketAddr::new(host, port);
    let _ = writeln!(
        err,
        "serving {} items on http://{addr} (decision log {})",
        store.items().len(),
        log_path.display()
    );
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Network(e.to_string()))?;
    runtime.block_on(crate::review::serve(store, addr, args.assets))
}
