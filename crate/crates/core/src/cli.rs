//! The `amrsum` command-line runner.
//!
//! Every verb resolves a [`RunConfig`] from defaults, an optional TOML file
//! (`--config`) and command-line flags, in that order of precedence, and
//! writes it next to its outputs as `config.json`. Output files are written
//! atomically.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error
//! (including partial failure of a batch), 4 numeric failure, 5 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::{linearize, parse_blocks, to_penman, AmrBlock, AmrGraph, LinearizeOptions};
use crate::corpus::{parse_documents, tokenize, Document};
use crate::decode::{FusionConfig, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_LENGTH, DEFAULT_PSI};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::ngram::{lambdas_from_theta, DEFAULT_THETA};
use crate::s2s::{train, Dims, Seq2SeqParams, TrainConfig, Vocab};
use crate::side_info::DEFAULT_TOP_K;
use crate::summarize::{realize, summarize_document, GenerationSettings, Guidance, ObjectiveConfig};
use crate::tokens::TokenSeq;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Environment variable naming the directory relative input paths are
/// resolved against.
pub const DATA_DIR_ENV: &str = "AMRSUM_DATA_DIR";

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root_cause() {
        Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
        Error::NonFiniteLoss { .. } => EXIT_NUMERIC,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_DATA,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub embed: usize,
    pub hidden: usize,
    /// Maximum vocabulary size, special tokens included.
    pub vocab_limit: Option<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let d = Dims::default();
        Self {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            clip: t.clip,
            batch_size: t.batch_size,
            embed: d.embed,
            hidden: d.hidden,
            vocab_limit: Some(50_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub top_k: Vec<usize>,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { psi: vec![0.0, 0.5, DEFAULT_PSI], theta: vec![1.0, DEFAULT_THETA], top_k: vec![1, 5, DEFAULT_TOP_K] }
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub psi: f64,
    pub theta: f64,
    pub top_k: usize,
    pub beam_width: usize,
    pub max_length: usize,
    pub linearize: LinearizeOptions,
    pub train: TrainSettings,
    pub objective: ObjectiveConfig,
    pub grid: GridSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            psi: DEFAULT_PSI,
            theta: DEFAULT_THETA,
            top_k: DEFAULT_TOP_K,
            beam_width: DEFAULT_BEAM_WIDTH,
            max_length: DEFAULT_MAX_LENGTH,
            linearize: LinearizeOptions::default(),
            train: TrainSettings::default(),
            objective: ObjectiveConfig::default(),
            grid: GridSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.psi) {
            return bad(format!("psi must lie in [0, 1], got {}", self.psi));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be positive, got {}", self.theta));
        }
        if self.top_k == 0 || self.beam_width == 0 || self.max_length == 0 {
            return bad("top_k, beam_width and max_length must be at least 1".into());
        }
        if self.train.batch_size == 0 || self.train.embed == 0 || self.train.hidden == 0 {
            return bad("batch_size, embed and hidden must be at least 1".into());
        }
        if self.grid.psi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("grid psi values must lie in [0, 1]".into());
        }
        if self.grid.theta.iter().any(|t| !(*t > 0.0 && t.is_finite())) || self.grid.top_k.contains(&0) {
            return bad("grid theta values must be positive and top_k values at least 1".into());
        }
        Ok(())
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig { psi: self.psi, beam_width: self.beam_width, max_length: self.max_length }
    }

    pub fn generation(&self) -> Result<GenerationSettings> {
        Ok(GenerationSettings { fusion: self.fusion(), lm_weights: lambdas_from_theta(self.theta)?, linearize: self.linearize.clone() })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            clip: self.train.clip,
            batch_size: self.train.batch_size,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "amrsum", version, about = "AMR-to-text generation and summarization with guided beam search")]
pub struct Cli {
    /// TOML file with run parameters; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory that relative input paths are resolved against.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Weight of the side information in the fused score.
    #[arg(long, global = true)]
    pub psi: Option<f64>,
    /// Ratio between successive interpolation weights of the side model.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Number of source sentences kept as side information.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    #[arg(long, global = true)]
    pub max_length: Option<usize>,
    #[arg(long, global = true)]
    pub reentrancy_depth: Option<usize>,
    #[arg(long, global = true)]
    pub keep_senses: bool,
    #[arg(long, global = true)]
    pub keep_wiki: bool,
    #[arg(long, global = true)]
    pub keep_case: bool,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Parse AMR files and print one normalized PENMAN graph per line.
    Parse(FilesArgs),
    /// Print one linearization per graph.
    Linearize(FilesArgs),
    /// Train the encoder-decoder on (linearized AMR, sentence) pairs.
    Train(TrainArgs),
    /// Generate one sentence per graph of an AMR file.
    Generate(GenerateArgs),
    /// Summarize every document of a JSON-lines corpus.
    Summarize(SummarizeArgs),
    /// Evaluate a psi × theta × top-k grid on a dev corpus.
    GridSearch(GridArgs),
    /// Score hypotheses against references, one sentence per line.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FilesArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// AMR release file with `::snt` lines, or a `.jsonl` document corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub embed: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub vocab_limit: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// AMR release file with the graphs to realize.
    #[arg(long)]
    pub amr: PathBuf,
    /// `none`, `oracle:<gold summaries, one per line>` or
    /// `doc:<documents with parses, one per graph>`.
    #[arg(long, default_value = "none")]
    pub guidance: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON-lines document corpus.
    #[arg(long)]
    pub docs: PathBuf,
    /// `none`, `doc` (top-k source sentences) or `oracle` (gold summary).
    #[arg(long, default_value = "doc")]
    pub guidance: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Budget as a fraction of the merged graph's node count.
    #[arg(long)]
    pub budget_fraction: Option<f64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON-lines dev corpus with parses, summaries and summary graphs.
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub psi_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub theta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub top_k_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Directory for `metrics.json` and `metrics.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse(_) => "parse",
            Command::Linearize(_) => "linearize",
            Command::Train(_) => "train",
            Command::Generate(_) => "generate",
            Command::Summarize(_) => "summarize",
            Command::GridSearch(_) => "grid-search",
            Command::Evaluate(_) => "evaluate",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::Parse(a) | Command::Linearize(a) => &a.overrides,
            Command::Train(a) => &a.overrides,
            Command::Generate(a) => &a.overrides,
            Command::Summarize(a) => &a.overrides,
            Command::GridSearch(a) => &a.overrides,
            Command::Evaluate(a) => &a.overrides,
        }
    }
}

/// Resolves the run configuration: defaults, then the config file, then flags.
pub fn resolve_config(cli: &Cli, data_dir: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let path = resolve_input(data_dir, path)?;
            RunConfig::from_toml(&fs::read_to_string(&path)?)?
        }
        None => RunConfig::default(),
    };
    let o = cli.command.overrides();
    macro_rules! set {
        ($field:expr, $flag:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(cfg.seed, o.seed);
    set!(cfg.psi, o.psi);
    set!(cfg.theta, o.theta);
    set!(cfg.top_k, o.top_k);
    set!(cfg.beam_width, o.beam);
    set!(cfg.max_length, o.max_length);
    set!(cfg.linearize.max_reentrancy_depth, o.reentrancy_depth);
    cfg.linearize.strip_senses &= !o.keep_senses;
    cfg.linearize.strip_wiki &= !o.keep_wiki;
    cfg.linearize.lowercase &= !o.keep_case;
    match &cli.command {
        Command::Train(a) => {
            set!(cfg.train.epochs, a.epochs);
            set!(cfg.train.learning_rate, a.learning_rate);
            set!(cfg.train.batch_size, a.batch_size);
            set!(cfg.train.embed, a.embed);
            set!(cfg.train.hidden, a.hidden);
            if a.vocab_limit.is_some() {
                cfg.train.vocab_limit = a.vocab_limit;
            }
        }
        Command::Summarize(a) => set!(cfg.objective.budget_fraction, a.budget_fraction),
        Command::GridSearch(a) => {
            set!(cfg.grid.psi, a.psi_grid);
            set!(cfg.grid.theta, a.theta_grid);
            set!(cfg.grid.top_k, a.top_k_grid);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Relative paths are taken relative to `data_dir` when it is set. The
/// file must exist.
fn resolve_input(data_dir: Option<&Path>, path: &Path) -> Result<PathBuf> {
    let full = match data_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    };
    if !full.exists() {
        return Err(Error::invalid(format!("input {} does not exist", full.display())));
    }
    Ok(full)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn lines_to_bytes<S: AsRef<str>>(lines: &[S]) -> Vec<u8> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    out.into_bytes()
}

/// Outcome of a command: the message for stdout and the per-item failures.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub diagnostics: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.diagnostics.is_empty() {
            EXIT_OK
        } else {
            EXIT_DATA
        }
    }
}

struct Run<'a> {
    cfg: RunConfig,
    data_dir: Option<&'a Path>,
}

impl Run<'_> {
    fn input(&self, path: &Path) -> Result<PathBuf> {
        resolve_input(self.data_dir, path)
    }

    fn read(&self, path: &Path) -> Result<String> {
        Ok(fs::read_to_string(self.input(path)?)?)
    }

    fn echo(&self, out_dir: &Path, command: &Command) -> Result<()> {
        let echo = serde_json::json!({ "command": command.name(), "args": command, "config": self.cfg });
        write_atomic(&out_dir.join("config.json"), serde_json::to_string_pretty(&echo)?.as_bytes())
    }

    fn manifest(&self, out_dir: &Path, value: serde_json::Value) -> Result<()> {
        write_atomic(&out_dir.join("manifest.json"), serde_json::to_string_pretty(&value)?.as_bytes())
    }

    fn load_model(&self, path: &Path) -> Result<Seq2SeqParams> {
        Seq2SeqParams::load(&self.input(path)?)
    }
}

/// Parses arguments and runs the command, returning its exit code.
/// Diagnostics go to stderr and results to stdout or the output files.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            for d in &outcome.diagnostics {
                eprintln!("error: {d}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let data_dir = cli.data_dir.as_deref();
    let run = Run { cfg: resolve_config(cli, data_dir)?, data_dir };
    match &cli.command {
        Command::Parse(a) => cmd_graphs(&run, a, |g, _| Ok(to_penman(g))),
        Command::Linearize(a) => cmd_graphs(&run, a, |g, opts| Ok(linearize(g, opts)?.to_string())),
        Command::Train(a) => cmd_train(&run, a, &cli.command),
        Command::Generate(a) => cmd_generate(&run, a, &cli.command),
        Command::Summarize(a) => cmd_summarize(&run, a, &cli.command),
        Command::GridSearch(a) => cmd_grid_search(&run, a, &cli.command),
        Command::Evaluate(a) => cmd_evaluate(&run, a, &cli.command),
    }
}

fn read_blocks(run: &Run, files: &[PathBuf]) -> Result<Vec<(PathBuf, AmrBlock)>> {
    let mut out = Vec::new();
    for f in files {
        let path = run.input(f)?;
        let text = fs::read_to_string(&path)?;
        out.extend(parse_blocks(&text).into_iter().map(|b| (path.clone(), b)));
    }
    Ok(out)
}

fn cmd_graphs(run: &Run, a: &FilesArgs, render: impl Fn(&AmrGraph, &LinearizeOptions) -> Result<String>) -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut outcome = Outcome::default();
    for (path, block) in read_blocks(run, &a.files)? {
        match block.graph().and_then(|g| render(&g, &run.cfg.linearize)) {
            Ok(line) => lines.push(line),
            Err(e) => outcome.diagnostics.push(format!("{}: block {}: {e}", path.display(), block.label())),
        }
    }
    match &a.out {
        Some(out) => write_atomic(out, &lines_to_bytes(&lines))?,
        None => outcome.stdout = String::from_utf8(lines_to_bytes(&lines)).expect("utf-8"),
    }
    Ok(outcome)
}

/// `(linearized graph, sentence)` pairs from an AMR release file or a
/// document corpus.
pub fn training_pairs(text: &str, jsonl: bool, opts: &LinearizeOptions) -> Result<Vec<(TokenSeq, TokenSeq)>> {
    let mut pairs = Vec::new();
    if jsonl {
        for (line, doc) in parse_documents(text, opts.lowercase) {
            let doc = doc.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
            for (sentence, graph) in &doc.sentences {
                pairs.push((linearize(graph, opts)?, sentence.clone()));
            }
            if let (Some(g), false) = (&doc.summary_graph, doc.summary.is_empty()) {
                pairs.push((linearize(g, opts)?, doc.summary_tokens()));
            }
        }
    } else {
        for block in parse_blocks(text) {
            let bad = |e: Error| Error::Data(format!("block {}: {e}", block.label()));
            let sentence = block.sentence().ok_or_else(|| Error::Data(format!("block {} has no ::snt", block.label())))?;
            let graph = block.graph().map_err(bad)?;
            pairs.push((linearize(&graph, opts).map_err(bad)?, tokenize(sentence, opts.lowercase)));
        }
    }
    Ok(pairs)
}

fn cmd_train(run: &Run, a: &TrainArgs, command: &Command) -> Result<Outcome> {
    let cfg = &run.cfg;
    let path = run.input(&a.corpus)?;
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let pairs = training_pairs(&fs::read_to_string(&path)?, jsonl, &cfg.linearize)?;
    if pairs.is_empty() {
        return Err(Error::Data(format!("{} contains no training pairs", path.display())));
    }
    let src_vocab = Vocab::build(pairs.iter().map(|p| &p.0), cfg.train.vocab_limit)?;
    let tgt_vocab = Vocab::build(pairs.iter().map(|p| &p.1), cfg.train.vocab_limit)?;
    let dims = Dims { embed: cfg.train.embed, hidden: cfg.train.hidden };
    let init = Seq2SeqParams::init(src_vocab, tgt_vocab, dims, cfg.seed)?;
    let report = train(&init, &pairs, &cfg.train_config())?;

    fs::create_dir_all(&a.out)?;
    run.echo(&a.out, command)?;
    write_atomic(&a.out.join("model.json"), report.params.to_checkpoint().as_bytes())?;
    let mut log = String::from("epoch\tloss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{}\t{l}", i + 1);
    }
    write_atomic(&a.out.join("losses.tsv"), log.as_bytes())?;
    run.manifest(
        &a.out,
        serde_json::json!({
            "command": "train",
            "pairs": pairs.len(),
            "src_vocab": report.params.src_vocab.len(),
            "tgt_vocab": report.params.tgt_vocab.len(),
            "outputs": { "model": "model.json", "losses": "losses.tsv", "config": "config.json" },
        }),
    )?;
    let last = report.epoch_losses.last().map_or("n/a".to_owned(), |l| format!("{l:.6}"));
    Ok(Outcome { stdout: format!("trained on {} pairs, final loss {last}\n", pairs.len()), diagnostics: Vec::new() })
}

/// Guidance source of the `generate` verb.
#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceSource {
    None,
    Oracle(PathBuf),
    Doc(PathBuf),
}

impl std::str::FromStr for GuidanceSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            _ if s == "none" => Ok(Self::None),
            Some(("oracle", p)) if !p.is_empty() => Ok(Self::Oracle(p.into())),
            Some(("doc", p)) if !p.is_empty() => Ok(Self::Doc(p.into())),
            _ => Err(Error::invalid(format!("guidance must be none, oracle:<path> or doc:<path>, got {s:?}"))),
        }
    }
}

fn cmd_generate(run: &Run, a: &GenerateArgs, command: &Command) -> Result<Outcome> {
    let cfg = &run.cfg;
    let guidance_src: GuidanceSource = a.guidance.parse()?;
    let model = run.load_model(&a.model)?;
    let amr_path = run.input(&a.amr)?;
    let blocks = parse_blocks(&fs::read_to_string(&amr_path)?);
    let settings = cfg.generation()?;

    // Per-graph guidance and its side document.
    let per_graph: Vec<(Guidance, Vec<(TokenSeq, AmrGraph)>)> = match &guidance_src {
        GuidanceSource::None => vec![(Guidance::None, Vec::new()); blocks.len()],
        GuidanceSource::Oracle(p) => {
            let text = run.read(p)?;
            let gold: Vec<&str> = text.lines().collect();
            if gold.len() != blocks.len() {
                return Err(Error::Data(format!("{} gold summaries for {} graphs", gold.len(), blocks.len())));
            }
            gold.iter().map(|g| (Guidance::Oracle { gold: vec![tokenize(g, cfg.linearize.lowercase)] }, Vec::new())).collect()
        }
        GuidanceSource::Doc(p) => {
            let docs = parse_documents(&run.read(p)?, cfg.linearize.lowercase)
                .into_iter()
                .map(|(line, d)| d.map_err(|e| Error::Data(format!("{}:{line}: {e}", p.display()))))
                .collect::<Result<Vec<Document>>>()?;
            if docs.len() != blocks.len() {
                return Err(Error::Data(format!("{} documents for {} graphs", docs.len(), blocks.len())));
            }
            if let Some(d) = docs.iter().find(|d| !d.has_parses()) {
                return Err(Error::Data(format!("document {:?} has no parses; doc guidance needs them", d.id)));
            }
            docs.into_iter().map(|d| (Guidance::LcsPruned { k: cfg.top_k }, d.sentences)).collect()
        }
    };

    let results: Vec<Result<TokenSeq>> = blocks
        .par_iter()
        .zip(per_graph.par_iter())
        .map(|(block, (guidance, doc))| realize(&model, &block.graph()?, doc, guidance, &settings))
        .collect();

    let mut outcome = Outcome::default();
    let mut hyps = Vec::with_capacity(blocks.len());
    for (block, r) in blocks.iter().zip(results) {
        match r {
            Ok(t) => hyps.push(t.to_string()),
            Err(e) => {
                outcome.diagnostics.push(format!("{}: block {}: {e}", amr_path.display(), block.label()));
                hyps.push(String::new());
            }
        }
    }
    fs::create_dir_all(&a.out)?;
    run.echo(&a.out, command)?;
    write_atomic(&a.out.join("hypotheses.txt"), &lines_to_bytes(&hyps))?;
    let refs: Option<Vec<String>> =
        blocks.iter().map(|b| b.sentence().map(|s| tokenize(s, cfg.linearize.lowercase).to_string())).collect();
    if let Some(refs) = &refs {
        write_atomic(&a.out.join("references.txt"), &lines_to_bytes(refs))?;
    }
    run.manifest(
        &a.out,
        serde_json::json!({
            "command": "generate",
            "count": hyps.len(),
            "failed": outcome.diagnostics.len(),
            "hypotheses": "hypotheses.txt",
            "references": refs.as_ref().map(|_| "references.txt"),
        }),
    )?;
    outcome.stdout = format!("generated {} sentences\n", hyps.len());
    Ok(outcome)
}

fn cmd_summarize(run: &Run, a: &SummarizeArgs, command: &Command) -> Result<Outcome> {
    let cfg = &run.cfg;
    if !matches!(a.guidance.as_str(), "none" | "doc" | "oracle") {
        return Err(Error::invalid(format!("guidance must be none, doc or oracle, got {:?}", a.guidance)));
    }
    let model = run.load_model(&a.model)?;
    let settings = cfg.generation()?;
    let docs = parse_documents(&run.read(&a.docs)?, cfg.linearize.lowercase);

    let results: Vec<Result<(AmrGraph, TokenSeq)>> = docs
        .par_iter()
        .map(|(_, doc)| {
            let doc = doc.as_ref().map_err(|e| Error::Data(e.to_string()))?;
            if !doc.has_parses() {
                return Err(Error::Data("document has no parses".into()));
            }
            let guidance = match a.guidance.as_str() {
                "none" => Guidance::None,
                "doc" => Guidance::LcsPruned { k: cfg.top_k },
                _ if doc.summary.is_empty() => return Err(Error::Data("oracle guidance needs a gold summary".into())),
                _ => Guidance::Oracle { gold: doc.summary.clone() },
            };
            summarize_document(&doc.sentences, &cfg.objective, &model, &guidance, &settings)
        })
        .collect();

    let mut outcome = Outcome::default();
    let (mut summaries, mut graphs, mut refs) = (Vec::new(), Vec::new(), Vec::new());
    for ((line, doc), r) in docs.iter().zip(results) {
        refs.push(doc.as_ref().map(|d| d.summary_tokens().to_string()).unwrap_or_default());
        match r {
            Ok((g, text)) => {
                summaries.push(text.to_string());
                graphs.push(to_penman(&g));
            }
            Err(e) => {
                let label = doc.as_ref().map_or_else(|_| format!("line {line}"), |d| format!("document {}", d.id));
                outcome.diagnostics.push(format!("{}: {label}: {e}", a.docs.display()));
                summaries.push(String::new());
                graphs.push(String::new());
            }
        }
    }
    fs::create_dir_all(&a.out)?;
    run.echo(&a.out, command)?;
    write_atomic(&a.out.join("summaries.txt"), &lines_to_bytes(&summaries))?;
    write_atomic(&a.out.join("summary_graphs.txt"), &lines_to_bytes(&graphs))?;
    write_atomic(&a.out.join("references.txt"), &lines_to_bytes(&refs))?;
    run.manifest(
        &a.out,
        serde_json::json!({
            "command": "summarize",
            "count": summaries.len(),
            "failed": outcome.diagnostics.len(),
            "hypotheses": "summaries.txt",
            "references": "references.txt",
            "graphs": "summary_graphs.txt",
        }),
    )?;
    outcome.stdout = format!("summarized {} documents\n", summaries.len());
    Ok(outcome)
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub psi: f64,
    pub theta: f64,
    pub top_k: usize,
    pub metrics: MetricReport,
}

/// Realizes every dev document's summary graph under each grid cell and
/// returns the rows sorted by ROUGE-2 F1, best first (grid order on ties),
/// together with the unguided baseline.
pub fn grid_search(
    model: &Seq2SeqParams,
    docs: &[Document],
    cfg: &RunConfig,
) -> Result<(Vec<GridRow>, MetricReport)> {
    let g = &cfg.grid;
    if g.psi.is_empty() || g.theta.is_empty() || g.top_k.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    for d in docs {
        if d.summary_graph.is_none() || d.summary.is_empty() || !d.has_parses() {
            return Err(Error::Data(format!("dev document {:?} needs parses, a summary and a summary graph", d.id)));
        }
    }
    if docs.is_empty() {
        return Err(Error::Data("dev corpus is empty".into()));
    }
    let refs: Vec<TokenSeq> = docs.iter().map(Document::summary_tokens).collect();
    let evaluate = |psi: f64, theta: f64, guidance: &(dyn Fn(&Document) -> Guidance + Sync)| -> Result<MetricReport> {
        let mut c = cfg.clone();
        c.psi = psi;
        c.theta = theta;
        let settings = c.generation()?;
        let hyps = docs
            .par_iter()
            .map(|d| realize(model, d.summary_graph.as_ref().expect("checked"), &d.sentences, &guidance(d), &settings))
            .collect::<Result<Vec<_>>>()?;
        MetricReport::compute(&hyps, &refs)
    };
    let baseline = evaluate(cfg.psi, cfg.theta, &|_| Guidance::None)?;
    let mut rows = Vec::new();
    for &psi in &g.psi {
        for &theta in &g.theta {
            for &k in &g.top_k {
                let metrics = evaluate(psi, theta, &|_| Guidance::LcsPruned { k })?;
                rows.push(GridRow { psi, theta, top_k: k, metrics });
            }
        }
    }
    rows.sort_by(|a, b| b.metrics.rouge2.f1.total_cmp(&a.metrics.rouge2.f1));
    Ok((rows, baseline))
}

fn format_grid(rows: &[GridRow], baseline: &MetricReport) -> String {
    let mut out = format!("{:>6} {:>6} {:>5} {:>8} {:>8} {:>8} {:>8}\n", "psi", "theta", "top_k", "BLEU", "R1-F", "R2-F", "RL-F");
    let line = |out: &mut String, psi: String, theta: String, k: String, m: &MetricReport| {
        let _ = writeln!(
            out,
            "{psi:>6} {theta:>6} {k:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            m.bleu, m.rouge1.f1, m.rouge2.f1, m.rouge_l.f1
        );
    };
    for r in rows {
        line(&mut out, format!("{}", r.psi), format!("{}", r.theta), r.top_k.to_string(), &r.metrics);
    }
    line(&mut out, "none".into(), "-".into(), "-".into(), baseline);
    out
}

fn cmd_grid_search(run: &Run, a: &GridArgs, command: &Command) -> Result<Outcome> {
    let model = run.load_model(&a.model)?;
    let docs = parse_documents(&run.read(&a.docs)?, run.cfg.linearize.lowercase)
        .into_iter()
        .map(|(line, d)| d.map_err(|e| Error::Data(format!("{}:{line}: {e}", a.docs.display()))))
        .collect::<Result<Vec<_>>>()?;
    let (rows, baseline) = grid_search(&model, &docs, &run.cfg)?;
    let table = format_grid(&rows, &baseline);
    fs::create_dir_all(&a.out)?;
    run.echo(&a.out, command)?;
    write_atomic(&a.out.join("grid.txt"), table.as_bytes())?;
    let json = serde_json::json!({ "rows": rows, "unguided": baseline });
    write_atomic(&a.out.join("grid.json"), serde_json::to_string_pretty(&json)?.as_bytes())?;
    run.manifest(&a.out, serde_json::json!({ "command": "grid-search", "cells": rows.len(), "table": "grid.txt", "results": "grid.json" }))?;
    Ok(Outcome { stdout: table, diagnostics: Vec::new() })
}

fn cmd_evaluate(run: &Run, a: &EvaluateArgs, command: &Command) -> Result<Outcome> {
    let hyp_text = run.read(&a.hyp)?;
    let ref_text = run.read(&a.reference)?;
    let hyps: Vec<TokenSeq> = hyp_text.lines().map(TokenSeq::from_text).collect();
    let refs: Vec<TokenSeq> = ref_text.lines().map(TokenSeq::from_text).collect();
    if hyps.len() != refs.len() {
        return Err(Error::Data(format!("{} hypothesis lines but {} reference lines", hyps.len(), refs.len())));
    }
    let report = MetricReport::compute(&hyps, &refs)?;
    let table = report.to_string();
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        run.echo(out, command)?;
        write_atomic(&out.join("metrics.json"), report.to_json().as_bytes())?;
        write_atomic(&out.join("metrics.txt"), table.as_bytes())?;
    }
    Ok(Outcome { stdout: table, diagnostics: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guidance_source_parsing() {
        assert_eq!("none".parse::<GuidanceSource>().unwrap(), GuidanceSource::None);
        assert_eq!("oracle:a/b.txt".parse::<GuidanceSource>().unwrap(), GuidanceSource::Oracle("a/b.txt".into()));
        assert_eq!("doc:x".parse::<GuidanceSource>().unwrap(), GuidanceSource::Doc("x".into()));
        assert!("doc:".parse::<GuidanceSource>().is_err());
        assert!("lcs".parse::<GuidanceSource>().is_err());
    }

    #[test]
    fn config_layers() {
        let cfg = RunConfig::from_toml("psi = 0.5\n[train]\nepochs = 3\n[linearize]\nlowercase = false\n").unwrap();
        assert_eq!(cfg.psi, 0.5);
        assert_eq!(cfg.train.epochs, 3);
        assert!(!cfg.linearize.lowercase);
        assert_eq!(cfg.theta, DEFAULT_THETA);
        assert!(RunConfig::from_toml("unknown = 1").is_err());
        let mut bad = RunConfig::default();
        bad.psi = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_USAGE);
        assert_eq!(exit_code(&Error::NonFiniteLoss { epoch: 0, batch: 0 }.at_stage("train")), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Data("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    }
}
