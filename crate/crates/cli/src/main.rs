//! Command-line front end: preprocess raw text, train embeddings, evaluate
//! analogies, inspect neighbors, convert model files.
//!
//! Exit codes: 0 success, 1 runtime/data error, 2 usage or configuration
//! error.

mod config;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wordvec::corpus::{preprocess, Alphabet, PreprocessConfig};
use wordvec::eval::{
    evaluate, nearest_neighbors, parse_analogy_file, EvalConfig, MacroArea, MacroMap, Metric,
    OovMode,
};
use wordvec::model::{EmbeddingModel, ModelError};
use wordvec::trainer::{
    train_with_observer, TextCorpus, TrainError, TrainingConfig, TrainingMode, WindowPolicy,
};
use wordvec::vocab::Vocabulary;

use config::{echo, resolve, FileConfig};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }

    fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: 1,
            msg: msg.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wordvec",
    about = "Train and evaluate word embeddings (skip-gram / CBOW with negative sampling)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw text into one tokenized sentence per line
    Preprocess(PreprocessCmd),
    /// Train a model over a text corpus
    Train(TrainCmd),
    /// Evaluate a model on an analogy test set
    Eval(EvalCmd),
    /// Print the nearest neighbors of a word
    Nn(NnCmd),
    /// Convert or normalize a saved model
    Export(ExportCmd),
}

#[derive(Args, Debug, Clone)]
struct PreprocessOpts {
    /// Replacement token for purely numeric tokens
    #[arg(long)]
    num_token: Option<String>,
    /// Lowercase text before cleaning (true/false)
    #[arg(long)]
    lowercase: Option<bool>,
    /// Sentence separator characters, e.g. ".?!"
    #[arg(long)]
    separators: Option<String>,
    /// Extra word characters kept beyond ASCII letters and Italian accents
    #[arg(long)]
    alphabet_extra: Option<String>,
}

impl PreprocessOpts {
    fn build(&self, file: &FileConfig) -> Result<PreprocessConfig, CliError> {
        let defaults = PreprocessConfig::default();
        let num_token = resolve(
            self.num_token.clone(),
            file.get("num_token").map(str::to_string),
            defaults.num_token,
        );
        let lowercase = resolve(self.lowercase, file.parsed_bool("lowercase")?, true);
        let separators: String = resolve(
            self.separators.clone(),
            file.get("separators").map(str::to_string),
            ".?!".to_string(),
        );
        if separators.is_empty() {
            return Err(CliError::usage("separators: must not be empty"));
        }
        let extra = resolve(
            self.alphabet_extra.clone(),
            file.get("alphabet_extra").map(str::to_string),
            String::new(),
        );
        let mut alphabet = Alphabet::italian();
        if !extra.is_empty() {
            let mut chars: Vec<char> = "abcdefghijklmnopqrstuvwxyz"
                .chars()
                .chain("ABCDEFGHIJKLMNOPQRSTUVWXYZ".chars())
                .chain("àèéìòùÀÈÉÌÒÙ".chars())
                .collect();
            chars.extend(extra.chars());
            alphabet = Alphabet::from_chars(chars);
        }
        echo("num_token", &num_token);
        echo("lowercase", lowercase);
        echo("separators", &separators);
        echo("alphabet_extra", &extra);
        Ok(PreprocessConfig {
            sentence_separators: separators.chars().collect(),
            num_token,
            lowercase,
            alphabet,
        })
    }
}

#[derive(Args)]
struct PreprocessCmd {
    /// Input text files; standard input when empty
    inputs: Vec<PathBuf>,
    /// Write cleaned sentences here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pre: PreprocessOpts,
}

#[derive(Args)]
struct TrainCmd {
    /// Corpus text files
    corpus: Vec<PathBuf>,
    /// Output model path (text format)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vocabulary sidecar path (default: model path with .vocab extension)
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Subsampling threshold
    #[arg(long)]
    sample: Option<f64>,
    #[arg(long)]
    lr_initial: Option<f64>,
    #[arg(long)]
    lr_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Average (true) or sum (false) CBOW context vectors
    #[arg(long)]
    cbow_mean: Option<bool>,
    #[arg(long)]
    window_policy: Option<WindowPolicyArg>,
    /// Shuffle sentence order per epoch (loads the corpus into memory)
    #[arg(long)]
    shuffle: Option<bool>,
    #[arg(long)]
    table_size: Option<usize>,
    /// Drop words rarer than this absolute count
    #[arg(long)]
    min_count: Option<u64>,
    /// Save `model.epoch<N>.txt` every N epochs (0 = off)
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pre: PreprocessOpts,
}

#[derive(Args)]
struct EvalCmd {
    /// Model file (text format, or binary with --binary)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Analogy test file
    #[arg(long)]
    analogies: Option<PathBuf>,
    #[arg(long)]
    metric: Option<MetricArg>,
    #[arg(long)]
    oov_mode: Option<OovArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Remove the three query words from the candidates
    #[arg(long)]
    exclude_inputs: Option<bool>,
    /// Shift cosines to the unit interval inside the multiplicative metric
    #[arg(long)]
    cosmul_shift: Option<bool>,
    /// Category to macro-area assignment file (`category = semantic|syntactic`)
    #[arg(long)]
    macro_map: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model file is in the binary format
    #[arg(long)]
    binary: Option<bool>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pre: PreprocessOpts,
}

#[derive(Args)]
struct NnCmd {
    /// Query word
    word: String,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of neighbors
    #[arg(short, long)]
    k: Option<usize>,
    /// Model file is in the binary format
    #[arg(long)]
    binary: Option<bool>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExportCmd {
    /// Input model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output model path (text format)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input model is in the binary format
    #[arg(long)]
    binary: Option<bool>,
    /// Row-normalize vectors before writing
    #[arg(long)]
    normalize: Option<bool>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Skipgram,
    Cbow,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum WindowPolicyArg {
    Dynamic,
    Fixed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum MetricArg {
    Cosadd,
    Cosmul,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum OovArg {
    CountAsError,
    ExecutableOnly,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum FormatArg {
    Table,
    Csv,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(cmd) => cmd_preprocess(cmd),
        Command::Train(cmd) => cmd_train(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Nn(cmd) => cmd_nn(cmd),
        Command::Export(cmd) => cmd_export(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn require_existing(paths: &[PathBuf]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::usage(format!(
                "input path does not exist: {}",
                p.display()
            )));
        }
    }
    Ok(())
}

fn cmd_preprocess(cmd: PreprocessCmd) -> Result<(), CliError> {
    let file = load_file_config(&cmd.config)?;
    let pcfg = cmd.pre.build(&file)?;
    require_existing(&cmd.inputs)?;

    let mut out: Box<dyn Write> = match &cmd.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::data(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    };

    let mut emit = |reader: &mut dyn BufRead, name: &str| -> Result<(), CliError> {
        for sent in preprocess(reader, &pcfg) {
            let sent = sent.map_err(|e| CliError::data(format!("{name}: {e}")))?;
            writeln!(out, "{}", sent.tokens.join(" "))
                .map_err(|e| CliError::data(format!("write failed: {e}")))?;
        }
        Ok(())
    };

    if cmd.inputs.is_empty() {
        let stdin = std::io::stdin();
        emit(&mut stdin.lock(), "<stdin>")?;
    } else {
        for path in &cmd.inputs {
            let f = File::open(path)
                .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
            emit(&mut BufReader::new(f), &path.display().to_string())?;
        }
    }
    Ok(())
}

fn map_train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Config { field, msg } => CliError::usage(format!("{field}: {msg}")),
        TrainError::Vocab(wordvec::vocab::VocabError::TableTooSmall { .. }) => {
            CliError::usage(e.to_string())
        }
        other => CliError::data(other.to_string()),
    }
}

fn checkpoint_path(out: &Path, epoch: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());
    let name = match out.extension() {
        Some(ext) => format!("{stem}.epoch{epoch}.{}", ext.to_string_lossy()),
        None => format!("{stem}.epoch{epoch}"),
    };
    out.with_file_name(name)
}

fn cmd_train(cmd: TrainCmd) -> Result<(), CliError> {
    let file = load_file_config(&cmd.config)?;

    let corpus_paths: Vec<PathBuf> = if cmd.corpus.is_empty() {
        file.get("corpus")
            .map(|v| v.split(',').map(PathBuf::from).collect())
            .unwrap_or_default()
    } else {
        cmd.corpus.clone()
    };
    if corpus_paths.is_empty() {
        return Err(CliError::usage("no corpus given (argument or `corpus` key)"));
    }
    let out = resolve(
        cmd.out.clone(),
        file.get("model_out").map(PathBuf::from),
        PathBuf::from("model.txt"),
    );
    let vocab_out = resolve(
        cmd.vocab_out.clone(),
        file.get("vocab_out").map(PathBuf::from),
        out.with_extension("vocab"),
    );
    let min_count = resolve(cmd.min_count, file.parsed("min_count")?, 5u64);
    let checkpoint_every = resolve(cmd.checkpoint_every, file.parsed("checkpoint_every")?, 0);

    let mode = match resolve(
        cmd.mode,
        match file.get("mode") {
            None => None,
            Some("skipgram") => Some(ModeArg::Skipgram),
            Some("cbow") => Some(ModeArg::Cbow),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key `mode`: expected skipgram|cbow, got `{other}`"
                )))
            }
        },
        ModeArg::Skipgram,
    ) {
        ModeArg::Skipgram => TrainingMode::SkipGram,
        ModeArg::Cbow => TrainingMode::Cbow,
    };
    let window_policy = match resolve(
        cmd.window_policy,
        match file.get("window_policy") {
            None => None,
            Some("dynamic") => Some(WindowPolicyArg::Dynamic),
            Some("fixed") => Some(WindowPolicyArg::Fixed),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key `window_policy`: expected dynamic|fixed, got `{other}`"
                )))
            }
        },
        WindowPolicyArg::Dynamic,
    ) {
        WindowPolicyArg::Dynamic => WindowPolicy::Dynamic,
        WindowPolicyArg::Fixed => WindowPolicy::Fixed,
    };

    let defaults = TrainingConfig::default();
    let tcfg = TrainingConfig {
        mode,
        window: resolve(cmd.window, file.parsed("window")?, defaults.window),
        negatives: resolve(cmd.negatives, file.parsed("negatives")?, defaults.negatives),
        dim: resolve(cmd.dim, file.parsed("dim")?, defaults.dim),
        epochs: resolve(cmd.epochs, file.parsed("epochs")?, defaults.epochs),
        s: resolve(cmd.sample, file.parsed("sample")?, defaults.s),
        lr_initial: resolve(cmd.lr_initial, file.parsed("lr_initial")?, defaults.lr_initial),
        lr_floor: resolve(cmd.lr_floor, file.parsed("lr_floor")?, defaults.lr_floor),
        seed: resolve(cmd.seed, file.parsed("seed")?, defaults.seed),
        workers: resolve(cmd.workers, file.parsed("workers")?, defaults.workers),
        cbow_mean: resolve(cmd.cbow_mean, file.parsed_bool("cbow_mean")?, defaults.cbow_mean),
        window_policy,
        shuffle: resolve(cmd.shuffle, file.parsed_bool("shuffle")?, defaults.shuffle),
        table_size: resolve(cmd.table_size, file.parsed("table_size")?, defaults.table_size),
    };
    tcfg.validate().map_err(map_train_error)?;

    let pcfg = cmd.pre.build(&file)?;
    for (key, value) in [
        ("corpus", corpus_paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(",")),
        ("model_out", out.display().to_string()),
        ("vocab_out", vocab_out.display().to_string()),
        ("min_count", min_count.to_string()),
        ("mode", format!("{:?}", tcfg.mode).to_lowercase()),
        ("window", tcfg.window.to_string()),
        ("negatives", tcfg.negatives.to_string()),
        ("dim", tcfg.dim.to_string()),
        ("epochs", tcfg.epochs.to_string()),
        ("sample", tcfg.s.to_string()),
        ("lr_initial", tcfg.lr_initial.to_string()),
        ("lr_floor", tcfg.lr_floor.to_string()),
        ("seed", tcfg.seed.to_string()),
        ("workers", tcfg.workers.to_string()),
        ("cbow_mean", tcfg.cbow_mean.to_string()),
        ("window_policy", format!("{:?}", tcfg.window_policy).to_lowercase()),
        ("shuffle", tcfg.shuffle.to_string()),
        ("table_size", tcfg.table_size.to_string()),
        ("checkpoint_every", checkpoint_every.to_string()),
    ] {
        echo(key, value);
    }

    require_existing(&corpus_paths)?;

    // counting pass, streamed
    let mut counts: HashMap<String, u64> = HashMap::new();
    for path in &corpus_paths {
        let f = File::open(path)
            .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
        for sent in preprocess(BufReader::new(f), &pcfg) {
            let sent = sent.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            for tok in sent.tokens {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let vocab = Arc::new(
        Vocabulary::from_counts(counts, min_count)
            .map_err(|e| CliError::data(e.to_string()))?,
    );
    eprintln!(
        "vocabulary: {} words, {} tokens retained",
        vocab.len(),
        vocab.total_count()
    );
    vocab
        .save(&vocab_out)
        .map_err(|e| CliError::data(e.to_string()))?;

    let corpus = TextCorpus::new(corpus_paths, pcfg);
    let mut checkpoint_err: Option<CliError> = None;
    let model = train_with_observer(&corpus, vocab, &tcfg, |stats, model| {
        eprintln!(
            "epoch {} loss {:.4} lr {:.6} words/sec {:.0}",
            stats.epoch,
            stats.mean_loss,
            stats.lr,
            stats.words_per_sec()
        );
        if checkpoint_every > 0 && stats.epoch % checkpoint_every == 0 && checkpoint_err.is_none()
        {
            let path = checkpoint_path(&out, stats.epoch);
            if let Err(e) = model.save_text(&path) {
                checkpoint_err = Some(CliError::data(e.to_string()));
            }
        }
    })
    .map_err(map_train_error)?;
    if let Some(e) = checkpoint_err {
        return Err(e);
    }

    model
        .save_text(&out)
        .map_err(|e| CliError::data(e.to_string()))?;
    eprintln!("model written to {}", out.display());
    Ok(())
}

fn load_model(path: &Path, binary: bool) -> Result<EmbeddingModel, CliError> {
    let loaded = if binary {
        EmbeddingModel::load_binary(path, None)
    } else {
        EmbeddingModel::load_text(path, None)
    };
    loaded.map_err(|e| match e {
        ModelError::Io { .. } | ModelError::Parse { .. } => CliError::usage(e.to_string()),
        other => CliError::data(other.to_string()),
    })
}

fn parse_macro_map(path: &Path) -> Result<MacroMap, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut map = MacroMap::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "{}:{}: expected `category = semantic|syntactic`",
                path.display(),
                i + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "syntactic_prefixes" {
            map.syntactic_prefixes = value.split(',').map(|s| s.trim().to_string()).collect();
            continue;
        }
        let area = match value {
            "semantic" => MacroArea::Semantic,
            "syntactic" => MacroArea::Syntactic,
            other => {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown macro-area `{other}`",
                    path.display(),
                    i + 1
                )))
            }
        };
        map.explicit.insert(key.to_string(), area);
    }
    Ok(map)
}

fn cmd_eval(cmd: EvalCmd) -> Result<(), CliError> {
    let file = load_file_config(&cmd.config)?;
    let model_path = resolve(cmd.model.clone(), file.get("model_out").map(PathBuf::from), PathBuf::new());
    if model_path.as_os_str().is_empty() {
        return Err(CliError::usage("no model given (--model or `model_out` key)"));
    }
    let analogy_path = resolve(
        cmd.analogies.clone(),
        file.get("analogies").map(PathBuf::from),
        PathBuf::new(),
    );
    if analogy_path.as_os_str().is_empty() {
        return Err(CliError::usage(
            "no analogy file given (--analogies or `analogies` key)",
        ));
    }
    let binary = resolve(cmd.binary, file.parsed_bool("binary")?, false);
    let metric = resolve(
        cmd.metric,
        match file.get("metric") {
            None => None,
            Some("cosadd") => Some(MetricArg::Cosadd),
            Some("cosmul") => Some(MetricArg::Cosmul),
            Some("both") => Some(MetricArg::Both),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key `metric`: expected cosadd|cosmul|both, got `{other}`"
                )))
            }
        },
        MetricArg::Both,
    );
    let oov_mode = resolve(
        cmd.oov_mode,
        match file.get("oov_mode") {
            None => None,
            Some("count-as-error") | Some("count_as_error") => Some(OovArg::CountAsError),
            Some("executable-only") | Some("executable_only") => Some(OovArg::ExecutableOnly),
            Some("both") => Some(OovArg::Both),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key `oov_mode`: expected count-as-error|executable-only|both, got `{other}`"
                )))
            }
        },
        OovArg::ExecutableOnly,
    );
    let format = resolve(
        cmd.format,
        match file.get("format") {
            None => None,
            Some("table") => Some(FormatArg::Table),
            Some("csv") => Some(FormatArg::Csv),
            Some("both") => Some(FormatArg::Both),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key `format`: expected table|csv|both, got `{other}`"
                )))
            }
        },
        FormatArg::Table,
    );
    let epsilon = resolve(cmd.epsilon, file.parsed("epsilon")?, 1e-6);
    let exclude_inputs = resolve(cmd.exclude_inputs, file.parsed_bool("exclude_inputs")?, true);
    let cosmul_shift = resolve(cmd.cosmul_shift, file.parsed_bool("cosmul_shift")?, true);
    let report_out = cmd
        .out
        .clone()
        .or_else(|| file.get("report_out").map(PathBuf::from));
    let macro_map_path = cmd
        .macro_map
        .clone()
        .or_else(|| file.get("macro_map").map(PathBuf::from));

    echo("model", model_path.display());
    echo("analogies", analogy_path.display());
    echo("metric", format!("{metric:?}").to_lowercase());
    echo("oov_mode", format!("{oov_mode:?}").to_lowercase());
    echo("epsilon", epsilon);
    echo("exclude_inputs", exclude_inputs);
    echo("cosmul_shift", cosmul_shift);
    let pcfg = cmd.pre.build(&file)?;

    let macro_map = match &macro_map_path {
        Some(p) => parse_macro_map(p)?,
        None => MacroMap::default(),
    };
    let model = load_model(&model_path, binary)?;
    let emb = model
        .normalized()
        .map_err(|e| CliError::data(e.to_string()))?;
    let testset = parse_analogy_file(&analogy_path, &macro_map, &pcfg)
        .map_err(|e| CliError::usage(e.to_string()))?;

    let metrics: Vec<Metric> = match metric {
        MetricArg::Cosadd => vec![Metric::CosAdd],
        MetricArg::Cosmul => vec![Metric::CosMul],
        MetricArg::Both => vec![Metric::CosAdd, Metric::CosMul],
    };
    let modes: Vec<OovMode> = match oov_mode {
        OovArg::CountAsError => vec![OovMode::CountAsError],
        OovArg::ExecutableOnly => vec![OovMode::ExecutableOnly],
        OovArg::Both => vec![OovMode::ExecutableOnly, OovMode::CountAsError],
    };

    let mut rendered = String::new();
    for metric in &metrics {
        for mode in &modes {
            let cfg = EvalConfig {
                metric: *metric,
                epsilon,
                oov_mode: *mode,
                exclude_inputs,
                cosmul_shift,
            };
            cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
            let report = evaluate(&emb, &testset, &cfg);
            if matches!(format, FormatArg::Table | FormatArg::Both) {
                rendered.push_str(&report.to_table());
                rendered.push('\n');
            }
            if matches!(format, FormatArg::Csv | FormatArg::Both) {
                rendered.push_str(&report.to_csv());
                rendered.push('\n');
            }
        }
    }

    match report_out {
        Some(p) => std::fs::write(&p, rendered)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn cmd_nn(cmd: NnCmd) -> Result<(), CliError> {
    let file = load_file_config(&cmd.config)?;
    let model_path = resolve(cmd.model.clone(), file.get("model_out").map(PathBuf::from), PathBuf::new());
    if model_path.as_os_str().is_empty() {
        return Err(CliError::usage("no model given (--model or `model_out` key)"));
    }
    let k = resolve(cmd.k, file.parsed("topk")?, 10usize);
    let binary = resolve(cmd.binary, file.parsed_bool("binary")?, false);
    echo("model", model_path.display());
    echo("topk", k);

    let model = load_model(&model_path, binary)?;
    let emb = model
        .normalized()
        .map_err(|e| CliError::data(e.to_string()))?;
    let neighbors =
        nearest_neighbors(&emb, &cmd.word, k).map_err(|e| CliError::data(e.to_string()))?;
    let mut stdout = BufWriter::new(std::io::stdout());
    for (word, cos) in neighbors {
        writeln!(stdout, "{word}\t{cos:.6}")
            .map_err(|e| CliError::data(format!("write failed: {e}")))?;
    }
    Ok(())
}

fn cmd_export(cmd: ExportCmd) -> Result<(), CliError> {
    let file = load_file_config(&cmd.config)?;
    let model_path = resolve(cmd.model.clone(), file.get("model_out").map(PathBuf::from), PathBuf::new());
    if model_path.as_os_str().is_empty() {
        return Err(CliError::usage("no model given (--model or `model_out` key)"));
    }
    let out = cmd
        .out
        .clone()
        .or_else(|| file.get("report_out").map(PathBuf::from))
        .ok_or_else(|| CliError::usage("no output path given (--out)"))?;
    let binary = resolve(cmd.binary, file.parsed_bool("binary")?, false);
    let normalize = resolve(cmd.normalize, file.parsed_bool("normalize")?, false);
    echo("model", model_path.display());
    echo("out", out.display());
    echo("binary", binary);
    echo("normalize", normalize);

    let model = load_model(&model_path, binary)?;
    let model = if normalize {
        let dim = model.dim();
        let emb = model
            .normalized()
            .map_err(|e| CliError::data(e.to_string()))?;
        let (vocab, rows) = emb.into_parts();
        let n = vocab.len();
        EmbeddingModel::from_parts(vocab, rows, wordvec::model::Matrix::zeros(n, dim))
    } else {
        model
    };
    model
        .save_text(&out)
        .map_err(|e| CliError::data(e.to_string()))?;
    Ok(())
}
