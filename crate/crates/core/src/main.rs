use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use genderprobe::classifier::{
    self, majority_baseline, MlpParams, MlpShape, Nonlinearity, TrainSpec,
};
use genderprobe::corpus::{self, ConditionKind};
use genderprobe::embeddings::{self, build_vocab, SgnsConfig, TokenStream};
use genderprobe::error::{Error, Result};
use genderprobe::lexicon::{extract_gender_lexicon, GenderLabel, GenderLexicon};
use genderprobe::pipeline::{run_pipeline, ExperimentConfig, LangPaths};
use genderprobe::report::{render_report, ExperimentReport, ReportFormat};
use genderprobe::synth::{generate_to_writer, write_concepts, SynthSpec};
use genderprobe::ultradense::{build_pair_sets, gender_score, train_densifier, DensifierConfig};

/// Train word embeddings under four lemmatization conditions and probe
/// them for grammatical gender.
#[derive(Parser)]
#[command(name = "genderprobe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gendered corpus with ground truth.
    Synth(SynthArgs),
    /// Rewrite a tagged corpus under one lemmatization condition.
    Condition(ConditionArgs),
    /// Train skip-gram embeddings from a token stream.
    Embed(EmbedArgs),
    /// Extract a lemma→gender lexicon from a tagged corpus.
    Lexicon(LexiconArgs),
    /// Train a gender classifier on embeddings and a lexicon.
    Classify(ClassifyArgs),
    /// Learn the orthogonal gender dimension from labeled lemmas.
    Densify(DensifyArgs),
    /// Evaluate a model snapshot on labeled lemmas.
    Evaluate(EvaluateArgs),
    /// Render the report of a finished pipeline run.
    Report(ReportArgs),
    /// Run the full pipeline from a configuration file.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec file ([synth] section).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for corpus.tsv, truth.tsv and concepts.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Fraction of noun lemmas reserved as evaluation concepts.
    #[arg(long, default_value_t = 0.5)]
    eval_fraction: f64,
    /// Override the spec file's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ConditionArgs {
    /// Tagged corpus file.
    #[arg(long = "in")]
    input: PathBuf,
    /// forms, lemmata, nouns or not_nouns.
    #[arg(long)]
    kind: String,
    /// Output token stream (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Token stream: space-separated tokens, one sentence per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    initial_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    subsample: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Concurrent updates with tolerated lost writes when > 1.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Force single-worker reproducible training.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct LexiconArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// A lemma enters with strictly more than this many gendered tokens.
    #[arg(long, default_value_t = 50)]
    min_occurrences: u64,
    /// File of lemmas (first tab column) to exclude, e.g. an evaluation set.
    #[arg(long)]
    exclude: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Vector file from `embed`.
    #[arg(long)]
    vectors: PathBuf,
    /// Training lexicon (`lemma\tgender\tsupport`).
    #[arg(long)]
    train: PathBuf,
    /// Dev set (`lemma\tgender...`) used for snapshot selection.
    #[arg(long)]
    dev: PathBuf,
    /// Model snapshot output.
    #[arg(long)]
    out: PathBuf,
    /// Sweep the full depth × hidden × nonlinearity grid instead of a
    /// single configuration.
    #[arg(long)]
    sweep: bool,
    /// Sweep log output (tab-separated).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value = "tanh")]
    nonlinearity: String,
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct DensifyArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Labeled lemmas (`lemma\tgender...`) whose pairs drive training.
    #[arg(long)]
    pairs_from: PathBuf,
    /// Transform output file.
    #[arg(long)]
    out: PathBuf,
    /// Labeled lemmas to score after training.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Score dump (`lemma\tscore\tgold`).
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Model snapshot from `classify`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled test lemmas (`lemma\tgender...`).
    #[arg(long)]
    test: PathBuf,
    /// Per-lemma prediction dump.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Pipeline output directory.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    language: String,
    /// tsv, json or table.
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Restrict to these languages.
    #[arg(long)]
    language: Vec<String>,
    /// Restrict to these conditions (partial runs skip report assembly).
    #[arg(long)]
    condition: Vec<String>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Force deterministic single-worker embedding training.
    #[arg(long)]
    deterministic: bool,
    /// Report format printed per language: tsv, json or table.
    #[arg(long, default_value = "table")]
    format: String,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit cleanly; anything
            // else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(e.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Condition(args) => cmd_condition(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Lexicon(args) => cmd_lexicon(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Densify(args) => cmd_densify(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::load(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let corpus_path = args.out.join("corpus.tsv");
    let mut w = create(&corpus_path)?;
    let truth = generate_to_writer(&spec, &mut w)?;
    w.flush().map_err(|e| Error::io(&corpus_path, e))?;

    let truth_path = args.out.join("truth.tsv");
    let mut w = create(&truth_path)?;
    truth.to_writer(&mut w).map_err(|e| Error::io(&truth_path, e))?;

    let concepts_path = args.out.join("concepts.tsv");
    let mut w = create(&concepts_path)?;
    let n = write_concepts(&truth, args.eval_fraction, spec.seed, &mut w)?;
    log::info!(
        "wrote {} sentences, {} noun lemmas, {} evaluation concepts to {}",
        spec.n_sentences,
        truth.genders.len(),
        n,
        args.out.display()
    );
    Ok(())
}

fn cmd_condition(args: ConditionArgs) -> Result<()> {
    let kind = ConditionKind::parse(&args.kind)?;
    let corpus = corpus::load_tagged_corpus(&args.input)?;
    match args.out {
        Some(path) => {
            let mut w = create(&path)?;
            corpus::write_condition_stream(&corpus, kind, &mut w).map_err(|e| Error::io(&path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            corpus::write_condition_stream(&corpus, kind, &mut w)
                .map_err(|e| Error::io("stdout", e))
        }
    }
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let vocab = build_vocab(
        text.lines().flat_map(|l| l.split_whitespace()),
        args.min_count,
    );
    let stream = TokenStream::from_sentences(text.lines().map(|l| l.split_whitespace()), &vocab);
    drop(text);
    let config = SgnsConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        initial_step: args.initial_step,
        subsample_threshold: args.subsample,
        seed: args.seed,
        workers: if args.deterministic { 1 } else { args.workers },
    };
    let table = embeddings::train_sgns(&stream, &vocab, &config)?;
    let mut w = create(&args.out)?;
    embeddings::save_vectors(&table, &mut w)?;
    log::info!(
        "trained {} vectors of dimension {} from {} tokens",
        table.len(),
        table.dim(),
        stream.token_count()
    );
    Ok(())
}

fn read_lemma_set(path: &PathBuf) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').next().unwrap().trim().to_lowercase())
        .collect())
}

/// Labeled lemmas from any tab-separated file whose first two columns are
/// lemma and gender (lexicon files, evaluation sets, score dumps).
fn read_labeled(path: &PathBuf) -> Result<Vec<(String, GenderLabel)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let lemma = fields.next().unwrap().trim().to_lowercase();
        let gender = fields
            .next()
            .and_then(GenderLabel::from_feature_value)
            .ok_or_else(|| {
                Error::parse(
                    &path.display().to_string(),
                    idx + 1,
                    "expected `lemma\\tgender`",
                )
            })?;
        items.push((lemma, gender));
    }
    Ok(items)
}

fn cmd_lexicon(args: LexiconArgs) -> Result<()> {
    let corpus = corpus::load_tagged_corpus(&args.corpus)?;
    let mut lexicon = extract_gender_lexicon(&corpus, args.min_occurrences);
    if let Some(exclude) = &args.exclude {
        let lemmas = read_lemma_set(exclude)?;
        lexicon = genderprobe::lexicon::exclude_eval_from_train(&lexicon, &lemmas);
    }
    let mut w = create(&args.out)?;
    lexicon.to_writer(&mut w).map_err(|e| Error::io(&args.out, e))?;
    log::info!("wrote {} lexicon entries", lexicon.len());
    Ok(())
}

fn load_table(path: &PathBuf) -> Result<embeddings::EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    embeddings::load_vectors(file)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let table = load_table(&args.vectors)?;
    let train = {
        let file = File::open(&args.train).map_err(|e| Error::io(&args.train, e))?;
        GenderLexicon::from_reader(file)?
    };
    let dev = read_labeled(&args.dev)?;
    let spec = TrainSpec {
        step_size: args.step_size,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let params = if args.sweep {
        let grid = classifier::default_grid();
        let (params, best, log_rows) =
            classifier::sweep_hyperparameters(&train, &dev, &table, &grid, &spec)?;
        if let Some(log_path) = &args.log {
            let mut text = String::new();
            for row in &log_rows {
                text.push_str(&format!(
                    "{}\t{}\t{}\t0\t{:.6}\n",
                    row.point.depth, row.point.hidden, row.point.nonlinearity, row.dev_accuracy
                ));
            }
            fs::write(log_path, text).map_err(|e| Error::io(log_path, e))?;
        }
        log::info!(
            "sweep selected depth={} hidden={} nonlinearity={}",
            best.depth,
            best.hidden,
            best.nonlinearity
        );
        params
    } else {
        let shape = MlpShape {
            input_dim: table.dim(),
            depth: args.depth,
            hidden: args.hidden,
            nonlinearity: Nonlinearity::parse(&args.nonlinearity)?,
        };
        classifier::train_classifier(&train, &dev, &table, shape, &spec)?
    };
    let mut w = create(&args.out)?;
    params.to_writer(&mut w)?;
    let (dev_acc, _) = classifier::evaluate_accuracy(&params, &table, &dev)?;
    log::info!("dev accuracy {dev_acc:.4}");
    Ok(())
}

fn cmd_densify(args: DensifyArgs) -> Result<()> {
    let table = load_table(&args.vectors)?;
    let labeled = read_labeled(&args.pairs_from)?;
    let in_vocab: Vec<(String, GenderLabel)> = labeled
        .into_iter()
        .filter(|(lemma, _)| table.contains(lemma))
        .collect();
    let pairs = build_pair_sets(&in_vocab)?;
    let config = DensifierConfig {
        iterations: args.iterations,
        learning_rate: args.learning_rate,
        seed: args.seed,
    };
    let transform = train_densifier(&table, &pairs, &config)?;
    let mut w = create(&args.out)?;
    transform.to_writer(&mut w, config.iterations, config.seed)?;

    if let Some(test) = &args.test {
        let test_items = read_labeled(test)?;
        let mut dump = String::new();
        let mut scores = Vec::new();
        let mut genders = Vec::new();
        for (lemma, gender) in &test_items {
            let Some(vector) = table.vector(lemma) else {
                continue;
            };
            let score = gender_score(&transform, vector);
            dump.push_str(&format!("{lemma}\t{score}\t{gender}\n"));
            scores.push(score);
            genders.push(*gender);
        }
        if let Some(path) = &args.scores {
            fs::write(path, dump).map_err(|e| Error::io(path, e))?;
        }
        if scores.len() >= 3 {
            let rho = genderprobe::stats::spearman_rho(&scores, &genders)?;
            log::info!("spearman rho on {} test lemmas: {rho:.4}", scores.len());
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let table = load_table(&args.vectors)?;
    let model = {
        let file = File::open(&args.model).map_err(|e| Error::io(&args.model, e))?;
        MlpParams::from_reader(file)?
    };
    if model.shape.input_dim != table.dim() {
        return Err(Error::Format(format!(
            "vector dimension {} does not match model input dimension {}",
            table.dim(),
            model.shape.input_dim
        )));
    }
    let test = read_labeled(&args.test)?;
    let (accuracy, predictions) = classifier::evaluate_accuracy(&model, &table, &test)?;
    let gold: Vec<GenderLabel> = test.iter().map(|(_, g)| *g).collect();
    let baseline = majority_baseline(&gold);
    println!("accuracy\t{accuracy:.6}");
    println!("baseline\t{baseline:.6}");
    println!("n\t{}", test.len());
    if let Some(path) = &args.predictions {
        let mut text = String::new();
        for (prediction, (_, gold)) in predictions.iter().zip(&test) {
            text.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\t{}\n",
                prediction.lemma,
                prediction.p_masc,
                prediction.p_fem,
                prediction.predicted(),
                gold
            ));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let format = ReportFormat::parse(&args.format)?;
    let path = LangPaths::new(&args.run, &args.language).report(ReportFormat::Json);
    if !path.exists() {
        return Err(Error::Format(format!(
            "no report at {}; run the pipeline first",
            path.display()
        )));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let report: ExperimentReport = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("parse {}: {e}", path.display())))?;
    print!("{}", render_report(&report, format));
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let format = ReportFormat::parse(&args.format)?;
    let mut config = ExperimentConfig::load(&args.config)?;
    if !args.language.is_empty() {
        for lang in &args.language {
            if !config.languages.contains(lang) {
                return Err(Error::Config(format!(
                    "language `{lang}` is not in the configuration"
                )));
            }
        }
        config.languages = args.language.clone();
    }
    if !args.condition.is_empty() {
        config.conditions = args
            .condition
            .iter()
            .map(|c| ConditionKind::parse(c))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.deterministic {
        config.deterministic = true;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }

    let run = run_pipeline(&config)?;
    for (language, report) in &run.reports {
        println!("== {language} ==");
        print!("{}", render_report(report, format));
    }
    let executed = run.executed_stages().len();
    let cached = run.executions.len() - executed;
    log::info!("{executed} stages executed, {cached} cache hits");
    if let Some((language, error)) = run.failures.iter().next() {
        eprintln!("error: language {language} failed: {error}");
        std::process::exit(error.exit_code());
    }
    Ok(())
}
