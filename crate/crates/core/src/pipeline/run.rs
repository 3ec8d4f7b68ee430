//! Staged pipeline execution with content-hash caching.
//!
//! Stage graph per language: condition streams and the gender lexicon come
//! from the corpus; the evaluation set and splits from lexicon + concepts;
//! one embedding table per condition; classifier and gender-dimension
//! analyses per condition; one assembled report. Stage input keys fold in
//! the content digests of consumed files, so edits or corruption re-execute
//! exactly the consuming stages. Failures are isolated per language.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::cache::{digest_file, digest_parts, StageCache};
use super::config::ExperimentConfig;
use crate::classifier::{
    majority_baseline, majority_correctness, sweep_hyperparameters, TrainSpec,
};
use crate::corpus::{self, ConditionKind};
use crate::embeddings::{self, build_vocab, EmbeddingTable, TokenStream};
use crate::error::{Error, Result};
use crate::lexicon::{
    exclude_eval_from_train, extract_gender_lexicon, filter_inanimate, load_concepts,
    make_eval_splits, EvalSplit, GenderLabel, GenderLexicon,
};
use crate::report::{
    assemble_report, most_gendered, render_report, ConditionRun, ExperimentReport, ReportFormat,
    ScoredLemma, SplitOutcome,
};
use crate::seeds::derive_seed;
use crate::stats::{accuracy_significance, correlate, CorrelationResult};
use crate::ultradense::{build_pair_sets, gender_score, train_densifier, DensifierConfig};

/// One stage run, for cache diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageExecution {
    pub language: String,
    pub stage: String,
    pub cached: bool,
}

#[derive(Debug, Default)]
pub struct PipelineRun {
    pub reports: BTreeMap<String, ExperimentReport>,
    pub failures: BTreeMap<String, Error>,
    pub executions: Vec<StageExecution>,
}

impl PipelineRun {
    /// Stages that actually executed (cache misses).
    pub fn executed_stages(&self) -> Vec<&StageExecution> {
        self.executions.iter().filter(|e| !e.cached).collect()
    }
}

/// Artifact layout under `<output_dir>/<language>/`.
#[derive(Debug, Clone)]
pub struct LangPaths {
    root: PathBuf,
}

impl LangPaths {
    pub fn new(output_dir: &Path, language: &str) -> Self {
        LangPaths {
            root: output_dir.join(language),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stream(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("streams").join(format!("{kind}.txt"))
    }

    pub fn vectors(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("vectors").join(format!("{kind}.txt"))
    }

    pub fn lexicon(&self) -> PathBuf {
        self.root.join("lexicon.tsv")
    }

    pub fn evalset(&self) -> PathBuf {
        self.root.join("evalset.tsv")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits.tsv")
    }

    pub fn classify(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("classify").join(format!("{kind}.json"))
    }

    pub fn sweep_log(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("sweep").join(format!("{kind}.tsv"))
    }

    pub fn densify(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("densify").join(format!("{kind}.json"))
    }

    pub fn transform(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("transforms").join(format!("{kind}.txt"))
    }

    pub fn scores(&self, kind: ConditionKind) -> PathBuf {
        self.root.join("scores").join(format!("{kind}.tsv"))
    }

    pub fn report(&self, format: ReportFormat) -> PathBuf {
        match format {
            ReportFormat::Json => self.root.join("report.json"),
            ReportFormat::Tsv => self.root.join("report.tsv"),
            ReportFormat::Table => self.root.join("report.txt"),
        }
    }

    fn cache_dir(&self) -> PathBuf {
        self.root.join(".cache")
    }
}

struct LangCtx<'a> {
    config: &'a ExperimentConfig,
    language: &'a str,
    paths: LangPaths,
    cache: StageCache,
    log: &'a Mutex<Vec<StageExecution>>,
}

impl<'a> LangCtx<'a> {
    fn new(
        config: &'a ExperimentConfig,
        language: &'a str,
        log: &'a Mutex<Vec<StageExecution>>,
    ) -> Result<Self> {
        let paths = LangPaths::new(&config.output_dir, language);
        let cache = StageCache::new(paths.cache_dir())?;
        Ok(LangCtx {
            config,
            language,
            paths,
            cache,
            log,
        })
    }

    fn stage(
        &self,
        name: &str,
        input_key: &str,
        outputs: &[PathBuf],
        body: impl FnOnce() -> Result<()>,
    ) -> Result<()> {
        let cached = self.cache.is_fresh(name, input_key);
        if !cached {
            for output in outputs {
                if let Some(parent) = output.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            body().map_err(|e| Error::Stage {
                stage: Box::leak(name.to_string().into_boxed_str()),
                language: self.language.to_string(),
                source: Box::new(e),
            })?;
            let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
            self.cache.record(name, input_key, &refs)?;
        }
        self.log.lock().unwrap().push(StageExecution {
            language: self.language.to_string(),
            stage: name.to_string(),
            cached,
        });
        Ok(())
    }

    fn seed(&self, scope: &[&str]) -> u64 {
        let mut parts = vec![self.language];
        parts.extend_from_slice(scope);
        derive_seed(self.config.seed, &parts)
    }
}

/// Parse corpus, write the four condition streams, extract the lexicon and
/// build the evaluation set and splits.
fn prepare_language(ctx: &LangCtx) -> Result<()> {
    let corpus_path = &ctx.config.corpus_paths[ctx.language];
    let concepts_path = &ctx.config.concepts_paths[ctx.language];
    let corpus_digest = digest_file(corpus_path)?;

    // The parsed corpus is shared lazily across the stage bodies below and
    // never parsed at all when everything is cached.
    let mut parsed: Option<corpus::TaggedCorpus> = None;
    let corpus = |parsed: &mut Option<corpus::TaggedCorpus>| -> Result<()> {
        if parsed.is_none() {
            let loaded = corpus::load_tagged_corpus(corpus_path)?;
            if loaded.missing_lemma_count() > 0 {
                log::info!(
                    "{}: {} tokens lack lemma annotation; surface forms substituted",
                    ctx.language,
                    loaded.missing_lemma_count()
                );
            }
            *parsed = Some(loaded);
        }
        Ok(())
    };

    for kind in ctx.config.conditions.iter().copied() {
        let out = ctx.paths.stream(kind);
        let key = digest_parts(&["condition", &corpus_digest, kind.name()]);
        ctx.stage(&format!("condition-{kind}"), &key, &[out.clone()], || {
            corpus(&mut parsed)?;
            let mut w = BufWriter::new(File::create(&out).map_err(|e| Error::io(&out, e))?);
            corpus::write_condition_stream(parsed.as_ref().unwrap(), kind, &mut w)
                .map_err(|e| Error::io(&out, e))
        })?;
    }

    let lexicon_out = ctx.paths.lexicon();
    let key = digest_parts(&[
        "lexicon",
        &corpus_digest,
        &ctx.config.lexicon.min_occurrences.to_string(),
    ]);
    ctx.stage("lexicon", &key, &[lexicon_out.clone()], || {
        corpus(&mut parsed)?;
        let lexicon = extract_gender_lexicon(
            parsed.as_ref().unwrap(),
            ctx.config.lexicon.min_occurrences,
        );
        let mut w = BufWriter::new(
            File::create(&lexicon_out).map_err(|e| Error::io(&lexicon_out, e))?,
        );
        lexicon.to_writer(&mut w).map_err(|e| Error::io(&lexicon_out, e))
    })?;
    drop(parsed);

    let evalset_out = ctx.paths.evalset();
    let splits_out = ctx.paths.splits();
    let splits_seed = ctx.seed(&["splits"]);
    let key = digest_parts(&[
        "evalset",
        &digest_file(&ctx.paths.lexicon())?,
        &digest_file(concepts_path)?,
        &ctx.config.lexicon.n_splits.to_string(),
        &splits_seed.to_string(),
    ]);
    ctx.stage(
        "evalset",
        &key,
        &[evalset_out.clone(), splits_out.clone()],
        || {
            let lexicon = read_lexicon(&ctx.paths.lexicon())?;
            let file = File::open(concepts_path).map_err(|e| Error::io(concepts_path, e))?;
            let concepts = filter_inanimate(load_concepts(file)?);
            let total = concepts.len();
            // Evaluation lemmas must carry a gender in this language's
            // lexicon; the rest are dropped and counted.
            let mut eval: Vec<(String, GenderLabel)> = Vec::new();
            for entry in &concepts {
                if let Some(gender) = lexicon.gender(&entry.lemma) {
                    eval.push((entry.lemma.clone(), gender));
                }
            }
            eval.sort();
            eval.dedup();
            log::info!(
                "{}: evaluation set {} of {} inanimate concepts",
                ctx.language,
                eval.len(),
                total
            );
            let mut w = BufWriter::new(
                File::create(&evalset_out).map_err(|e| Error::io(&evalset_out, e))?,
            );
            writeln!(w, "# inanimate_concepts\t{total}").map_err(|e| Error::io(&evalset_out, e))?;
            for (lemma, gender) in &eval {
                writeln!(w, "{lemma}\t{gender}").map_err(|e| Error::io(&evalset_out, e))?;
            }
            drop(w);

            let lemmas: BTreeSet<String> = eval.iter().map(|(l, _)| l.clone()).collect();
            let splits = make_eval_splits(&lemmas, ctx.config.lexicon.n_splits, splits_seed)?;
            let mut w = BufWriter::new(
                File::create(&splits_out).map_err(|e| Error::io(&splits_out, e))?,
            );
            for (i, split) in splits.iter().enumerate() {
                for lemma in &split.dev {
                    writeln!(w, "{i}\tdev\t{lemma}").map_err(|e| Error::io(&splits_out, e))?;
                }
                for lemma in &split.test {
                    writeln!(w, "{i}\ttest\t{lemma}").map_err(|e| Error::io(&splits_out, e))?;
                }
            }
            Ok(())
        },
    )
}

fn embed_condition(ctx: &LangCtx, kind: ConditionKind) -> Result<()> {
    let stream_path = ctx.paths.stream(kind);
    let vectors_out = ctx.paths.vectors(kind);
    let seed = ctx.seed(&[kind.name(), "sgns"]);
    let key = digest_parts(&[
        "embed",
        &digest_file(&stream_path)?,
        &ctx.config.sgns.cache_key(),
        &seed.to_string(),
        &ctx.config.deterministic.to_string(),
    ]);
    ctx.stage(&format!("embed-{kind}"), &key, &[vectors_out.clone()], || {
        let text =
            fs::read_to_string(&stream_path).map_err(|e| Error::io(&stream_path, e))?;
        let vocab = build_vocab(
            text.lines().flat_map(|l| l.split_whitespace()),
            ctx.config.sgns.min_count,
        );
        let stream =
            TokenStream::from_sentences(text.lines().map(|l| l.split_whitespace()), &vocab);
        drop(text);
        let sgns = ctx.config.sgns.to_config(seed, ctx.config.deterministic);
        let table = embeddings::train_sgns(&stream, &vocab, &sgns)?;
        let mut w =
            BufWriter::new(File::create(&vectors_out).map_err(|e| Error::io(&vectors_out, e))?);
        embeddings::save_vectors(&table, &mut w)
    })
}

fn read_lexicon(path: &Path) -> Result<GenderLexicon> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    GenderLexicon::from_reader(file)
}

/// The evaluation set with the total inanimate-concept count.
fn read_evalset(path: &Path) -> Result<(Vec<(String, GenderLabel)>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut total = 0usize;
    let mut eval = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("# inanimate_concepts\t") {
            total = rest
                .parse()
                .map_err(|_| Error::parse(&path.display().to_string(), idx + 1, "bad count"))?;
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((lemma, gender)) = line.split_once('\t') else {
            return Err(Error::parse(
                &path.display().to_string(),
                idx + 1,
                "expected `lemma\\tgender`",
            ));
        };
        let gender = GenderLabel::from_feature_value(gender).ok_or_else(|| {
            Error::parse(&path.display().to_string(), idx + 1, "bad gender")
        })?;
        eval.push((lemma.to_string(), gender));
    }
    Ok((eval, total))
}

fn read_splits(path: &Path, n_splits: usize) -> Result<Vec<EvalSplit>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut splits = vec![
        EvalSplit {
            dev: BTreeSet::new(),
            test: BTreeSet::new(),
            split_seed: 0,
        };
        n_splits
    ];
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                &path.display().to_string(),
                idx + 1,
                "expected `split\\trole\\tlemma`",
            ));
        }
        let split: usize = fields[0].parse().map_err(|_| {
            Error::parse(&path.display().to_string(), idx + 1, "bad split id")
        })?;
        if split >= splits.len() {
            return Err(Error::parse(
                &path.display().to_string(),
                idx + 1,
                "split id out of range",
            ));
        }
        match fields[1] {
            "dev" => splits[split].dev.insert(fields[2].to_string()),
            "test" => splits[split].test.insert(fields[2].to_string()),
            other => {
                return Err(Error::parse(
                    &path.display().to_string(),
                    idx + 1,
                    format!("unknown role `{other}`"),
                ))
            }
        };
    }
    Ok(splits)
}

/// Split members that are present in the embedding vocabulary, labeled
/// from the evaluation set. Drops are counted by the caller via length
/// differences.
fn labeled_in_vocab(
    members: &BTreeSet<String>,
    labels: &BTreeMap<String, GenderLabel>,
    table: &EmbeddingTable,
) -> Vec<(String, GenderLabel)> {
    members
        .iter()
        .filter(|lemma| table.contains(lemma))
        .map(|lemma| (lemma.clone(), labels[lemma]))
        .collect()
}

fn analysis_inputs_key(ctx: &LangCtx, kind: ConditionKind, stage: &str, extra: &str) -> Result<String> {
    Ok(digest_parts(&[
        stage,
        &digest_file(&ctx.paths.vectors(kind))?,
        &digest_file(&ctx.paths.lexicon())?,
        &digest_file(&ctx.paths.evalset())?,
        &digest_file(&ctx.paths.splits())?,
        extra,
    ]))
}

fn classify_condition(ctx: &LangCtx, kind: ConditionKind) -> Result<()> {
    let out_json = ctx.paths.classify(kind);
    let out_sweep = ctx.paths.sweep_log(kind);
    let seed_base = ctx.seed(&[kind.name(), "classify"]);
    let extra = format!(
        "{} n_perm={} seed={}",
        ctx.config.classifier.cache_key(),
        ctx.config.stats.n_permutations,
        seed_base
    );
    let key = analysis_inputs_key(ctx, kind, "classify", &extra)?;
    ctx.stage(
        &format!("classify-{kind}"),
        &key,
        &[out_json.clone(), out_sweep.clone()],
        || {
            let table = load_table(&ctx.paths.vectors(kind))?;
            let lexicon = read_lexicon(&ctx.paths.lexicon())?;
            let (eval, _) = read_evalset(&ctx.paths.evalset())?;
            let labels: BTreeMap<String, GenderLabel> = eval.iter().cloned().collect();
            let eval_lemmas: BTreeSet<String> = labels.keys().cloned().collect();
            let splits = read_splits(&ctx.paths.splits(), ctx.config.lexicon.n_splits)?;

            // Training lexicon: extraction minus evaluation lemmas, minus
            // anything the embedding never saw.
            let train = exclude_eval_from_train(&lexicon, &eval_lemmas);
            let in_vocab: Vec<(String, GenderLabel, u64)> = train
                .iter()
                .filter(|(lemma, _, _)| table.contains(lemma))
                .map(|(lemma, gender, support)| (lemma.to_string(), gender, support))
                .collect();
            let dropped_train = train.len() - in_vocab.len();
            if dropped_train > 0 {
                log::info!(
                    "{}/{kind}: {dropped_train} training lemmas outside the vocabulary",
                    ctx.language
                );
            }
            let train = GenderLexicon::from_entries(in_vocab);

            let grid = ctx.config.classifier.grid();
            let mut outcomes = Vec::new();
            let mut sweep_rows = String::new();
            for (split_id, split) in splits.iter().enumerate() {
                let dev = labeled_in_vocab(&split.dev, &labels, &table);
                let test = labeled_in_vocab(&split.test, &labels, &table);
                if dev.is_empty() || test.is_empty() {
                    return Err(Error::Config(format!(
                        "split {split_id} has no in-vocabulary dev or test lemmas"
                    )));
                }
                let spec = TrainSpec {
                    step_size: ctx.config.classifier.step_size,
                    epochs: ctx.config.classifier.epochs,
                    batch_size: ctx.config.classifier.batch_size,
                    seed: derive_seed(seed_base, &["split", &split_id.to_string()]),
                };
                let (params, best, log_rows) =
                    sweep_hyperparameters(&train, &dev, &table, &grid, &spec)?;
                for row in &log_rows {
                    sweep_rows.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{:.6}\n",
                        row.point.depth,
                        row.point.hidden,
                        row.point.nonlinearity,
                        split_id,
                        row.dev_accuracy
                    ));
                }
                let (accuracy, predictions) =
                    crate::classifier::evaluate_accuracy(&params, &table, &test)?;
                let gold: Vec<GenderLabel> = test.iter().map(|(_, g)| *g).collect();
                let baseline = majority_baseline(&gold);
                let model_correct: Vec<bool> = test
                    .iter()
                    .zip(&predictions)
                    .map(|((_, gold), p)| p.predicted() == *gold)
                    .collect();
                let baseline_correct = majority_correctness(&gold);
                let p_value = accuracy_significance(
                    &model_correct,
                    &baseline_correct,
                    ctx.config.stats.n_permutations,
                    derive_seed(seed_base, &["acc-sig", &split_id.to_string()]),
                )?;
                outcomes.push(SplitOutcome {
                    split_id,
                    test_accuracy: accuracy,
                    baseline_accuracy: baseline,
                    p_value,
                    best_depth: best.depth,
                    best_hidden: best.hidden,
                    best_nonlinearity: best.nonlinearity.name().to_string(),
                });
            }
            write_json(&out_json, &outcomes)?;
            fs::write(&out_sweep, sweep_rows).map_err(|e| Error::io(&out_sweep, e))
        },
    )
}

/// Gender-dimension artifact for one condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensifyArtifact {
    pub correlation: CorrelationResult,
    pub most_masculine: Vec<ScoredLemma>,
    pub most_feminine: Vec<ScoredLemma>,
    pub n_scored: usize,
}

fn densify_condition(ctx: &LangCtx, kind: ConditionKind) -> Result<()> {
    let out_json = ctx.paths.densify(kind);
    let out_transform = ctx.paths.transform(kind);
    let out_scores = ctx.paths.scores(kind);
    let seed = ctx.seed(&[kind.name(), "densify"]);
    let perm_seed = ctx.seed(&[kind.name(), "perm"]);
    let extra = format!(
        "iters={} lr={} top_k={} n_perm={} seed={} perm_seed={}",
        ctx.config.densifier.iterations,
        ctx.config.densifier.learning_rate,
        ctx.config.stats.top_k,
        ctx.config.stats.n_permutations,
        seed,
        perm_seed
    );
    let key = analysis_inputs_key(ctx, kind, "densify", &extra)?;
    ctx.stage(
        &format!("densify-{kind}"),
        &key,
        &[out_json.clone(), out_transform.clone(), out_scores.clone()],
        || {
            let table = load_table(&ctx.paths.vectors(kind))?;
            let (eval, _) = read_evalset(&ctx.paths.evalset())?;
            let labels: BTreeMap<String, GenderLabel> = eval.iter().cloned().collect();
            let splits = read_splits(&ctx.paths.splits(), ctx.config.lexicon.n_splits)?;
            // The gender dimension trains on the dev half of the first
            // split and is evaluated on its test half.
            let split = &splits[0];
            let dev = labeled_in_vocab(&split.dev, &labels, &table);
            let test = labeled_in_vocab(&split.test, &labels, &table);
            let pairs = build_pair_sets(&dev)?;
            let config = DensifierConfig {
                iterations: ctx.config.densifier.iterations,
                learning_rate: ctx.config.densifier.learning_rate,
                seed,
            };
            let transform = train_densifier(&table, &pairs, &config)?;

            let mut scored: Vec<(String, f64, GenderLabel)> = test
                .iter()
                .map(|(lemma, gender)| {
                    let score = gender_score(&transform, table.vector(lemma).unwrap());
                    (lemma.clone(), score, *gender)
                })
                .collect();
            scored.sort_by(|a, b| a.0.cmp(&b.0));
            let scores: Vec<f64> = scored.iter().map(|(_, s, _)| *s).collect();
            let genders: Vec<GenderLabel> = scored.iter().map(|(_, _, g)| *g).collect();
            let correlation = correlate(
                &scores,
                &genders,
                ctx.config.stats.n_permutations,
                perm_seed,
            )?;
            let (most_masculine, most_feminine) =
                most_gendered(&scored, correlation.rho, ctx.config.stats.top_k);

            let artifact = DensifyArtifact {
                correlation,
                most_masculine,
                most_feminine,
                n_scored: scored.len(),
            };
            write_json(&out_json, &artifact)?;
            let mut w = BufWriter::new(
                File::create(&out_transform).map_err(|e| Error::io(&out_transform, e))?,
            );
            transform.to_writer(&mut w, config.iterations, config.seed)?;
            drop(w);
            let mut dump = String::new();
            for (lemma, score, gender) in &scored {
                dump.push_str(&format!("{lemma}\t{score}\t{gender}\n"));
            }
            fs::write(&out_scores, dump).map_err(|e| Error::io(&out_scores, e))
        },
    )
}

fn report_language(ctx: &LangCtx) -> Result<ExperimentReport> {
    let mut parts = vec!["report".to_string()];
    for kind in ConditionKind::ALL {
        parts.push(digest_file(&ctx.paths.classify(kind))?);
        parts.push(digest_file(&ctx.paths.densify(kind))?);
    }
    parts.push(digest_file(&ctx.paths.evalset())?);
    let refs: Vec<&str> = parts.iter().map(|s| s.as_str()).collect();
    let key = digest_parts(&refs);
    let outputs = [
        ctx.paths.report(ReportFormat::Json),
        ctx.paths.report(ReportFormat::Tsv),
        ctx.paths.report(ReportFormat::Table),
    ];
    ctx.stage("report", &key, &outputs, || {
        let (eval, total) = read_evalset(&ctx.paths.evalset())?;
        let mut runs = Vec::new();
        for kind in ConditionKind::ALL {
            let splits: Vec<SplitOutcome> = read_json(&ctx.paths.classify(kind))?;
            let densify: DensifyArtifact = read_json(&ctx.paths.densify(kind))?;
            runs.push(ConditionRun {
                condition: kind.name().to_string(),
                splits,
                correlation: densify.correlation,
                most_masculine: densify.most_masculine,
                most_feminine: densify.most_feminine,
            });
        }
        let report = assemble_report(ctx.language, total, eval.len(), runs)?;
        for format in [ReportFormat::Json, ReportFormat::Tsv, ReportFormat::Table] {
            let path = ctx.paths.report(format);
            fs::write(&path, render_report(&report, format)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    })?;
    read_json(&ctx.paths.report(ReportFormat::Json))
}

fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    embeddings::load_vectors(file)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("parse {}: {e}", path.display())))
}

type Job<'a> = Box<dyn FnOnce() -> (String, Result<()>) + Send + 'a>;

/// Run jobs on `workers` threads (in order, inline, when workers ≤ 1).
fn run_jobs(jobs: Vec<Job>, workers: usize) -> Vec<(String, Result<()>)> {
    if workers <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(|job| job()).collect();
    }
    let queue = Mutex::new(jobs.into_iter().collect::<std::collections::VecDeque<_>>());
    let results = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(job) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let outcome = job();
                results.lock().unwrap().push(outcome);
            });
        }
    });
    results.into_inner().unwrap()
}

/// Run the full pipeline for every configured language. Failures are
/// per-language: a failing stage halts that language and the rest proceed.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineRun> {
    config.validate()?;
    let exec_log = Mutex::new(Vec::new());
    let log = &exec_log;
    let mut failures: BTreeMap<String, Error> = BTreeMap::new();

    // Phase 1: corpus-derived artifacts, one job per language.
    let jobs: Vec<Job> = config
        .languages
        .iter()
        .map(|lang| {
            let job: Job = Box::new(|| {
                let outcome = LangCtx::new(config, lang, log).and_then(|ctx| prepare_language(&ctx));
                (lang.clone(), outcome)
            });
            job
        })
        .collect();
    for (lang, outcome) in run_jobs(jobs, config.workers) {
        if let Err(e) = outcome {
            failures.entry(lang).or_insert(e);
        }
    }

    // Phase 2: embedding jobs, one per (language, condition).
    let mut jobs: Vec<Job> = Vec::new();
    for lang in &config.languages {
        if failures.contains_key(lang) {
            continue;
        }
        for kind in config.conditions.iter().copied() {
            jobs.push(Box::new(move || {
                let outcome =
                    LangCtx::new(config, lang, log).and_then(|ctx| embed_condition(&ctx, kind));
                (lang.clone(), outcome)
            }));
        }
    }
    for (lang, outcome) in run_jobs(jobs, config.workers) {
        if let Err(e) = outcome {
            failures.entry(lang).or_insert(e);
        }
    }

    // Phase 3: analysis jobs, classifier and gender dimension per
    // (language, condition).
    let mut jobs: Vec<Job> = Vec::new();
    for lang in &config.languages {
        if failures.contains_key(lang) {
            continue;
        }
        for kind in config.conditions.iter().copied() {
            jobs.push(Box::new(move || {
                let outcome =
                    LangCtx::new(config, lang, log).and_then(|ctx| classify_condition(&ctx, kind));
                (lang.clone(), outcome)
            }));
            jobs.push(Box::new(move || {
                let outcome =
                    LangCtx::new(config, lang, log).and_then(|ctx| densify_condition(&ctx, kind));
                (lang.clone(), outcome)
            }));
        }
    }
    for (lang, outcome) in run_jobs(jobs, config.workers) {
        if let Err(e) = outcome {
            failures.entry(lang).or_insert(e);
        }
    }

    // Phase 4: reports, only when every condition was run.
    let mut reports = BTreeMap::new();
    let all_conditions = ConditionKind::ALL
        .iter()
        .all(|k| config.conditions.contains(k));
    if !all_conditions {
        log::info!("partial condition set; skipping report assembly");
    }
    for lang in &config.languages {
        if !all_conditions || failures.contains_key(lang) {
            continue;
        }
        match LangCtx::new(config, lang, log).and_then(|ctx| report_language(&ctx)) {
            Ok(report) => {
                reports.insert(lang.clone(), report);
            }
            Err(e) => {
                failures.insert(lang.clone(), e);
            }
        }
    }

    Ok(PipelineRun {
        reports,
        failures,
        executions: exec_log.into_inner().unwrap(),
    })
}
