//! Line-based experiment configuration.
//!
//! The file has `[section]` headers and `key = value` lines; `#` starts a
//! comment. Path-valued keys (`corpus.<lang>`, `concepts.<lang>`,
//! `output_dir`) may be overridden through environment variables named
//! `GENDERPROBE_PATH_<KEY>` with dots mapped to underscores, e.g.
//! `GENDERPROBE_PATH_CORPUS_ES`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::classifier::{Nonlinearity, SweepPoint};
use crate::embeddings::SgnsConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SgnsSettings {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_step: f64,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub workers: usize,
}

impl Default for SgnsSettings {
    fn default() -> Self {
        SgnsSettings {
            dim: 100,
            window: 2,
            negatives: 10,
            epochs: 5,
            initial_step: 0.025,
            subsample_threshold: 1e-3,
            min_count: 5,
            workers: 1,
        }
    }
}

impl SgnsSettings {
    pub fn to_config(&self, seed: u64, deterministic: bool) -> SgnsConfig {
        SgnsConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            initial_step: self.initial_step,
            subsample_threshold: self.subsample_threshold,
            seed,
            workers: if deterministic { 1 } else { self.workers },
        }
    }

    pub fn cache_key(&self) -> String {
        format!(
            "dim={} window={} negatives={} epochs={} step={} subsample={} min_count={} workers={}",
            self.dim,
            self.window,
            self.negatives,
            self.epochs,
            self.initial_step,
            self.subsample_threshold,
            self.min_count,
            self.workers
        )
    }
}

#[derive(Debug, Clone)]
pub struct LexiconSettings {
    pub min_occurrences: u64,
    pub n_splits: usize,
}

impl Default for LexiconSettings {
    fn default() -> Self {
        LexiconSettings {
            min_occurrences: 50,
            n_splits: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierSettings {
    pub step_size: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub depths: Vec<usize>,
    pub hiddens: Vec<usize>,
    pub nonlinearities: Vec<Nonlinearity>,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            step_size: 0.1,
            epochs: 50,
            batch_size: 0,
            depths: vec![1, 2, 3, 4, 5],
            hiddens: vec![100, 200, 300],
            nonlinearities: Nonlinearity::ALL.to_vec(),
        }
    }
}

impl ClassifierSettings {
    pub fn grid(&self) -> Vec<SweepPoint> {
        let mut grid = Vec::new();
        for &depth in &self.depths {
            for &hidden in &self.hiddens {
                for &nonlinearity in &self.nonlinearities {
                    grid.push(SweepPoint {
                        depth,
                        hidden,
                        nonlinearity,
                    });
                }
            }
        }
        grid
    }

    pub fn cache_key(&self) -> String {
        format!(
            "step={} epochs={} batch={} depths={:?} hiddens={:?} nonlin={:?}",
            self.step_size,
            self.epochs,
            self.batch_size,
            self.depths,
            self.hiddens,
            self.nonlinearities
                .iter()
                .map(|n| n.name())
                .collect::<Vec<_>>()
        )
    }
}

#[derive(Debug, Clone)]
pub struct DensifierSettings {
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for DensifierSettings {
    fn default() -> Self {
        DensifierSettings {
            iterations: 1000,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatsSettings {
    pub n_permutations: usize,
    pub top_k: usize,
}

impl Default for StatsSettings {
    fn default() -> Self {
        StatsSettings {
            n_permutations: 10_000,
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub languages: Vec<String>,
    pub corpus_paths: BTreeMap<String, PathBuf>,
    pub concepts_paths: BTreeMap<String, PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub deterministic: bool,
    /// Worker-pool size for language and (language, condition) jobs.
    pub workers: usize,
    /// Conditions to run (CLI filter; reports need all four). Not part of
    /// the file format.
    pub conditions: Vec<crate::corpus::ConditionKind>,
    pub sgns: SgnsSettings,
    pub lexicon: LexiconSettings,
    pub classifier: ClassifierSettings,
    pub densifier: DensifierSettings,
    pub stats: StatsSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            languages: Vec::new(),
            corpus_paths: BTreeMap::new(),
            concepts_paths: BTreeMap::new(),
            output_dir: PathBuf::from("runs"),
            seed: 1,
            deterministic: true,
            workers: 1,
            conditions: crate::corpus::ConditionKind::ALL.to_vec(),
            sgns: SgnsSettings::default(),
            lexicon: LexiconSettings::default(),
            classifier: ClassifierSettings::default(),
            densifier: DensifierSettings::default(),
            stats: StatsSettings::default(),
        }
    }
}

fn env_path_override(key: &str) -> Option<PathBuf> {
    let var = format!(
        "GENDERPROBE_PATH_{}",
        key.replace('.', "_").to_uppercase()
    );
    std::env::var_os(var).map(PathBuf::from)
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(origin, lineno, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(origin, lineno, "expected `key = value`"));
            };
            let key = key.trim();
            let value = value.trim();
            config
                .apply(&section, key, value)
                .map_err(|e| match e {
                    Error::Config(msg) => Error::parse(origin, lineno, msg),
                    other => other,
                })?;
        }
        // Path overrides from the environment.
        for (lang, path) in config.corpus_paths.iter_mut() {
            if let Some(o) = env_path_override(&format!("corpus.{lang}")) {
                *path = o;
            }
        }
        for (lang, path) in config.concepts_paths.iter_mut() {
            if let Some(o) = env_path_override(&format!("concepts.{lang}")) {
                *path = o;
            }
        }
        if let Some(o) = env_path_override("output_dir") {
            config.output_dir = o;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad_key = || Error::Config(format!("unknown key `{key}` in section [{section}]"));
        match section {
            "experiment" => match key {
                "languages" => {
                    self.languages = value.split_whitespace().map(|s| s.to_string()).collect()
                }
                "output_dir" => self.output_dir = PathBuf::from(value),
                "seed" => self.seed = parse_num(key, value)?,
                "deterministic" => self.deterministic = parse_bool(key, value)?,
                "workers" => self.workers = parse_num(key, value)?,
                _ => return Err(bad_key()),
            },
            "paths" => {
                if let Some(lang) = key.strip_prefix("corpus.") {
                    self.corpus_paths.insert(lang.to_string(), PathBuf::from(value));
                } else if let Some(lang) = key.strip_prefix("concepts.") {
                    self.concepts_paths.insert(lang.to_string(), PathBuf::from(value));
                } else {
                    return Err(bad_key());
                }
            }
            "sgns" => match key {
                "dim" => self.sgns.dim = parse_num(key, value)?,
                "window" => self.sgns.window = parse_num(key, value)?,
                "negatives" => self.sgns.negatives = parse_num(key, value)?,
                "epochs" => self.sgns.epochs = parse_num(key, value)?,
                "initial_step" => self.sgns.initial_step = parse_num(key, value)?,
                "subsample_threshold" => self.sgns.subsample_threshold = parse_num(key, value)?,
                "min_count" => self.sgns.min_count = parse_num(key, value)?,
                "workers" => self.sgns.workers = parse_num(key, value)?,
                _ => return Err(bad_key()),
            },
            "lexicon" => match key {
                "min_occurrences" => self.lexicon.min_occurrences = parse_num(key, value)?,
                "n_splits" => self.lexicon.n_splits = parse_num(key, value)?,
                _ => return Err(bad_key()),
            },
            "classifier" => match key {
                "step_size" => self.classifier.step_size = parse_num(key, value)?,
                "epochs" => self.classifier.epochs = parse_num(key, value)?,
                "batch_size" => self.classifier.batch_size = parse_num(key, value)?,
                "depths" => {
                    self.classifier.depths = value
                        .split_whitespace()
                        .map(|v| parse_num("depths", v))
                        .collect::<Result<_>>()?
                }
                "hiddens" => {
                    self.classifier.hiddens = value
                        .split_whitespace()
                        .map(|v| parse_num("hiddens", v))
                        .collect::<Result<_>>()?
                }
                "nonlinearities" => {
                    self.classifier.nonlinearities = value
                        .split_whitespace()
                        .map(Nonlinearity::parse)
                        .collect::<Result<_>>()?
                }
                _ => return Err(bad_key()),
            },
            "densifier" => match key {
                "iterations" => self.densifier.iterations = parse_num(key, value)?,
                "learning_rate" => self.densifier.learning_rate = parse_num(key, value)?,
                _ => return Err(bad_key()),
            },
            "stats" => match key {
                "n_permutations" => self.stats.n_permutations = parse_num(key, value)?,
                "top_k" => self.stats.top_k = parse_num(key, value)?,
                _ => return Err(bad_key()),
            },
            other => {
                return Err(Error::Config(format!("unknown section [{other}]")));
            }
        }
        Ok(())
    }

    /// Check referential integrity: every language has its paths and the
    /// paths exist.
    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::Config("no languages configured".into()));
        }
        for lang in &self.languages {
            let corpus = self
                .corpus_paths
                .get(lang)
                .ok_or_else(|| Error::Config(format!("no corpus path for language `{lang}`")))?;
            if !corpus.exists() {
                return Err(Error::Config(format!(
                    "corpus path for `{lang}` does not exist: {}",
                    corpus.display()
                )));
            }
            let concepts = self
                .concepts_paths
                .get(lang)
                .ok_or_else(|| Error::Config(format!("no concepts path for language `{lang}`")))?;
            if !concepts.exists() {
                return Err(Error::Config(format!(
                    "concepts path for `{lang}` does not exist: {}",
                    concepts.display()
                )));
            }
        }
        if self.lexicon.n_splits < 1 {
            return Err(Error::Config("n_splits must be ≥ 1".into()));
        }
        if self.classifier.grid().is_empty() {
            return Err(Error::Config("empty classifier grid".into()));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad numeric value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}
