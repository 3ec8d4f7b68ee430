//! Skip-gram with negative sampling.
//!
//! Tokens are treated purely categorically: after the vocabulary lookup the
//! trainer only ever sees type ids, so no character or subword information
//! can enter the vectors.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocabulary;
use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Size of the unigram^0.75 sampling table.
const NEGATIVE_TABLE_SIZE: usize = 10_000_000;
/// The learning rate never decays below this fraction of the initial step.
const MIN_STEP_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_step: f64,
    pub subsample_threshold: f64,
    pub seed: u64,
    /// 1 = deterministic single-worker mode; >1 = concurrent updates with
    /// tolerated lost writes (nondeterministic).
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 2,
            negatives: 10,
            epochs: 5,
            initial_step: 0.025,
            subsample_threshold: 1e-3,
            seed: 1,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.window < 1 || self.negatives < 1 || self.epochs < 1 {
            return Err(Error::Config(
                "sgns config requires dim, window, negatives and epochs ≥ 1".into(),
            ));
        }
        if self.initial_step <= 0.0 {
            return Err(Error::Config("sgns initial_step must be positive".into()));
        }
        if self.subsample_threshold < 0.0 {
            return Err(Error::Config(
                "sgns subsample_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A tokenized corpus: sentences of vocabulary ids. Out-of-vocabulary tokens
/// are dropped at construction.
#[derive(Debug, Clone, Default)]
pub struct TokenStream {
    sentences: Vec<Vec<u32>>,
    n_tokens: usize,
}

impl TokenStream {
    pub fn from_sentences<I, S, T>(sentences: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut n_tokens = 0usize;
        for sentence in sentences {
            let ids: Vec<u32> = sentence
                .into_iter()
                .filter_map(|t| vocab.id(t.as_ref()).map(|id| id as u32))
                .collect();
            if !ids.is_empty() {
                n_tokens += ids.len();
                out.push(ids);
            }
        }
        TokenStream {
            sentences: out,
            n_tokens,
        }
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.n_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Positive,
    Negative,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic loss and analytic gradients for one (center, context) sample.
///
/// Positive pairs contribute −log σ(⟨u,v⟩), negative samples −log σ(−⟨u,v⟩).
pub fn sgns_pair_loss(
    center: &[f64],
    context: &[f64],
    label: PairLabel,
) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(center.len(), context.len(), "vector dimensions must match");
    let dot: f64 = center.iter().zip(context).map(|(a, b)| a * b).sum();
    let sign = match label {
        PairLabel::Positive => 1.0,
        PairLabel::Negative => -1.0,
    };
    let p = sigmoid(sign * dot);
    let loss = -p.ln();
    // d loss / d dot = −sign · (1 − σ(sign·dot))
    let coeff = -sign * (1.0 - p);
    let grad_center: Vec<f64> = context.iter().map(|&v| coeff * v).collect();
    let grad_context: Vec<f64> = center.iter().map(|&u| coeff * u).collect();
    (loss, grad_center, grad_context)
}

/// Unigram^0.75 negative sampling table.
pub struct NegativeSampler {
    table: Vec<u32>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Result<Self> {
        Self::with_table_size(vocab, NEGATIVE_TABLE_SIZE)
    }

    pub fn with_table_size(vocab: &Vocabulary, table_size: usize) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Config(
                "cannot build a negative sampler over an empty vocabulary".into(),
            ));
        }
        let pow_total: f64 = vocab
            .entries()
            .iter()
            .map(|e| (e.count as f64).powf(0.75))
            .sum();
        let mut table = vec![0u32; table_size];
        let mut id = 0usize;
        let mut boundary = (vocab.entry(0).count as f64).powf(0.75) / pow_total;
        for (slot, cell) in table.iter_mut().enumerate() {
            *cell = id as u32;
            if (slot as f64 + 1.0) / table_size as f64 > boundary && id + 1 < vocab.len() {
                id += 1;
                boundary += (vocab.entry(id).count as f64).powf(0.75) / pow_total;
            }
        }
        Ok(NegativeSampler { table })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.table[rng.gen_range(0..self.table.len())] as usize
    }

    /// Seeded infinite stream of sampled ids.
    pub fn into_stream(self, seed: u64) -> NegativeSampleStream {
        NegativeSampleStream {
            sampler: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Iterator form of the sampler, reproducible under its seed.
pub struct NegativeSampleStream {
    sampler: NegativeSampler,
    rng: ChaCha8Rng,
}

impl Iterator for NegativeSampleStream {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.sampler.sample(&mut self.rng))
    }
}

/// Per-epoch statistics from a logged training run.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epoch_mean_loss: Vec<f64>,
    pub pairs_trained: u64,
}

pub fn train_sgns(
    stream: &TokenStream,
    vocab: &Vocabulary,
    config: &SgnsConfig,
) -> Result<EmbeddingTable> {
    train_sgns_logged(stream, vocab, config, false).map(|(table, _)| table)
}

/// Train embeddings; when `track_loss` is set (single-worker mode only) the
/// log carries the mean per-sample loss of every epoch.
pub fn train_sgns_logged(
    stream: &TokenStream,
    vocab: &Vocabulary,
    config: &SgnsConfig,
    track_loss: bool,
) -> Result<(EmbeddingTable, TrainLog)> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::Config(
            "cannot train embeddings over an empty vocabulary".into(),
        ));
    }
    let dim = config.dim;
    let n_types = vocab.len();

    // Published input vectors start uniform in ±0.5/d, context vectors at 0.
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["sgns-init"]));
    let mut input: Vec<f64> = (0..n_types * dim)
        .map(|_| (init_rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0f64; n_types * dim];

    let sampler = NegativeSampler::new(vocab)?;
    let keep_prob = keep_probabilities(vocab, config.subsample_threshold);
    let total_positions = (stream.token_count() as u64).max(1) * config.epochs as u64;

    let log = if config.workers <= 1 {
        let mut worker = Worker {
            config,
            sampler: &sampler,
            keep_prob: keep_prob.as_deref(),
            dim,
            total_positions,
            track_loss,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["sgns-worker", "0"])),
        };
        worker.run_single(stream, &mut input, &mut output)?
    } else {
        run_hogwild(
            stream,
            config,
            &sampler,
            keep_prob.as_deref(),
            total_positions,
            &mut input,
            &mut output,
        )?;
        TrainLog::default()
    };

    let input = Array2::from_shape_vec((n_types, dim), input).expect("shape");
    let output = Array2::from_shape_vec((n_types, dim), output).expect("shape");
    let table = EmbeddingTable::new(vocab.clone(), input, output)?;
    Ok((table, log))
}

/// word2vec-style keep probabilities; None disables subsampling.
fn keep_probabilities(vocab: &Vocabulary, threshold: f64) -> Option<Vec<f64>> {
    if threshold <= 0.0 {
        return None;
    }
    let total = vocab.total_count() as f64;
    Some(
        vocab
            .entries()
            .iter()
            .map(|e| {
                let x = e.count as f64 / (threshold * total);
                (1.0 / x.sqrt() + 1.0 / x).min(1.0)
            })
            .collect(),
    )
}

struct Worker<'a> {
    config: &'a SgnsConfig,
    sampler: &'a NegativeSampler,
    keep_prob: Option<&'a [f64]>,
    dim: usize,
    total_positions: u64,
    track_loss: bool,
    rng: ChaCha8Rng,
}

impl Worker<'_> {
    fn run_single(
        &mut self,
        stream: &TokenStream,
        input: &mut [f64],
        output: &mut [f64],
    ) -> Result<TrainLog> {
        let mut log = TrainLog::default();
        let mut processed = 0u64;
        let mut kept: Vec<u32> = Vec::new();
        let mut accum = vec![0.0f64; self.dim];
        for _ in 0..self.config.epochs {
            let mut epoch_loss = 0.0f64;
            let mut epoch_samples = 0u64;
            for sentence in stream.sentences() {
                self.subsample(sentence, &mut kept);
                for pos in 0..kept.len() {
                    let step = self.step_size(processed);
                    processed += 1;
                    let span = self.rng.gen_range(1..=self.config.window);
                    let lo = pos.saturating_sub(span);
                    let hi = (pos + span).min(kept.len() - 1);
                    let center = kept[pos] as usize;
                    for ctx_pos in lo..=hi {
                        if ctx_pos == pos {
                            continue;
                        }
                        let ctx = kept[ctx_pos] as usize;
                        let (pairs, loss) = self.train_group(
                            center, ctx, step, input, output, &mut accum,
                        )?;
                        log.pairs_trained += pairs;
                        if self.track_loss {
                            epoch_loss += loss;
                            epoch_samples += pairs;
                        }
                    }
                }
            }
            if self.track_loss {
                log.epoch_mean_loss
                    .push(epoch_loss / (epoch_samples.max(1) as f64));
            }
        }
        Ok(log)
    }

    /// One positive update plus `negatives` sampled updates for a
    /// (center, context) pair. Returns (samples trained, summed loss).
    fn train_group(
        &mut self,
        center: usize,
        ctx: usize,
        step: f64,
        input: &mut [f64],
        output: &mut [f64],
        accum: &mut [f64],
    ) -> Result<(u64, f64)> {
        let dim = self.dim;
        accum.iter_mut().for_each(|a| *a = 0.0);
        let mut pairs = 0u64;
        let mut loss = 0.0f64;
        for k in 0..=self.config.negatives {
            let (target, label) = if k == 0 {
                (ctx, 1.0)
            } else {
                let sampled = self.sampler.sample(&mut self.rng);
                if sampled == ctx {
                    continue;
                }
                (sampled, 0.0)
            };
            let in_row = &input[center * dim..(center + 1) * dim];
            let out_row = &mut output[target * dim..(target + 1) * dim];
            let mut dot = 0.0f64;
            for d in 0..dim {
                dot += in_row[d] * out_row[d];
            }
            if !dot.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite activation while training type {center} against {target}"
                )));
            }
            let p = sigmoid(dot);
            let g = (label - p) * step;
            for d in 0..dim {
                accum[d] += g * out_row[d];
                out_row[d] += g * in_row[d];
            }
            if self.track_loss {
                loss += if label > 0.5 { -p.ln() } else { -(1.0 - p).ln() };
            }
            pairs += 1;
        }
        let in_row = &mut input[center * dim..(center + 1) * dim];
        for d in 0..dim {
            in_row[d] += accum[d];
        }
        Ok((pairs, loss))
    }

    fn subsample(&mut self, sentence: &[u32], kept: &mut Vec<u32>) {
        kept.clear();
        match self.keep_prob {
            None => kept.extend_from_slice(sentence),
            Some(keep) => {
                for &id in sentence {
                    if self.rng.gen::<f64>() < keep[id as usize] {
                        kept.push(id);
                    }
                }
            }
        }
    }

    fn step_size(&self, processed: u64) -> f64 {
        let remaining = 1.0 - processed as f64 / self.total_positions as f64;
        self.config.initial_step * remaining.max(MIN_STEP_FRACTION)
    }
}

/// Multi-worker mode: sentences are split into contiguous chunks and updated
/// concurrently without synchronization; lost updates are tolerated.
#[allow(clippy::too_many_arguments)]
fn run_hogwild(
    stream: &TokenStream,
    config: &SgnsConfig,
    sampler: &NegativeSampler,
    keep_prob: Option<&[f64]>,
    total_positions: u64,
    input: &mut [f64],
    output: &mut [f64],
) -> Result<()> {
    let shared_input: Vec<AtomicU64> = input.iter().map(|&v| AtomicU64::new(v.to_bits())).collect();
    let shared_output: Vec<AtomicU64> =
        output.iter().map(|&v| AtomicU64::new(v.to_bits())).collect();
    let progress = AtomicU64::new(0);
    let n_workers = config.workers;
    let chunk = stream.sentences().len().div_ceil(n_workers).max(1);

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for (w, sentences) in stream.sentences().chunks(chunk).enumerate() {
            let shared_input = &shared_input;
            let shared_output = &shared_output;
            let progress = &progress;
            handles.push(scope.spawn(move || -> Result<()> {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    &["sgns-worker", &w.to_string()],
                ));
                let dim = config.dim;
                let mut kept: Vec<u32> = Vec::new();
                let mut accum = vec![0.0f64; dim];
                let mut in_row = vec![0.0f64; dim];
                for _ in 0..config.epochs {
                    for sentence in sentences {
                        kept.clear();
                        match keep_prob {
                            None => kept.extend_from_slice(sentence),
                            Some(keep) => {
                                for &id in sentence {
                                    if rng.gen::<f64>() < keep[id as usize] {
                                        kept.push(id);
                                    }
                                }
                            }
                        }
                        for pos in 0..kept.len() {
                            let done = progress.fetch_add(1, Ordering::Relaxed);
                            let remaining = 1.0 - done as f64 / total_positions as f64;
                            let step = config.initial_step * remaining.max(MIN_STEP_FRACTION);
                            let span = rng.gen_range(1..=config.window);
                            let lo = pos.saturating_sub(span);
                            let hi = (pos + span).min(kept.len() - 1);
                            let center = kept[pos] as usize;
                            for d in 0..dim {
                                in_row[d] =
                                    f64::from_bits(shared_input[center * dim + d].load(Ordering::Relaxed));
                            }
                            for ctx_pos in lo..=hi {
                                if ctx_pos == pos {
                                    continue;
                                }
                                let ctx = kept[ctx_pos] as usize;
                                accum.iter_mut().for_each(|a| *a = 0.0);
                                for k in 0..=config.negatives {
                                    let (target, label) = if k == 0 {
                                        (ctx, 1.0)
                                    } else {
                                        let sampled = sampler.sample(&mut rng);
                                        if sampled == ctx {
                                            continue;
                                        }
                                        (sampled, 0.0)
                                    };
                                    let base = target * dim;
                                    let mut dot = 0.0f64;
                                    for d in 0..dim {
                                        dot += in_row[d]
                                            * f64::from_bits(
                                                shared_output[base + d].load(Ordering::Relaxed),
                                            );
                                    }
                                    if !dot.is_finite() {
                                        return Err(Error::Numerical(
                                            "non-finite activation in concurrent training".into(),
                                        ));
                                    }
                                    let g = (label - sigmoid(dot)) * step;
                                    for d in 0..dim {
                                        let cell = &shared_output[base + d];
                                        let v = f64::from_bits(cell.load(Ordering::Relaxed));
                                        accum[d] += g * v;
                                        cell.store((v + g * in_row[d]).to_bits(), Ordering::Relaxed);
                                    }
                                }
                                for d in 0..dim {
                                    let cell = &shared_input[center * dim + d];
                                    let v = f64::from_bits(cell.load(Ordering::Relaxed));
                                    cell.store((v + accum[d]).to_bits(), Ordering::Relaxed);
                                    in_row[d] = v + accum[d];
                                }
                            }
                        }
                    }
                }
                Ok(())
            }));
        }
        for handle in handles {
            handle.join().expect("worker thread panicked")?;
        }
        Ok(())
    })?;

    for (dst, cell) in input.iter_mut().zip(&shared_input) {
        *dst = f64::from_bits(cell.load(Ordering::Relaxed));
    }
    for (dst, cell) in output.iter_mut().zip(&shared_output) {
        *dst = f64::from_bits(cell.load(Ordering::Relaxed));
    }
    Ok(())
}
