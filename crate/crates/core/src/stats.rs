//! Rank correlation and randomization significance tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::GenderLabel;

pub const ALPHA: f64 = 0.05;

/// Spearman's ρ with permutation significance at α = 0.05.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
}

/// Average ranks (1-based), ties averaged.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::Numerical(
            "undefined correlation: zero variance in a ranking".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Spearman rank correlation between two real sequences, ties averaged.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Config(format!(
            "spearman needs two equal-length sequences of ≥ 3 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman's ρ between gender scores and binary gender, masculine coded 0
/// and feminine 1.
pub fn spearman_rho(scores: &[f64], labels: &[GenderLabel]) -> Result<f64> {
    let coded: Vec<f64> = labels.iter().map(|g| g.binary_index() as f64).collect();
    spearman(scores, &coded)
}

/// Two-sided permutation test for ρ: labels are shuffled `n_perm` times and
/// p = (1 + #{|ρ*| ≥ |ρ|}) / (1 + n_perm).
pub fn permutation_test_rho(
    scores: &[f64],
    labels: &[GenderLabel],
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if n_perm < 1000 {
        return Err(Error::Config(format!(
            "permutation test needs n_perm ≥ 1000, got {n_perm}"
        )));
    }
    let coded: Vec<f64> = labels.iter().map(|g| g.binary_index() as f64).collect();
    let observed = spearman(scores, &coded)?.abs();
    let score_ranks = average_ranks(scores);
    // Ranks of a permuted sequence are the permuted ranks.
    let mut label_ranks = average_ranks(&coded);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        label_ranks.shuffle(&mut rng);
        let rho = pearson(&score_ranks, &label_ranks)?;
        if rho.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + n_perm) as f64)
}

/// ρ together with its permutation p-value and the α = 0.05 flag.
pub fn correlate(
    scores: &[f64],
    labels: &[GenderLabel],
    n_perm: usize,
    seed: u64,
) -> Result<CorrelationResult> {
    let rho = spearman_rho(scores, labels)?;
    let p_value = permutation_test_rho(scores, labels, n_perm, seed)?;
    Ok(CorrelationResult {
        rho,
        p_value,
        n: scores.len(),
        significant: p_value < ALPHA,
    })
}

/// Two-sided approximate-randomization test between two per-item
/// correctness vectors: items swap sides with probability ½ each round,
/// p = (1 + #{|Δ*| ≥ |Δ|}) / (1 + rounds).
pub fn accuracy_significance(
    correct_model: &[bool],
    correct_baseline: &[bool],
    rounds: usize,
    seed: u64,
) -> Result<f64> {
    if correct_model.is_empty() || correct_model.len() != correct_baseline.len() {
        return Err(Error::Config(
            "accuracy significance needs equal-length non-empty correctness vectors".into(),
        ));
    }
    if rounds < 1000 {
        return Err(Error::Config(format!(
            "approximate randomization needs ≥ 1000 rounds, got {rounds}"
        )));
    }
    let n = correct_model.len() as f64;
    let diff = |a: &[bool], b: &[bool]| {
        (a.iter().filter(|&&v| v).count() as f64 - b.iter().filter(|&&v| v).count() as f64) / n
    };
    let observed = diff(correct_model, correct_baseline).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..rounds {
        let mut delta = 0.0f64;
        for (&a, &b) in correct_model.iter().zip(correct_baseline) {
            let (a, b) = if rng.gen::<bool>() { (b, a) } else { (a, b) };
            delta += (a as i64 - b as i64) as f64;
        }
        if (delta / n).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + rounds) as f64)
}
