//! Concentrating gender into one embedding dimension.
//!
//! An orthogonal matrix Q rotates the embedding space so that one designated
//! component separates same-gender from different-gender noun pairs: the
//! squared projected difference is minimized over same-gender pairs and
//! maximized over different-gender pairs. Q stays orthogonal throughout via
//! an SVD projection after every stochastic gradient step, so dot products
//! and cosines between embeddings are preserved exactly.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::lexicon::GenderLabel;
use crate::linalg;
use crate::opt::Adam;
use crate::seeds::derive_seed;

/// Above this many lemmas the pair sets are reservoir-sampled instead of
/// fully enumerated.
const MAX_ENUMERATED_LEMMAS: usize = 2000;
const RESERVOIR_PAIRS: usize = 1_000_000;

/// A d×d orthogonal rotation plus the index of the gender dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalTransform {
    pub q: Array2<f64>,
    pub gender_axis: usize,
}

impl OrthogonalTransform {
    pub fn identity(dim: usize) -> Self {
        OrthogonalTransform {
            q: Array2::<f64>::eye(dim),
            gender_axis: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// ‖QᵀQ − I‖_max.
    pub fn orthogonality_deviation(&self) -> f64 {
        linalg::max_orthogonality_deviation(&self.q)
    }

    pub fn to_writer<W: Write>(&self, w: &mut W, iterations: usize, seed: u64) -> Result<()> {
        let d = self.dim();
        writeln!(w, "{} {} {} {}", d, self.gender_axis, iterations, seed)
            .map_err(|e| Error::Format(format!("write failed: {e}")))?;
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| format!("{}", self.q[(i, j)])).collect();
            writeln!(w, "{}", row.join(" "))
                .map_err(|e| Error::Format(format!("write failed: {e}")))?;
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty transform file".into()))?
            .map_err(|e| Error::Format(format!("read failed: {e}")))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(
                "transform header must be `d gender_axis iterations seed`".into(),
            ));
        }
        let d: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format("bad dimension in transform header".into()))?;
        let gender_axis: usize = fields[1]
            .parse()
            .map_err(|_| Error::Format("bad gender axis in transform header".into()))?;
        let mut q = Array2::zeros((d, d));
        for i in 0..d {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("transform file ended at row {i}")))?
                .map_err(|e| Error::Format(format!("read failed: {e}")))?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != d {
                return Err(Error::Format(format!(
                    "transform row {i} has {} values, expected {d}",
                    values.len()
                )));
            }
            for (j, v) in values.iter().enumerate() {
                q[(i, j)] = v
                    .parse()
                    .map_err(|_| Error::Format(format!("bad float in transform row {i}")))?;
            }
        }
        if gender_axis >= d {
            return Err(Error::Format("gender axis outside matrix".into()));
        }
        Ok(OrthogonalTransform { q, gender_axis })
    }
}

/// Same-gender and different-gender lemma pairs, stored as indices into a
/// shared lemma list.
#[derive(Debug, Clone)]
pub struct PairSets {
    lemmas: Vec<String>,
    pub same: Vec<(u32, u32)>,
    pub diff: Vec<(u32, u32)>,
}

impl PairSets {
    pub fn lemma(&self, idx: u32) -> &str {
        &self.lemmas[idx as usize]
    }

    pub fn same_pair(&self, i: usize) -> (&str, &str) {
        let (a, b) = self.same[i];
        (self.lemma(a), self.lemma(b))
    }

    pub fn diff_pair(&self, i: usize) -> (&str, &str) {
        let (a, b) = self.diff[i];
        (self.lemma(a), self.lemma(b))
    }

    pub fn same_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.same.iter().map(|&(a, b)| (self.lemma(a), self.lemma(b)))
    }

    pub fn diff_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.diff.iter().map(|&(a, b)| (self.lemma(a), self.lemma(b)))
    }
}

/// All unordered pairs of distinct lemmas, split by gender equality. Errors
/// unless both genders are present (otherwise the different-gender set would
/// be empty). Sets larger than the enumeration cap are reservoir-sampled to
/// 10⁶ pairs each, deterministically.
pub fn build_pair_sets(labeled: &[(String, GenderLabel)]) -> Result<PairSets> {
    if labeled.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 lemmas to build pair sets, have {}",
            labeled.len()
        )));
    }
    {
        let mut seen = BTreeSet::new();
        for (lemma, _) in labeled {
            if !seen.insert(lemma.as_str()) {
                return Err(Error::Config(format!("duplicate lemma `{lemma}` in pair input")));
            }
        }
    }
    let genders: BTreeSet<GenderLabel> = labeled.iter().map(|(_, g)| *g).collect();
    if genders.len() < 2 {
        return Err(Error::Config(
            "pair sets need both genders present; the different-gender set would be empty".into(),
        ));
    }

    let lemmas: Vec<String> = labeled.iter().map(|(l, _)| l.clone()).collect();
    let labels: Vec<GenderLabel> = labeled.iter().map(|(_, g)| *g).collect();
    let n = lemmas.len();

    let mut same = Reservoir::new(n <= MAX_ENUMERATED_LEMMAS, RESERVOIR_PAIRS, 0x5a17);
    let mut diff = Reservoir::new(n <= MAX_ENUMERATED_LEMMAS, RESERVOIR_PAIRS, 0xd1ff);
    for i in 0..n {
        for j in (i + 1)..n {
            let pair = (i as u32, j as u32);
            if labels[i] == labels[j] {
                same.offer(pair);
            } else {
                diff.offer(pair);
            }
        }
    }

    Ok(PairSets {
        lemmas,
        same: same.into_vec(),
        diff: diff.into_vec(),
    })
}

/// Uniform reservoir sampler; in enumerate mode it just collects.
struct Reservoir {
    enumerate: bool,
    capacity: usize,
    seen: u64,
    items: Vec<(u32, u32)>,
    rng: ChaCha8Rng,
}

impl Reservoir {
    fn new(enumerate: bool, capacity: usize, seed: u64) -> Self {
        Reservoir {
            enumerate,
            capacity,
            seen: 0,
            items: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn offer(&mut self, pair: (u32, u32)) {
        if self.enumerate {
            self.items.push(pair);
            return;
        }
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(pair);
        } else {
            let slot = self.rng.gen_range(0..self.seen);
            if (slot as usize) < self.capacity {
                self.items[slot as usize] = pair;
            }
        }
    }

    fn into_vec(self) -> Vec<(u32, u32)> {
        self.items
    }
}

fn embedding<'t>(table: &'t EmbeddingTable, lemma: &str) -> ArrayView1<'t, f64> {
    table
        .vector(lemma)
        .unwrap_or_else(|| panic!("lemma `{lemma}` not in embedding vocabulary"))
}

/// Objective over explicit pair samples:
/// Σ_same (q₁·(e−e′))² − Σ_diff (q₁·(e−e′))², with q₁ the gender-axis row.
pub fn objective_value(
    q: &Array2<f64>,
    gender_axis: usize,
    table: &EmbeddingTable,
    sample_same: &[(&str, &str)],
    sample_diff: &[(&str, &str)],
) -> f64 {
    let axis = q.row(gender_axis);
    let project = |pairs: &[(&str, &str)]| -> f64 {
        pairs
            .iter()
            .map(|(a, b)| {
                let u = &embedding(table, a) - &embedding(table, b);
                let s = axis.dot(&u);
                s * s
            })
            .sum()
    };
    project(sample_same) - project(sample_diff)
}

/// Analytic gradient of [`objective_value`] with respect to Q. Only the
/// gender-axis row is nonzero: ∂(q₁·u)²/∂q₁ = 2(q₁·u)u, signed per set.
pub fn objective_gradient(
    q: &Array2<f64>,
    gender_axis: usize,
    table: &EmbeddingTable,
    sample_same: &[(&str, &str)],
    sample_diff: &[(&str, &str)],
) -> Array2<f64> {
    let d = q.ncols();
    let axis = q.row(gender_axis);
    let mut grad = Array2::zeros((q.nrows(), d));
    {
        let mut row = grad.row_mut(gender_axis);
        let mut accumulate = |pairs: &[(&str, &str)], sign: f64| {
            for (a, b) in pairs {
                let u = &embedding(table, a) - &embedding(table, b);
                let coeff = sign * 2.0 * axis.dot(&u);
                row.scaled_add(coeff, &u);
            }
        };
        accumulate(sample_same, 1.0);
        accumulate(sample_diff, -1.0);
    }
    grad
}

/// Project a matrix onto the orthogonal group: UVᵀ from its SVD, the
/// closest orthogonal matrix in Frobenius norm.
pub fn svd_orthogonalize(m: &Array2<f64>, gender_axis: usize) -> Result<OrthogonalTransform> {
    let q = linalg::orthogonal_factor(m)?;
    Ok(OrthogonalTransform { q, gender_axis })
}

#[derive(Debug, Clone)]
pub struct DensifierConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DensifierConfig {
    fn default() -> Self {
        DensifierConfig {
            iterations: 1000,
            learning_rate: 0.01,
            seed: 1,
        }
    }
}

/// Stochastic projected gradient: starting from the identity, repeatedly
/// sample one pair from each set, take an Adam step on the objective, and
/// re-orthogonalize through the SVD. Optimizer state persists across
/// projections.
pub fn train_densifier(
    table: &EmbeddingTable,
    pairs: &PairSets,
    config: &DensifierConfig,
) -> Result<OrthogonalTransform> {
    train_densifier_observed(table, pairs, config, |_, _| {})
}

/// [`train_densifier`] with a per-iteration observer over the projected Q,
/// used by diagnostics and tests.
pub fn train_densifier_observed(
    table: &EmbeddingTable,
    pairs: &PairSets,
    config: &DensifierConfig,
    mut observe: impl FnMut(usize, &OrthogonalTransform),
) -> Result<OrthogonalTransform> {
    if pairs.same.is_empty() || pairs.diff.is_empty() {
        return Err(Error::Config(
            "densifier needs non-empty same- and different-gender pair sets".into(),
        ));
    }
    for (a, b) in pairs.same_pairs().chain(pairs.diff_pairs()) {
        if !table.contains(a) || !table.contains(b) {
            return Err(Error::Config(format!(
                "pair ({a}, {b}) not resolvable in the embedding vocabulary"
            )));
        }
    }
    let dim = table.dim();
    let mut transform = OrthogonalTransform::identity(dim);
    let mut adam = Adam::new(config.learning_rate, dim * dim);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["densifier"]));

    for t in 0..config.iterations {
        let same = pairs.same_pair(rng.gen_range(0..pairs.same.len()));
        let diff = pairs.diff_pair(rng.gen_range(0..pairs.diff.len()));
        let grad = objective_gradient(
            &transform.q,
            transform.gender_axis,
            table,
            &[same],
            &[diff],
        );
        let grad_flat = grad.as_slice().expect("contiguous gradient");
        let mut theta: Vec<f64> = transform.q.iter().copied().collect();
        adam.step(&mut theta, grad_flat);
        let stepped = Array2::from_shape_vec((dim, dim), theta).expect("shape");
        transform = svd_orthogonalize(&stepped, transform.gender_axis)?;
        observe(t, &transform);
    }
    Ok(transform)
}

/// The gender coordinate of one embedding: (Q e) at the gender axis.
pub fn gender_score(transform: &OrthogonalTransform, embedding: ArrayView1<f64>) -> f64 {
    assert_eq!(
        transform.dim(),
        embedding.len(),
        "embedding dimension does not match the transform"
    );
    transform.q.row(transform.gender_axis).dot(&embedding)
}

/// Gender scores for a list of lemmas. Errors on lemmas missing from the
/// table.
pub fn score_lemmas(
    transform: &OrthogonalTransform,
    table: &EmbeddingTable,
    lemmas: impl IntoIterator<Item = impl AsRef<str>>,
) -> Result<Vec<(String, f64)>> {
    lemmas
        .into_iter()
        .map(|lemma| {
            let lemma = lemma.as_ref();
            let row = table.vector(lemma).ok_or_else(|| {
                Error::Config(format!("lemma `{lemma}` not in embedding vocabulary"))
            })?;
            Ok((lemma.to_string(), gender_score(transform, row)))
        })
        .collect()
}
