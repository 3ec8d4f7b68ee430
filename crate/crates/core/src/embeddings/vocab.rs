//! Frequency-filtered vocabularies over conditioned token streams.

use std::collections::HashMap;

use crate::corpus::normalize_token;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub count: u64,
}

/// A fixed vocabulary of word types with dense ids.
///
/// Ids are assigned by descending frequency, ties broken by first occurrence
/// in the stream. The ordering therefore depends only on the count profile
/// of the stream, never on token spelling: renaming every type consistently
/// leaves all ids unchanged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    total_count: u64,
}

impl Vocabulary {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i))
            .collect();
        let total_count = entries.iter().map(|e| e.count).sum();
        Vocabulary {
            entries,
            index,
            total_count,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Id for a token, after case normalization.
    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(&normalize_token(token)).copied()
    }

    pub fn entry(&self, id: usize) -> &VocabEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Total count over retained types.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }
}

/// Count types in a token stream and keep those with frequency ≥ min_count.
/// Tokens are case-normalized before counting.
pub fn build_vocab<I, T>(stream: I, min_count: u64) -> Vocabulary
where
    I: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    // (count, first occurrence index)
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    let mut next = 0usize;
    for token in stream {
        let token = normalize_token(token.as_ref());
        let slot = counts.entry(token).or_insert_with(|| {
            let idx = next;
            next += 1;
            (0, idx)
        });
        slot.0 += 1;
    }
    let mut kept: Vec<(String, u64, usize)> = counts
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(token, (count, first))| (token, count, first))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_entries(
        kept.into_iter()
            .map(|(token, count, _)| VocabEntry { token, count })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn counts_and_threshold() {
        let vocab = build_vocab(["a", "a", "b"], 1);
        assert_eq!(vocab.len(), 2);
        assert_eq!(vocab.entry(vocab.id("a").unwrap()).count, 2);
        assert_eq!(vocab.entry(vocab.id("b").unwrap()).count, 1);

        let vocab = build_vocab(["a", "a", "b"], 2);
        assert_eq!(vocab.len(), 1);
        assert!(vocab.id("b").is_none());
    }

    #[test]
    fn empty_stream_gives_empty_vocab() {
        let vocab = build_vocab(std::iter::empty::<&str>(), 1);
        assert!(vocab.is_empty());
    }

    #[test]
    fn case_variants_merge() {
        let vocab = build_vocab(["Der", "der", "DER"], 3);
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.id("der"), vocab.id("Der"));
    }

    #[test]
    fn ids_ordered_by_count_then_first_seen() {
        let vocab = build_vocab(["x", "y", "y", "z", "x"], 1);
        // y and x both occur twice; x was seen first.
        assert_eq!(vocab.id("x"), Some(0));
        assert_eq!(vocab.id("y"), Some(1));
        assert_eq!(vocab.id("z"), Some(2));
    }

    #[test]
    fn matches_independent_count_oracle_on_synthetic_stream() {
        // 10k tokens over a skewed distribution, checked against a plain
        // hash-count reimplementation.
        let mut tokens = Vec::new();
        let mut state = 88172645463325252u64;
        for _ in 0..10_000 {
            // xorshift, independent of any library rng
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let id = (state % 600) as usize;
            tokens.push(format!("w{}", id * id % 997));
        }
        let mut oracle: HashMap<String, u64> = HashMap::new();
        for t in &tokens {
            *oracle.entry(t.clone()).or_default() += 1;
        }
        let min_count = 5;
        let vocab = build_vocab(tokens.iter(), min_count);
        let expected: Vec<_> = oracle.iter().filter(|(_, &c)| c >= min_count).collect();
        assert_eq!(vocab.len(), expected.len());
        for (token, &count) in expected {
            let id = vocab.id(token).expect("retained type");
            assert_eq!(vocab.entry(id).count, count);
        }
    }
}
