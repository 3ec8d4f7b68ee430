//! Gender lexicons: extraction from morphological tags, the inanimate
//! concept list used for evaluation, and the repeated half/half splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{normalize_token, TaggedCorpus};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GenderLabel {
    Masculine,
    Feminine,
    Neuter,
}

impl GenderLabel {
    /// Read a gender value from a morphological tag. Accepts the usual
    /// treebank spellings, case-insensitively.
    pub fn from_feature_value(value: &str) -> Option<Self> {
        match value.to_lowercase().as_str() {
            "masc" | "masculine" | "m" => Some(GenderLabel::Masculine),
            "fem" | "feminine" | "f" => Some(GenderLabel::Feminine),
            "neut" | "neuter" | "n" => Some(GenderLabel::Neuter),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GenderLabel::Masculine => "masc",
            GenderLabel::Feminine => "fem",
            GenderLabel::Neuter => "neut",
        }
    }

    /// Binary class index: masculine 0, feminine 1. Also the numeric coding
    /// used for rank correlations.
    pub fn binary_index(self) -> usize {
        match self {
            GenderLabel::Masculine => 0,
            GenderLabel::Feminine => 1,
            GenderLabel::Neuter => panic!("neuter has no binary class"),
        }
    }
}

impl std::fmt::Display for GenderLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Map from noun lemma to its modal gender with the number of gendered
/// tokens that supported the decision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderLexicon {
    entries: BTreeMap<String, (GenderLabel, u64)>,
}

impl GenderLexicon {
    pub fn from_entries<I: IntoIterator<Item = (String, GenderLabel, u64)>>(entries: I) -> Self {
        GenderLexicon {
            entries: entries
                .into_iter()
                .map(|(lemma, gender, support)| (lemma, (gender, support)))
                .collect(),
        }
    }

    pub fn gender(&self, lemma: &str) -> Option<GenderLabel> {
        self.entries.get(lemma).map(|(g, _)| *g)
    }

    pub fn support(&self, lemma: &str) -> Option<u64> {
        self.entries.get(lemma).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lemma order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, GenderLabel, u64)> {
        self.entries
            .iter()
            .map(|(lemma, (gender, support))| (lemma.as_str(), *gender, *support))
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn to_writer<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (lemma, gender, support) in self.iter() {
            writeln!(w, "{lemma}\t{gender}\t{support}")?;
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Format(format!("read failed: {e}")))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse("lexicon", idx + 1, "expected 3 columns"));
            }
            let gender = GenderLabel::from_feature_value(fields[1]).ok_or_else(|| {
                Error::parse("lexicon", idx + 1, format!("unknown gender `{}`", fields[1]))
            })?;
            let support = fields[2]
                .parse::<u64>()
                .map_err(|_| Error::parse("lexicon", idx + 1, "bad support count"))?;
            entries.insert(fields[0].to_string(), (gender, support));
        }
        Ok(GenderLexicon { entries })
    }
}

/// Build the lemma→gender training lexicon from a tagged corpus.
///
/// Considers tokens with pos NOUN that carry a readable gender feature.
/// A lemma enters the lexicon when strictly more than `min_occurrences`
/// such tokens support it; its gender is the modal gender over those
/// tokens and lemmas whose modal gender is neuter are dropped. Exact ties
/// resolve feminine over masculine over neuter.
pub fn extract_gender_lexicon(corpus: &TaggedCorpus, min_occurrences: u64) -> GenderLexicon {
    let mut counts: HashMap<String, [u64; 3]> = HashMap::new();
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            if !token.is_noun() {
                continue;
            }
            let Some(gender) = token
                .morph
                .get("gender")
                .and_then(GenderLabel::from_feature_value)
            else {
                continue;
            };
            let lemma = normalize_token(&token.lemma);
            counts.entry(lemma).or_default()[gender as usize] += 1;
        }
    }

    let mut entries = BTreeMap::new();
    let mut ties = 0usize;
    for (lemma, by_gender) in counts {
        let total: u64 = by_gender.iter().sum();
        if total <= min_occurrences {
            continue;
        }
        // Precedence on exact ties: feminine, then masculine, then neuter.
        let order = [
            GenderLabel::Feminine,
            GenderLabel::Masculine,
            GenderLabel::Neuter,
        ];
        let mut modal = order[0];
        for g in order.into_iter().skip(1) {
            if by_gender[g as usize] > by_gender[modal as usize] {
                modal = g;
            }
        }
        if order
            .iter()
            .filter(|g| by_gender[**g as usize] == by_gender[modal as usize])
            .count()
            > 1
        {
            ties += 1;
            log::debug!("modal gender tie for lemma `{lemma}`: {by_gender:?}");
        }
        if modal == GenderLabel::Neuter {
            continue;
        }
        entries.insert(lemma, (modal, total));
    }
    if ties > 0 {
        log::info!("{ties} modal-gender ties resolved by precedence");
    }
    GenderLexicon { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Animacy {
    Animate,
    Inanimate,
}

/// One row of the concept lexicon used to pick evaluation nouns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptEntry {
    pub concept_id: String,
    pub gloss: String,
    pub lemma: String,
    pub animacy: Animacy,
    pub gold_gender: Option<GenderLabel>,
}

/// Parse a concept file: tab-separated
/// `concept_id  gloss  lemma  animacy  [gender]`, `#` comments allowed.
pub fn load_concepts<R: Read>(reader: R) -> Result<Vec<ConceptEntry>> {
    let reader = BufReader::new(reader);
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Format(format!("read failed: {e}")))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::parse(
                "concepts",
                lineno,
                "expected concept_id, gloss, lemma and animacy columns",
            ));
        }
        let animacy = match fields[3].to_lowercase().as_str() {
            "animate" => Animacy::Animate,
            "inanimate" => Animacy::Inanimate,
            other => {
                return Err(Error::parse(
                    "concepts",
                    lineno,
                    format!("unknown animacy `{other}`"),
                ))
            }
        };
        let gold_gender = match fields.get(4) {
            None | Some(&"") | Some(&"_") => None,
            Some(value) => Some(GenderLabel::from_feature_value(value).ok_or_else(|| {
                Error::parse("concepts", lineno, format!("unknown gender `{value}`"))
            })?),
        };
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::parse(
                "concepts",
                lineno,
                format!("duplicate concept id `{}`", fields[0]),
            ));
        }
        entries.push(ConceptEntry {
            concept_id: fields[0].to_string(),
            gloss: fields[1].to_string(),
            lemma: normalize_token(fields[2]),
            animacy,
            gold_gender,
        });
    }
    Ok(entries)
}

/// Keep only inanimate concepts.
pub fn filter_inanimate(entries: Vec<ConceptEntry>) -> Vec<ConceptEntry> {
    entries
        .into_iter()
        .filter(|e| e.animacy == Animacy::Inanimate)
        .collect()
}

/// One half/half partition of the evaluation lemmas.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub split_seed: u64,
}

/// Partition the evaluation lemmas in half `n_splits` times. Splits are
/// reproducible from `base_seed`; dev takes the extra lemma when the count
/// is odd.
pub fn make_eval_splits(
    eval_lemmas: &BTreeSet<String>,
    n_splits: usize,
    base_seed: u64,
) -> Result<Vec<EvalSplit>> {
    if eval_lemmas.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 evaluation lemmas to split, have {}",
            eval_lemmas.len()
        )));
    }
    let sorted: Vec<&String> = eval_lemmas.iter().collect();
    let mut splits = Vec::with_capacity(n_splits);
    for i in 0..n_splits {
        let split_seed = derive_seed(base_seed, &["eval-split", &i.to_string()]);
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
        let mut shuffled = sorted.clone();
        shuffled.shuffle(&mut rng);
        let dev_size = shuffled.len().div_ceil(2);
        let dev: BTreeSet<String> = shuffled[..dev_size].iter().map(|s| s.to_string()).collect();
        let test: BTreeSet<String> = shuffled[dev_size..].iter().map(|s| s.to_string()).collect();
        splits.push(EvalSplit {
            dev,
            test,
            split_seed,
        });
    }
    Ok(splits)
}

/// Remove the evaluation lemmas from a training lexicon.
pub fn exclude_eval_from_train(
    train: &GenderLexicon,
    eval_lemmas: &BTreeSet<String>,
) -> GenderLexicon {
    GenderLexicon {
        entries: train
            .entries
            .iter()
            .filter(|(lemma, _)| !eval_lemmas.contains(*lemma))
            .map(|(lemma, v)| (lemma.clone(), *v))
            .collect(),
    }
}
