//! Synthetic gendered-language corpora with controllable concord and a
//! controllable context-lemma bias.
//!
//! The generator plants a known lemma→gender table. With concord on,
//! determiner and adjective surface forms inflect deterministically for the
//! head noun's gender while their lemma columns stay the citation form, so
//! gender is recoverable from surface streams and absent from lemmatized
//! ones. The bias knob β couples context-lemma choice to noun gender: at
//! β = 0 the choice is independent, at β = 1 each noun only ever takes
//! context lemmas whose affinity matches its gender. That makes both the
//! positive and the null experimental outcome testable against ground
//! truth.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{MorphBundle, TaggedCorpus, TaggedSentence, TaggedToken};
use crate::error::{Error, Result};
use crate::lexicon::GenderLabel;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Determiner,
    Adjective,
    Noun,
    Verb,
    Adposition,
}

impl SlotKind {
    fn pos(self) -> &'static str {
        match self {
            SlotKind::Determiner => "DET",
            SlotKind::Adjective => "ADJ",
            SlotKind::Noun => "NOUN",
            SlotKind::Verb => "VERB",
            SlotKind::Adposition => "ADP",
        }
    }
}

/// Slot sequence of every generated sentence. The default mimics a
/// two-noun-phrase clause: determiner, adjective, noun, verb, adposition,
/// determiner, noun.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceTemplate {
    pub slots: Vec<SlotKind>,
}

impl Default for SentenceTemplate {
    fn default() -> Self {
        use SlotKind::*;
        SentenceTemplate {
            slots: vec![Determiner, Adjective, Noun, Verb, Adposition, Determiner, Noun],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_noun_lemmas: usize,
    /// Fraction of noun lemmas that are feminine, in (0, 1).
    pub gender_balance: f64,
    /// Context lemmas split round-robin over the adjective, verb and
    /// adposition categories used by the template.
    pub n_context_lemmas: usize,
    pub concord: bool,
    /// β: 0 = context lemmata independent of gender, 1 = fully determined.
    pub whorf_strength: f64,
    pub n_sentences: usize,
    pub sentence_template: SentenceTemplate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_noun_lemmas: 400,
            gender_balance: 0.5,
            n_context_lemmas: 90,
            concord: true,
            whorf_strength: 0.0,
            n_sentences: 200_000,
            sentence_template: SentenceTemplate::default(),
            seed: 1,
        }
    }
}

impl SynthSpec {
    /// Parse a generator spec file: a `[synth]` section with `key = value`
    /// lines; `template` lists slot names separated by spaces.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        let mut in_section = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                in_section = line == "[synth]";
                if !in_section {
                    return Err(Error::parse(origin, lineno, "expected section [synth]"));
                }
                continue;
            }
            if !in_section {
                return Err(Error::parse(origin, lineno, "values must follow [synth]"));
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(origin, lineno, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::parse(origin, lineno, format!("bad {what} `{value}`"));
            match key {
                "n_noun_lemmas" => spec.n_noun_lemmas = value.parse().map_err(|_| bad("count"))?,
                "gender_balance" => {
                    spec.gender_balance = value.parse().map_err(|_| bad("fraction"))?
                }
                "n_context_lemmas" => {
                    spec.n_context_lemmas = value.parse().map_err(|_| bad("count"))?
                }
                "concord" => {
                    spec.concord = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => return Err(bad("boolean")),
                    }
                }
                "whorf_strength" => {
                    spec.whorf_strength = value.parse().map_err(|_| bad("strength"))?
                }
                "n_sentences" => spec.n_sentences = value.parse().map_err(|_| bad("count"))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
                "template" => {
                    let slots: Result<Vec<SlotKind>> = value
                        .split_whitespace()
                        .map(|name| match name {
                            "determiner" => Ok(SlotKind::Determiner),
                            "adjective" => Ok(SlotKind::Adjective),
                            "noun" => Ok(SlotKind::Noun),
                            "verb" => Ok(SlotKind::Verb),
                            "adposition" => Ok(SlotKind::Adposition),
                            other => Err(Error::parse(
                                origin,
                                lineno,
                                format!("unknown slot `{other}`"),
                            )),
                        })
                        .collect();
                    spec.sentence_template = SentenceTemplate { slots: slots? };
                }
                other => {
                    return Err(Error::parse(origin, lineno, format!("unknown key `{other}`")))
                }
            }
        }
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// The planted tables: noun genders and context-lemma affinities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthGroundTruth {
    pub genders: BTreeMap<String, GenderLabel>,
    pub affinities: BTreeMap<String, GenderLabel>,
}

impl SynthGroundTruth {
    pub fn to_writer<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (lemma, gender) in &self.genders {
            writeln!(w, "noun\t{lemma}\t{gender}")?;
        }
        for (lemma, affinity) in &self.affinities {
            writeln!(w, "context\t{lemma}\t{affinity}")?;
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut truth = SynthGroundTruth::default();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::Format(format!("read failed: {e}")))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse("ground-truth", idx + 1, "expected 3 columns"));
            }
            let label = GenderLabel::from_feature_value(fields[2]).ok_or_else(|| {
                Error::parse("ground-truth", idx + 1, format!("bad gender `{}`", fields[2]))
            })?;
            match fields[0] {
                "noun" => truth.genders.insert(fields[1].into(), label),
                "context" => truth.affinities.insert(fields[1].into(), label),
                other => {
                    return Err(Error::parse(
                        "ground-truth",
                        idx + 1,
                        format!("unknown row kind `{other}`"),
                    ))
                }
            };
        }
        Ok(truth)
    }
}

/// Zipf(1.0) sampler over ranked items.
struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    fn new(n: usize) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for rank in 0..n {
            total += 1.0 / (rank + 1) as f64;
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        ZipfTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c < u)
    }
}

/// One open-class category: ranked lemmas with per-affinity sub-tables.
struct Category {
    lemmas: Vec<String>,
    affinities: Vec<GenderLabel>,
    all: ZipfTable,
    // Ranked indices of each affinity class, with a Zipf table over them.
    masc_members: Vec<usize>,
    fem_members: Vec<usize>,
    masc_table: ZipfTable,
    fem_table: ZipfTable,
}

impl Category {
    fn new(prefix: &str, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(format!(
                "sentence template uses the `{prefix}` category but no lemmas were allotted to it"
            )));
        }
        let lemmas: Vec<String> = (0..n).map(|i| format!("{prefix}{i:03}")).collect();
        // Alternating affinity down the frequency ranks keeps both classes
        // populated at every frequency stratum.
        let affinities: Vec<GenderLabel> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    GenderLabel::Masculine
                } else {
                    GenderLabel::Feminine
                }
            })
            .collect();
        let masc_members: Vec<usize> = (0..n).step_by(2).collect();
        let fem_members: Vec<usize> = (1..n).step_by(2).collect();
        if masc_members.is_empty() || fem_members.is_empty() {
            return Err(Error::Config(format!(
                "category `{prefix}` needs at least 2 lemmas to carry both affinities"
            )));
        }
        Ok(Category {
            all: ZipfTable::new(n),
            masc_table: ZipfTable::new(masc_members.len()),
            fem_table: ZipfTable::new(fem_members.len()),
            lemmas,
            affinities,
            masc_members,
            fem_members,
        })
    }

    /// Sample a lemma index, biased toward the gender-affine class with
    /// probability (1+β)/2.
    fn sample<R: Rng>(&self, rng: &mut R, gender: GenderLabel, beta: f64) -> usize {
        if beta == 0.0 {
            return self.all.sample(rng);
        }
        let affine = rng.gen::<f64>() < (1.0 + beta) / 2.0;
        let want = if affine {
            gender
        } else if gender == GenderLabel::Masculine {
            GenderLabel::Feminine
        } else {
            GenderLabel::Masculine
        };
        match want {
            GenderLabel::Masculine => self.masc_members[self.masc_table.sample(rng)],
            _ => self.fem_members[self.fem_table.sample(rng)],
        }
    }
}

struct Generator {
    spec: SynthSpec,
    rng: ChaCha8Rng,
    noun_lemmas: Vec<String>,
    noun_genders: Vec<GenderLabel>,
    noun_table: ZipfTable,
    determiners: Vec<String>,
    adjectives: Option<Category>,
    verbs: Option<Category>,
    adpositions: Option<Category>,
    /// For each slot, the index of its associated noun slot.
    association: Vec<usize>,
}

const N_DETERMINERS: usize = 3;

impl Generator {
    fn new(spec: &SynthSpec) -> Result<Self> {
        if spec.n_noun_lemmas < 2 {
            return Err(Error::Config("need at least 2 noun lemmas".into()));
        }
        if !(spec.gender_balance > 0.0 && spec.gender_balance < 1.0) {
            return Err(Error::Config("gender_balance must lie strictly in (0,1)".into()));
        }
        if !(0.0..=1.0).contains(&spec.whorf_strength) {
            return Err(Error::Config("whorf_strength must lie in [0,1]".into()));
        }
        let slots = &spec.sentence_template.slots;
        if slots.is_empty() {
            return Err(Error::Config("empty sentence template".into()));
        }
        if !slots.contains(&SlotKind::Noun) {
            return Err(Error::Config(
                "sentence template references no noun slot to agree with".into(),
            ));
        }

        // Nearest noun slot for every position; ties toward the following
        // noun (an adposition introduces the next noun phrase).
        let noun_positions: Vec<usize> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == SlotKind::Noun)
            .map(|(i, _)| i)
            .collect();
        let association: Vec<usize> = (0..slots.len())
            .map(|i| {
                *noun_positions
                    .iter()
                    .min_by_key(|&&p| {
                        let dist = p.abs_diff(i);
                        // Following nouns win ties.
                        (dist, p < i)
                    })
                    .unwrap()
            })
            .collect();

        // Planted genders: exact class counts, positions shuffled.
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &["synth"]));
        let n = spec.n_noun_lemmas;
        let n_fem = ((n as f64 * spec.gender_balance).round() as usize).clamp(1, n - 1);
        let mut noun_genders = vec![GenderLabel::Feminine; n_fem];
        noun_genders.extend(std::iter::repeat(GenderLabel::Masculine).take(n - n_fem));
        noun_genders.shuffle(&mut rng);
        let noun_lemmas: Vec<String> = (0..n).map(|i| format!("n{i:03}")).collect();

        // Context lemmas split round-robin over the categories the template
        // uses, in adjective, verb, adposition order.
        let mut used: Vec<SlotKind> = Vec::new();
        for kind in [SlotKind::Adjective, SlotKind::Verb, SlotKind::Adposition] {
            if slots.contains(&kind) {
                used.push(kind);
            }
        }
        let mut allot = vec![0usize; used.len()];
        if !used.is_empty() {
            for i in 0..spec.n_context_lemmas {
                allot[i % used.len()] += 1;
            }
        }
        let mut adjectives = None;
        let mut verbs = None;
        let mut adpositions = None;
        for (kind, count) in used.iter().zip(&allot) {
            let category = match kind {
                SlotKind::Adjective => &mut adjectives,
                SlotKind::Verb => &mut verbs,
                SlotKind::Adposition => &mut adpositions,
                _ => unreachable!(),
            };
            let prefix = match kind {
                SlotKind::Adjective => "a",
                SlotKind::Verb => "v",
                SlotKind::Adposition => "p",
                _ => unreachable!(),
            };
            *category = Some(Category::new(prefix, *count)?);
        }

        Ok(Generator {
            spec: spec.clone(),
            rng,
            noun_lemmas,
            noun_genders,
            noun_table: ZipfTable::new(n),
            determiners: (0..N_DETERMINERS).map(|i| format!("d{i}")).collect(),
            adjectives,
            verbs,
            adpositions,
            association,
        })
    }

    fn ground_truth(&self) -> SynthGroundTruth {
        let mut truth = SynthGroundTruth::default();
        for (lemma, gender) in self.noun_lemmas.iter().zip(&self.noun_genders) {
            truth.genders.insert(lemma.clone(), *gender);
        }
        for category in [&self.adjectives, &self.verbs, &self.adpositions]
            .into_iter()
            .flatten()
        {
            for (lemma, affinity) in category.lemmas.iter().zip(&category.affinities) {
                truth.affinities.insert(lemma.clone(), *affinity);
            }
        }
        truth
    }

    fn concord_form(&self, lemma: &str, gender: GenderLabel) -> String {
        match gender {
            GenderLabel::Feminine => format!("{lemma}f"),
            _ => format!("{lemma}m"),
        }
    }

    fn next_sentence(&mut self) -> TaggedSentence {
        let slots = self.spec.sentence_template.slots.clone();
        // First pass: nouns.
        let mut noun_choice: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, slot) in slots.iter().enumerate() {
            if *slot == SlotKind::Noun {
                noun_choice.insert(i, self.noun_table.sample(&mut self.rng));
            }
        }
        let gender_at = |slot: usize, choices: &BTreeMap<usize, usize>| {
            self.noun_genders[choices[&self.association[slot]]]
        };

        let beta = self.spec.whorf_strength;
        let mut tokens = Vec::with_capacity(slots.len());
        for (i, slot) in slots.iter().enumerate() {
            let gender = gender_at(i, &noun_choice);
            let token = match slot {
                SlotKind::Noun => {
                    let lemma = self.noun_lemmas[noun_choice[&i]].clone();
                    let mut morph = MorphBundle::new();
                    morph.insert("gender", gender.name()).unwrap();
                    TaggedToken {
                        form: lemma.clone(),
                        lemma,
                        pos: "NOUN".into(),
                        morph,
                        lemma_missing: false,
                    }
                }
                SlotKind::Determiner => {
                    let lemma =
                        self.determiners[self.rng.gen_range(0..self.determiners.len())].clone();
                    self.inflected(lemma, gender, SlotKind::Determiner)
                }
                SlotKind::Adjective => {
                    let category = self.adjectives.as_ref().expect("validated template");
                    let idx = category.sample(&mut self.rng, gender, beta);
                    let lemma = category.lemmas[idx].clone();
                    self.inflected(lemma, gender, SlotKind::Adjective)
                }
                SlotKind::Verb | SlotKind::Adposition => {
                    let category = match slot {
                        SlotKind::Verb => self.verbs.as_ref(),
                        _ => self.adpositions.as_ref(),
                    }
                    .expect("validated template");
                    let idx = category.sample(&mut self.rng, gender, beta);
                    let lemma = category.lemmas[idx].clone();
                    TaggedToken {
                        form: lemma.clone(),
                        lemma,
                        pos: slot.pos().into(),
                        morph: MorphBundle::new(),
                        lemma_missing: false,
                    }
                }
            };
            tokens.push(token);
        }
        TaggedSentence { tokens }
    }

    /// Determiners and adjectives inflect for gender under concord; their
    /// lemma column stays the citation form.
    fn inflected(&self, lemma: String, gender: GenderLabel, kind: SlotKind) -> TaggedToken {
        if self.spec.concord {
            let mut morph = MorphBundle::new();
            morph.insert("gender", gender.name()).unwrap();
            TaggedToken {
                form: self.concord_form(&lemma, gender),
                lemma,
                pos: kind.pos().into(),
                morph,
                lemma_missing: false,
            }
        } else {
            TaggedToken {
                form: lemma.clone(),
                lemma,
                pos: kind.pos().into(),
                morph: MorphBundle::new(),
                lemma_missing: false,
            }
        }
    }

    fn provenance(&self) -> String {
        format!(
            "synthetic corpus seed={} beta={} concord={}",
            self.spec.seed, self.spec.whorf_strength, self.spec.concord
        )
    }

    fn tagset(&self) -> std::collections::BTreeSet<String> {
        ["DET", "ADJ", "NOUN", "VERB", "ADP"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
}

/// Generate an in-memory corpus with its ground truth.
pub fn generate_corpus(spec: &SynthSpec) -> Result<(TaggedCorpus, SynthGroundTruth)> {
    let mut generator = Generator::new(spec)?;
    let truth = generator.ground_truth();
    let sentences: Vec<TaggedSentence> =
        (0..spec.n_sentences).map(|_| generator.next_sentence()).collect();
    let corpus = TaggedCorpus::new(
        sentences,
        "syn".into(),
        generator.provenance(),
        Some(generator.tagset()),
    );
    Ok((corpus, truth))
}

/// Stream a generated corpus to a writer without materializing it.
pub fn generate_to_writer<W: Write>(spec: &SynthSpec, w: &mut W) -> Result<SynthGroundTruth> {
    let mut generator = Generator::new(spec)?;
    let truth = generator.ground_truth();
    let header = format!(
        "# language: syn\n# source: {}\n# tagset: {}\n",
        generator.provenance(),
        generator
            .tagset()
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join(" ")
    );
    w.write_all(header.as_bytes())
        .map_err(|e| Error::Format(format!("write failed: {e}")))?;
    let mut line = String::new();
    for _ in 0..spec.n_sentences {
        let sentence = generator.next_sentence();
        line.clear();
        for t in &sentence.tokens {
            let feats = if t.morph.is_empty() {
                "_".to_string()
            } else {
                t.morph
                    .iter()
                    .map(|f| format!("{}={}", f.attribute, f.value))
                    .collect::<Vec<_>>()
                    .join("|")
            };
            line.push_str(&format!("{}\t{}\t{}\t{}\n", t.form, t.lemma, t.pos, feats));
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::Format(format!("write failed: {e}")))?;
    }
    Ok(truth)
}

/// Pick an evaluation subset of the planted nouns and emit it in the
/// concept-file format (all entries inanimate, gold gender attached).
pub fn write_concepts<W: Write>(
    truth: &SynthGroundTruth,
    eval_fraction: f64,
    seed: u64,
    w: &mut W,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&eval_fraction) {
        return Err(Error::Config("eval_fraction must lie in [0,1]".into()));
    }
    let mut lemmas: Vec<&String> = truth.genders.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["synth-concepts"]));
    lemmas.shuffle(&mut rng);
    let take = (lemmas.len() as f64 * eval_fraction).round() as usize;
    let mut chosen: Vec<&String> = lemmas.into_iter().take(take).collect();
    chosen.sort();
    for lemma in &chosen {
        let gender = truth.genders[*lemma];
        writeln!(w, "{lemma}::N\t{lemma}\t{lemma}\tinanimate\t{gender}")
            .map_err(|e| Error::Format(format!("write failed: {e}")))?;
    }
    Ok(take)
}

/// Per-lemma disagreement between corpus tags and the planted table.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthMismatch {
    pub lemma: String,
    pub expected: Option<GenderLabel>,
    pub deviating_tokens: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TruthDiagnostics {
    pub mismatches: Vec<TruthMismatch>,
    /// Planted lemmas that never occur in the corpus.
    pub unseen: Vec<String>,
    pub checked_tokens: u64,
}

impl TruthDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recompute genders from corpus tags and compare with the planted table;
/// every noun token must agree exactly.
pub fn verify_ground_truth(corpus: &TaggedCorpus, truth: &SynthGroundTruth) -> TruthDiagnostics {
    let mut deviating: BTreeMap<String, u64> = BTreeMap::new();
    let mut seen: BTreeMap<&str, bool> = truth.genders.keys().map(|k| (k.as_str(), false)).collect();
    let mut checked = 0u64;
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            if !token.is_noun() {
                continue;
            }
            checked += 1;
            let tagged = token
                .morph
                .get("gender")
                .and_then(GenderLabel::from_feature_value);
            if let Some(flag) = seen.get_mut(token.lemma.as_str()) {
                *flag = true;
            }
            let expected = truth.genders.get(&token.lemma).copied();
            if expected.is_none() || tagged != expected {
                *deviating.entry(token.lemma.clone()).or_default() += 1;
            }
        }
    }
    TruthDiagnostics {
        mismatches: deviating
            .into_iter()
            .map(|(lemma, count)| TruthMismatch {
                expected: truth.genders.get(&lemma).copied(),
                lemma,
                deviating_tokens: count,
            })
            .collect(),
        unseen: seen
            .into_iter()
            .filter(|(_, seen)| !seen)
            .map(|(lemma, _)| lemma.to_string())
            .collect(),
        checked_tokens: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::extract_gender_lexicon;
    use std::collections::HashMap;

    fn small_spec(beta: f64, concord: bool, sentences: usize) -> SynthSpec {
        SynthSpec {
            n_noun_lemmas: 40,
            n_context_lemmas: 30,
            whorf_strength: beta,
            concord,
            n_sentences: sentences,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = small_spec(0.3, true, 200);
        let (a, ta) = generate_corpus(&spec).unwrap();
        let (b, tb) = generate_corpus(&spec).unwrap();
        assert_eq!(a.sentences, b.sentences);
        assert_eq!(ta, tb);
    }

    #[test]
    fn streaming_writer_matches_in_memory_corpus() {
        let spec = small_spec(0.0, true, 50);
        let (corpus, truth_a) = generate_corpus(&spec).unwrap();
        let mut buf = Vec::new();
        let truth_b = generate_to_writer(&spec, &mut buf).unwrap();
        assert_eq!(truth_a, truth_b);
        let reparsed = crate::corpus::parse_tagged_corpus(buf.as_slice(), "stream").unwrap();
        assert_eq!(reparsed.sentences, corpus.sentences);
        assert_eq!(reparsed.language, "syn");
        assert!(reparsed.tagset.is_some());
    }

    #[test]
    fn concord_forms_are_a_deterministic_function_of_gender() {
        let spec = small_spec(0.0, true, 500);
        let (corpus, truth) = generate_corpus(&spec).unwrap();
        // form(det lemma, noun gender) must be single-valued, and the lemma
        // column must stay the bare citation form.
        let mut seen: HashMap<(String, GenderLabel), String> = HashMap::new();
        for sentence in &corpus.sentences {
            let nouns: Vec<&TaggedToken> =
                sentence.tokens.iter().filter(|t| t.is_noun()).collect();
            for (i, token) in sentence.tokens.iter().enumerate() {
                if token.pos != "DET" && token.pos != "ADJ" {
                    continue;
                }
                // In the default template the associated noun is the nearest
                // following one.
                let noun = nouns
                    .iter()
                    .find(|n| {
                        sentence.tokens.iter().position(|t| std::ptr::eq(t, **n)).unwrap() > i
                    })
                    .unwrap();
                let gender = truth.genders[&noun.lemma];
                let prior = seen
                    .entry((token.lemma.clone(), gender))
                    .or_insert_with(|| token.form.clone());
                assert_eq!(prior, &token.form, "concord form must be deterministic");
                assert!(token.form.starts_with(token.lemma.as_str()));
                assert_ne!(token.form, token.lemma, "concord inflects the surface form");
            }
        }
        // Both genders produce distinct forms for the same determiner lemma.
        let d0_m = seen.get(&("d0".to_string(), GenderLabel::Masculine));
        let d0_f = seen.get(&("d0".to_string(), GenderLabel::Feminine));
        assert_ne!(d0_m, d0_f);
    }

    #[test]
    fn without_concord_forms_equal_lemmas() {
        let spec = small_spec(0.0, false, 100);
        let (corpus, _) = generate_corpus(&spec).unwrap();
        for token in corpus.sentences.iter().flat_map(|s| &s.tokens) {
            assert_eq!(token.form, token.lemma);
        }
    }

    /// Plug-in mutual information (bits) between context lemma and the
    /// associated noun's gender.
    fn context_gender_mi(corpus: &TaggedCorpus, truth: &SynthGroundTruth) -> f64 {
        let mut joint: HashMap<(String, GenderLabel), f64> = HashMap::new();
        let mut by_lemma: HashMap<String, f64> = HashMap::new();
        let mut by_gender: HashMap<GenderLabel, f64> = HashMap::new();
        let mut total = 0.0;
        for sentence in &corpus.sentences {
            // Default template: positions 2 and 6 are nouns; adjective@1 and
            // verb@3 pair with noun@2, adposition@4 with noun@6.
            let pairs = [(1usize, 2usize), (3, 2), (4, 6)];
            for (ctx, noun) in pairs {
                let lemma = sentence.tokens[ctx].lemma.clone();
                let gender = truth.genders[&sentence.tokens[noun].lemma];
                *joint.entry((lemma.clone(), gender)).or_default() += 1.0;
                *by_lemma.entry(lemma).or_default() += 1.0;
                *by_gender.entry(gender).or_default() += 1.0;
                total += 1.0;
            }
        }
        let mut mi = 0.0;
        for ((lemma, gender), count) in &joint {
            let p_xy = count / total;
            let p_x = by_lemma[lemma] / total;
            let p_y = by_gender[gender] / total;
            mi += p_xy * (p_xy / (p_x * p_y)).log2();
        }
        mi
    }

    #[test]
    fn beta_zero_context_choice_carries_no_gender_information() {
        let spec = SynthSpec {
            n_noun_lemmas: 40,
            n_context_lemmas: 45,
            whorf_strength: 0.0,
            n_sentences: 30_000,
            seed: 3,
            ..SynthSpec::default()
        };
        let (corpus, truth) = generate_corpus(&spec).unwrap();
        let mi = context_gender_mi(&corpus, &truth);
        assert!(mi < 0.01, "plug-in MI = {mi} bits");
    }

    #[test]
    fn beta_one_restricts_contexts_to_affine_lemmas() {
        let spec = SynthSpec {
            n_noun_lemmas: 20,
            n_context_lemmas: 30,
            whorf_strength: 1.0,
            n_sentences: 2000,
            seed: 5,
            ..SynthSpec::default()
        };
        let (corpus, truth) = generate_corpus(&spec).unwrap();
        for sentence in &corpus.sentences {
            for (ctx, noun) in [(1usize, 2usize), (3, 2), (4, 6)] {
                let affinity = truth.affinities[&sentence.tokens[ctx].lemma];
                let gender = truth.genders[&sentence.tokens[noun].lemma];
                assert_eq!(affinity, gender);
            }
        }
    }

    #[test]
    fn fresh_corpus_verifies_cleanly() {
        let spec = small_spec(0.4, true, 300);
        let (corpus, truth) = generate_corpus(&spec).unwrap();
        let diagnostics = verify_ground_truth(&corpus, &truth);
        assert!(diagnostics.is_clean());
        assert!(diagnostics.checked_tokens > 0);
    }

    #[test]
    fn one_flipped_tag_yields_exactly_one_mismatch() {
        let spec = small_spec(0.0, true, 300);
        let (mut corpus, truth) = generate_corpus(&spec).unwrap();
        let token = corpus.sentences[7]
            .tokens
            .iter_mut()
            .find(|t| t.is_noun())
            .unwrap();
        let flipped = match truth.genders[&token.lemma] {
            GenderLabel::Feminine => "masc",
            _ => "fem",
        };
        let lemma = token.lemma.clone();
        token.morph = MorphBundle::new();
        token.morph.insert("gender", flipped).unwrap();
        let diagnostics = verify_ground_truth(&corpus, &truth);
        assert_eq!(diagnostics.mismatches.len(), 1);
        assert_eq!(diagnostics.mismatches[0].lemma, lemma);
        assert_eq!(diagnostics.mismatches[0].deviating_tokens, 1);
    }

    #[test]
    fn extracted_lexicon_equals_planted_table() {
        let spec = SynthSpec {
            n_noun_lemmas: 60,
            n_context_lemmas: 30,
            n_sentences: 8000,
            seed: 21,
            ..SynthSpec::default()
        };
        let (corpus, truth) = generate_corpus(&spec).unwrap();
        // Threshold 0: every observed noun lemma enters.
        let lexicon = extract_gender_lexicon(&corpus, 0);
        assert_eq!(lexicon.len(), truth.genders.len());
        for (lemma, gender) in &truth.genders {
            assert_eq!(lexicon.gender(lemma), Some(*gender), "lemma {lemma}");
        }
    }

    #[test]
    fn noun_frequencies_match_zipf_by_chi_square() {
        let spec = SynthSpec {
            n_noun_lemmas: 50,
            n_context_lemmas: 30,
            n_sentences: 40_000,
            seed: 9,
            ..SynthSpec::default()
        };
        let (corpus, _) = generate_corpus(&spec).unwrap();
        assert_eq!(corpus.sentences.len(), 40_000);
        let mut counts: HashMap<&str, f64> = HashMap::new();
        let mut total = 0.0;
        for token in corpus.sentences.iter().flat_map(|s| &s.tokens) {
            if token.is_noun() {
                *counts.entry(token.lemma.as_str()).or_default() += 1.0;
                total += 1.0;
            }
        }
        let harmonic: f64 = (1..=50).map(|r| 1.0 / r as f64).sum();
        let mut chi2 = 0.0;
        for rank in 0..50usize {
            let expected = total * (1.0 / (rank + 1) as f64) / harmonic;
            let observed = counts
                .get(format!("n{rank:03}").as_str())
                .copied()
                .unwrap_or(0.0);
            chi2 += (observed - expected).powi(2) / expected;
        }
        // Wilson–Hilferty critical value at p = 0.01, df = 49.
        let df = 49.0f64;
        let z = 2.3263478740408408;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} ≥ critical {crit}");
    }

    #[test]
    fn template_without_category_lemmas_is_an_error() {
        let spec = SynthSpec {
            n_context_lemmas: 0,
            ..small_spec(0.0, true, 10)
        };
        assert!(matches!(generate_corpus(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn spec_file_parses_and_rejects_unknown_keys() {
        let text = "\
[synth]
n_noun_lemmas = 120
gender_balance = 0.4
n_context_lemmas = 33
concord = false
whorf_strength = 0.6
n_sentences = 5000
seed = 99
template = determiner noun verb
";
        let spec = SynthSpec::parse(text, "test").unwrap();
        assert_eq!(spec.n_noun_lemmas, 120);
        assert!(!spec.concord);
        assert_eq!(spec.whorf_strength, 0.6);
        assert_eq!(spec.sentence_template.slots.len(), 3);
        assert!(SynthSpec::parse("[synth]\nnope = 1\n", "test").is_err());
    }

    #[test]
    fn concepts_file_covers_the_requested_fraction() {
        let spec = small_spec(0.0, true, 10);
        let (_, truth) = generate_corpus(&spec).unwrap();
        let mut buf = Vec::new();
        let n = write_concepts(&truth, 0.5, 7, &mut buf).unwrap();
        assert_eq!(n, 20);
        let concepts = crate::lexicon::load_concepts(buf.as_slice()).unwrap();
        assert_eq!(concepts.len(), 20);
        for entry in &concepts {
            assert_eq!(entry.gold_gender, Some(truth.genders[&entry.lemma]));
        }
    }
}
