//! Morphologically tagged corpora and the lemmatization conditions.
//!
//! A corpus is a sequence of sentences whose tokens carry a surface form, a
//! lemma, a part-of-speech tag and a bundle of `attr=val` morphological
//! features. The file format is line oriented: one token per line with four
//! tab-separated columns (form, lemma, pos, features), a blank line ending
//! each sentence, and `#`-prefixed comment lines. Three comment directives
//! are recognized: `# language: <code>`, `# source: <note>` and
//! `# tagset: <TAG TAG ...>`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Placeholder column value for an empty feature bundle or missing lemma.
const EMPTY_COLUMN: &str = "_";

/// One `attribute=value` morphological feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MorphFeature {
    pub attribute: String,
    pub value: String,
}

/// The feature bundle of one token. Insertion order is preserved for
/// serialization; equality and lookup treat the bundle as a set keyed by
/// attribute.
#[derive(Debug, Clone, Default)]
pub struct MorphBundle {
    features: Vec<MorphFeature>,
}

impl MorphBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a feature; attributes are lowercased. Errors if the attribute
    /// is already present.
    pub fn insert(&mut self, attribute: &str, value: &str) -> Result<()> {
        let attribute = attribute.to_lowercase();
        if attribute.is_empty() || value.is_empty() {
            return Err(Error::Format(
                "morphological feature with empty attribute or value".into(),
            ));
        }
        if self.get(&attribute).is_some() {
            return Err(Error::Format(format!(
                "duplicate morphological attribute `{attribute}`"
            )));
        }
        self.features.push(MorphFeature {
            attribute,
            value: value.to_string(),
        });
        Ok(())
    }

    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.features
            .iter()
            .find(|f| f.attribute == attribute)
            .map(|f| f.value.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MorphFeature> {
        self.features.iter()
    }
}

impl PartialEq for MorphBundle {
    fn eq(&self, other: &Self) -> bool {
        if self.features.len() != other.features.len() {
            return false;
        }
        self.features
            .iter()
            .all(|f| other.get(&f.attribute) == Some(f.value.as_str()))
    }
}

impl Eq for MorphBundle {}

/// One corpus position: surface form, lemma, part of speech, features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub form: String,
    pub lemma: String,
    pub pos: String,
    pub morph: MorphBundle,
    /// True when the source had no lemma annotation; `lemma` then holds the
    /// surface form so lemmatizing conditions fall back instead of dropping
    /// the token.
    pub lemma_missing: bool,
}

impl TaggedToken {
    pub fn is_noun(&self) -> bool {
        self.pos == "NOUN"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<TaggedToken>,
}

/// A parsed corpus. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TaggedCorpus {
    pub sentences: Vec<TaggedSentence>,
    pub language: String,
    pub provenance: String,
    pub tagset: Option<BTreeSet<String>>,
    missing_lemmas: usize,
}

/// The four corpus rewrites controlling which tokens expose inflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConditionKind {
    Forms,
    Lemmata,
    Nouns,
    NotNouns,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 4] = [
        ConditionKind::Forms,
        ConditionKind::Lemmata,
        ConditionKind::Nouns,
        ConditionKind::NotNouns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::Forms => "forms",
            ConditionKind::Lemmata => "lemmata",
            ConditionKind::Nouns => "nouns",
            ConditionKind::NotNouns => "not_nouns",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forms" => Ok(ConditionKind::Forms),
            "lemmata" => Ok(ConditionKind::Lemmata),
            "nouns" => Ok(ConditionKind::Nouns),
            "not_nouns" | "not-nouns" => Ok(ConditionKind::NotNouns),
            other => Err(Error::Config(format!(
                "unknown condition `{other}` (expected forms, lemmata, nouns or not_nouns)"
            ))),
        }
    }
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl TaggedCorpus {
    pub fn new(
        sentences: Vec<TaggedSentence>,
        language: String,
        provenance: String,
        tagset: Option<BTreeSet<String>>,
    ) -> Self {
        let missing_lemmas = sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.lemma_missing)
            .count();
        TaggedCorpus {
            sentences,
            language,
            provenance,
            tagset,
            missing_lemmas,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// Number of tokens whose lemma column was missing in the source.
    pub fn missing_lemma_count(&self) -> usize {
        self.missing_lemmas
    }

    /// Serialize in the canonical file format. Parsing the output yields an
    /// equal corpus, byte for byte for files already in canonical form.
    pub fn to_writer<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.language != "und" {
            writeln!(w, "# language: {}", self.language)?;
        }
        if !self.provenance.is_empty() {
            writeln!(w, "# source: {}", self.provenance)?;
        }
        if let Some(tagset) = &self.tagset {
            let tags: Vec<&str> = tagset.iter().map(|t| t.as_str()).collect();
            writeln!(w, "# tagset: {}", tags.join(" "))?;
        }
        for sentence in &self.sentences {
            for token in &sentence.tokens {
                let lemma = if token.lemma_missing {
                    EMPTY_COLUMN
                } else {
                    token.lemma.as_str()
                };
                let feats = if token.morph.is_empty() {
                    EMPTY_COLUMN.to_string()
                } else {
                    let mut out = String::new();
                    for (i, f) in token.morph.iter().enumerate() {
                        if i > 0 {
                            out.push('|');
                        }
                        let _ = write!(out, "{}={}", f.attribute, f.value);
                    }
                    out
                };
                writeln!(w, "{}\t{}\t{}\t{}", token.form, lemma, token.pos, feats)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_string_canonical(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("corpus is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(&mut file).map_err(|e| Error::io(path, e))
    }
}

/// Parse the tagged-corpus file format. `origin` names the source in errors.
pub fn parse_tagged_corpus<R: Read>(reader: R, origin: &str) -> Result<TaggedCorpus> {
    let reader = BufReader::new(reader);
    let mut sentences = Vec::new();
    let mut current: Vec<TaggedToken> = Vec::new();
    let mut language: Option<String> = None;
    let mut provenance: Option<String> = None;
    let mut tagset: Option<BTreeSet<String>> = None;
    let mut missing_lemmas = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("language:") {
                language.get_or_insert_with(|| value.trim().to_string());
            } else if let Some(value) = comment.strip_prefix("source:") {
                provenance.get_or_insert_with(|| value.trim().to_string());
            } else if let Some(value) = comment.strip_prefix("tagset:") {
                tagset.get_or_insert_with(|| {
                    value.split_whitespace().map(|t| t.to_string()).collect()
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(TaggedSentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }

        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 4 {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected 4 tab-separated columns, found {}", columns.len()),
            ));
        }
        let (form, lemma_col, pos, feats) = (columns[0], columns[1], columns[2], columns[3]);
        if form.is_empty() {
            return Err(Error::parse(origin, lineno, "empty form column"));
        }
        if lemma_col.is_empty() {
            return Err(Error::parse(origin, lineno, "empty lemma column"));
        }
        if pos.is_empty() {
            return Err(Error::parse(origin, lineno, "empty pos column"));
        }
        if let Some(tags) = &tagset {
            if !tags.contains(pos) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("pos `{pos}` not in declared tagset"),
                ));
            }
        }
        let lemma_missing = lemma_col == EMPTY_COLUMN;
        if lemma_missing {
            missing_lemmas += 1;
        }
        let mut morph = MorphBundle::new();
        if !(feats.is_empty() || feats == EMPTY_COLUMN) {
            for pair in feats.split('|') {
                let Some((attr, value)) = pair.split_once('=') else {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("malformed feature `{pair}` (expected attr=val)"),
                    ));
                };
                morph.insert(attr, value).map_err(|e| match e {
                    Error::Format(msg) => Error::parse(origin, lineno, msg),
                    other => other,
                })?;
            }
        }
        current.push(TaggedToken {
            form: form.to_string(),
            lemma: if lemma_missing {
                form.to_string()
            } else {
                lemma_col.to_string()
            },
            pos: pos.to_string(),
            morph,
            lemma_missing,
        });
    }
    if !current.is_empty() {
        sentences.push(TaggedSentence { tokens: current });
    }

    Ok(TaggedCorpus {
        sentences,
        language: language.unwrap_or_else(|| "und".to_string()),
        provenance: provenance.unwrap_or_default(),
        tagset,
        missing_lemmas,
    })
}

pub fn load_tagged_corpus(path: &Path) -> Result<TaggedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tagged_corpus(file, &path.display().to_string())
}

/// The token a condition emits at one position.
pub fn condition_token(token: &TaggedToken, kind: ConditionKind) -> &str {
    match kind {
        ConditionKind::Forms => &token.form,
        ConditionKind::Lemmata => &token.lemma,
        ConditionKind::Nouns => {
            if token.is_noun() {
                &token.lemma
            } else {
                &token.form
            }
        }
        ConditionKind::NotNouns => {
            if token.is_noun() {
                &token.form
            } else {
                &token.lemma
            }
        }
    }
}

/// Rewrite a corpus under one condition. Yields one sequence of tokens per
/// sentence, borrowing from the corpus.
pub fn apply_condition(
    corpus: &TaggedCorpus,
    kind: ConditionKind,
) -> impl Iterator<Item = impl Iterator<Item = &str>> {
    corpus
        .sentences
        .iter()
        .map(move |s| s.tokens.iter().map(move |t| condition_token(t, kind)))
}

/// Write a conditioned token stream: space-separated tokens, one sentence
/// per line.
pub fn write_condition_stream<W: Write>(
    corpus: &TaggedCorpus,
    kind: ConditionKind,
    w: &mut W,
) -> std::io::Result<()> {
    for sentence in apply_condition(corpus, kind) {
        let mut first = true;
        for token in sentence {
            if !first {
                w.write_all(b" ")?;
            }
            w.write_all(token.as_bytes())?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Case normalization applied to tokens at vocabulary and lexicon
/// construction time. Streams themselves keep the original casing.
pub fn normalize_token(token: &str) -> String {
    token.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn token(form: &str, lemma: &str, pos: &str) -> TaggedToken {
        TaggedToken {
            form: form.into(),
            lemma: lemma.into(),
            pos: pos.into(),
            morph: MorphBundle::new(),
            lemma_missing: false,
        }
    }

    /// The running Spanish example with lemma annotations: nouns keep
    /// form == lemma except for the plural noun fixture tests add.
    fn spanish_corpus() -> TaggedCorpus {
        let text = "# language: es\n\
                    la\tel\tDET\tgender=fem|number=sg\n\
                    llave\tllave\tNOUN\tgender=fem|number=sg\n\
                    bonita\tbonito\tADJ\tgender=fem|number=sg\n\
                    está\testar\tVERB\tnumber=sg\n\
                    sobre\tsobre\tADP\t_\n\
                    la\tel\tDET\tgender=fem|number=sg\n\
                    mesa\tmesa\tNOUN\tgender=fem|number=sg\n\
                    \n";
        parse_tagged_corpus(text.as_bytes(), "spanish").unwrap()
    }

    #[test]
    fn empty_input_parses_to_empty_corpus() {
        let corpus = parse_tagged_corpus("".as_bytes(), "empty").unwrap();
        assert_eq!(corpus.sentences.len(), 0);
        assert_eq!(corpus.language, "und");
    }

    #[test]
    fn single_token_line() {
        let corpus =
            parse_tagged_corpus("llave\tllave\tNOUN\tgender=fem|number=sg\n".as_bytes(), "t")
                .unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        let token = &corpus.sentences[0].tokens[0];
        assert_eq!(token.lemma, "llave");
        assert_eq!(token.morph.get("gender"), Some("fem"));
        assert!(token.is_noun());
    }

    #[test]
    fn wrong_column_count_names_line() {
        let text = "a\ta\tNOUN\t_\nb\tb\nc\tc\tNOUN\t_\n";
        let err = parse_tagged_corpus(text.as_bytes(), "bad").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_feature_value_is_an_error() {
        let text = "a\ta\tNOUN\tgender=\n";
        let err = parse_tagged_corpus(text.as_bytes(), "bad").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_attribute_is_an_error() {
        let text = "a\ta\tNOUN\tgender=fem|gender=masc\n";
        assert!(parse_tagged_corpus(text.as_bytes(), "bad").is_err());
    }

    #[test]
    fn attribute_keys_are_case_normalized() {
        let corpus = parse_tagged_corpus("a\ta\tNOUN\tGender=Fem\n".as_bytes(), "t").unwrap();
        assert_eq!(corpus.sentences[0].tokens[0].morph.get("gender"), Some("Fem"));
    }

    #[test]
    fn pos_outside_declared_tagset_is_an_error() {
        let text = "# tagset: NOUN VERB\na\ta\tADJ\t_\n";
        let err = parse_tagged_corpus(text.as_bytes(), "bad").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_lemma_falls_back_to_form_and_is_counted() {
        let corpus = parse_tagged_corpus("niños\t_\tNOUN\t_\n".as_bytes(), "t").unwrap();
        let token = &corpus.sentences[0].tokens[0];
        assert_eq!(token.lemma, "niños");
        assert!(token.lemma_missing);
        assert_eq!(corpus.missing_lemma_count(), 1);
    }

    fn stream(corpus: &TaggedCorpus, kind: ConditionKind) -> Vec<String> {
        apply_condition(corpus, kind)
            .flat_map(|s| s.map(|t| t.to_string()))
            .collect()
    }

    #[test]
    fn forms_condition_is_the_surface_text() {
        let corpus = spanish_corpus();
        assert_eq!(
            stream(&corpus, ConditionKind::Forms),
            ["la", "llave", "bonita", "está", "sobre", "la", "mesa"]
        );
    }

    #[test]
    fn lemmata_condition_reverts_concord() {
        let corpus = spanish_corpus();
        assert_eq!(
            stream(&corpus, ConditionKind::Lemmata),
            ["el", "llave", "bonito", "estar", "sobre", "el", "mesa"]
        );
    }

    #[test]
    fn nouns_and_not_nouns_split_the_positions() {
        // Plural noun so the noun positions distinguish form from lemma.
        let text = "las\tel\tDET\tgender=fem|number=pl\n\
                    llaves\tllave\tNOUN\tgender=fem|number=pl\n\
                    bonitas\tbonito\tADJ\tgender=fem|number=pl\n\
                    están\testar\tVERB\tnumber=pl\n\
                    sobre\tsobre\tADP\t_\n\
                    la\tel\tDET\tgender=fem|number=sg\n\
                    mesa\tmesa\tNOUN\tgender=fem|number=sg\n\n";
        let corpus = parse_tagged_corpus(text.as_bytes(), "t").unwrap();
        // Derived by hand from the condition definitions:
        assert_eq!(
            stream(&corpus, ConditionKind::Nouns),
            ["las", "llave", "bonitas", "están", "sobre", "la", "mesa"]
        );
        assert_eq!(
            stream(&corpus, ConditionKind::NotNouns),
            ["el", "llaves", "bonito", "estar", "sobre", "el", "mesa"]
        );
    }

    #[test]
    fn stream_writer_emits_one_sentence_per_line() {
        let corpus = parse_tagged_corpus(
            "a\ta\tNOUN\t_\nb\tb\tVERB\t_\n\nc\tc\tNOUN\t_\n".as_bytes(),
            "t",
        )
        .unwrap();
        let mut out = Vec::new();
        write_condition_stream(&corpus, ConditionKind::Forms, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a b\nc\n");
    }

    #[test]
    fn serialization_round_trips_canonical_files() {
        let corpus = spanish_corpus();
        let text = corpus.to_string_canonical();
        let reparsed = parse_tagged_corpus(text.as_bytes(), "round").unwrap();
        assert_eq!(reparsed.to_string_canonical(), text);
        assert_eq!(reparsed.sentences, corpus.sentences);
    }

    #[test]
    fn bundle_equality_ignores_order() {
        let mut a = MorphBundle::new();
        a.insert("gender", "fem").unwrap();
        a.insert("number", "sg").unwrap();
        let mut b = MorphBundle::new();
        b.insert("number", "sg").unwrap();
        b.insert("gender", "fem").unwrap();
        assert_eq!(a, b);
    }

    fn arb_word() -> impl Strategy<Value = String> {
        "[a-z]{1,6}"
    }

    fn arb_token() -> impl Strategy<Value = TaggedToken> {
        (
            arb_word(),
            arb_word(),
            prop::sample::select(vec!["NOUN", "VERB", "DET", "ADJ"]),
            prop::option::of(prop::sample::select(vec!["masc", "fem", "neut"])),
        )
            .prop_map(|(form, lemma, pos, gender)| {
                let mut t = token(&form, &lemma, pos);
                if let Some(g) = gender {
                    t.morph.insert("gender", g).unwrap();
                }
                t
            })
    }

    fn arb_corpus() -> impl Strategy<Value = TaggedCorpus> {
        prop::collection::vec(prop::collection::vec(arb_token(), 1..8), 0..6).prop_map(
            |sentences| TaggedCorpus {
                sentences: sentences
                    .into_iter()
                    .map(|tokens| TaggedSentence { tokens })
                    .collect(),
                language: "und".into(),
                provenance: String::new(),
                tagset: None,
                missing_lemmas: 0,
            },
        )
    }

    proptest! {
        #[test]
        fn prop_round_trip(corpus in arb_corpus()) {
            let text = corpus.to_string_canonical();
            let reparsed = parse_tagged_corpus(text.as_bytes(), "prop").unwrap();
            prop_assert_eq!(reparsed.to_string_canonical(), text);
        }

        #[test]
        fn prop_stream_length_identical_across_conditions(corpus in arb_corpus()) {
            let n = corpus.token_count();
            for kind in ConditionKind::ALL {
                prop_assert_eq!(stream(&corpus, kind).len(), n);
            }
        }

        #[test]
        fn prop_nouns_and_not_nouns_complement(corpus in arb_corpus()) {
            let tokens: Vec<&TaggedToken> =
                corpus.sentences.iter().flat_map(|s| s.tokens.iter()).collect();
            let nouns = stream(&corpus, ConditionKind::Nouns);
            let not_nouns = stream(&corpus, ConditionKind::NotNouns);
            for (i, t) in tokens.iter().enumerate() {
                if t.is_noun() {
                    prop_assert_eq!(&nouns[i], &t.lemma);
                    prop_assert_eq!(&not_nouns[i], &t.form);
                } else {
                    prop_assert_eq!(&nouns[i], &t.form);
                    prop_assert_eq!(&not_nouns[i], &t.lemma);
                }
            }
        }
    }
}
