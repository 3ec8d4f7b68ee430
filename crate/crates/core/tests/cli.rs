//! End-to-end checks of the command-line interface: stage composition,
//! file formats and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn genderprobe(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genderprobe"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn write_synth_spec(dir: &Path, sentences: usize, beta: f64) -> std::path::PathBuf {
    let path = dir.join("synth.cfg");
    fs::write(
        &path,
        format!(
            "[synth]\nn_noun_lemmas = 50\nn_context_lemmas = 30\n\
             whorf_strength = {beta}\nn_sentences = {sentences}\nseed = 5\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn synth_then_condition_composes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path(), 300, 0.0);
    let out = genderprobe(
        &["synth", "--spec", spec.to_str().unwrap(), "--out", "data"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("data/corpus.tsv").exists());
    assert!(dir.path().join("data/truth.tsv").exists());
    assert!(dir.path().join("data/concepts.tsv").exists());

    let out = genderprobe(
        &["condition", "--in", "data/corpus.tsv", "--kind", "lemmata"],
        dir.path(),
    );
    assert!(out.status.success());
    let stream = String::from_utf8(out.stdout).unwrap();
    // One line per sentence, 7 tokens per line under the default template.
    assert_eq!(stream.lines().count(), 300);
    assert!(stream.lines().all(|l| l.split_whitespace().count() == 7));
    // Lemmatized streams carry no concord suffixes on determiners.
    assert!(stream.split_whitespace().all(|t| !t.starts_with("d0m")));
}

#[test]
fn embed_densify_evaluate_chain_works() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path(), 2000, 0.0);
    assert!(genderprobe(
        &["synth", "--spec", spec.to_str().unwrap(), "--out", "data"],
        dir.path()
    )
    .status
    .success());
    assert!(genderprobe(
        &[
            "condition",
            "--in",
            "data/corpus.tsv",
            "--kind",
            "forms",
            "--out",
            "forms.txt"
        ],
        dir.path()
    )
    .status
    .success());
    let out = genderprobe(
        &[
            "embed", "--in", "forms.txt", "--out", "vectors.txt", "--dim", "16", "--epochs",
            "2", "--min-count", "2", "--deterministic",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Gender lexicon from tags, then a train/eval split by hand: the
    // concepts file doubles as the evaluation set (lemma\tgender columns
    // are in truth.tsv's noun rows).
    assert!(genderprobe(
        &[
            "lexicon",
            "--corpus",
            "data/corpus.tsv",
            "--min-occurrences",
            "3",
            "--out",
            "lexicon.tsv"
        ],
        dir.path()
    )
    .status
    .success());

    // Labeled lemma file from the lexicon (already lemma\tgender\tsupport).
    assert!(genderprobe(
        &[
            "densify",
            "--vectors",
            "vectors.txt",
            "--pairs-from",
            "lexicon.tsv",
            "--out",
            "transform.txt",
            "--test",
            "lexicon.tsv",
            "--scores",
            "scores.tsv",
            "--iterations",
            "150"
        ],
        dir.path()
    )
    .status
    .success());
    let scores = fs::read_to_string(dir.path().join("scores.tsv")).unwrap();
    assert!(scores.lines().count() > 10);
    assert!(scores.lines().all(|l| l.split('\t').count() == 3));

    // Classifier: train on the lexicon, dev on itself (smoke-level), then
    // evaluate the snapshot.
    assert!(genderprobe(
        &[
            "classify",
            "--vectors",
            "vectors.txt",
            "--train",
            "lexicon.tsv",
            "--dev",
            "lexicon.tsv",
            "--out",
            "model.txt",
            "--depth",
            "1",
            "--epochs",
            "10"
        ],
        dir.path()
    )
    .status
    .success());
    let out = genderprobe(
        &[
            "evaluate",
            "--vectors",
            "vectors.txt",
            "--model",
            "model.txt",
            "--test",
            "lexicon.tsv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("accuracy\t"));
    assert!(stdout.contains("baseline\t"));
}

#[test]
fn evaluate_rejects_mismatched_dimensions_with_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // 3-dim vectors, 2-dim model.
    fs::write(dir.path().join("v.txt"), "2 3\na 1 0 0\nb 0 1 0\n").unwrap();
    fs::write(
        dir.path().join("m.txt"),
        "genderprobe-mlp 1\ninput_dim 2\ndepth 1\nhidden 0\nnonlinearity tanh\ntheta 6\n0 0 0 0 0 0\n",
    )
    .unwrap();
    fs::write(dir.path().join("t.tsv"), "a\tmasc\nb\tfem\n").unwrap();
    let out = genderprobe(
        &[
            "evaluate", "--vectors", "v.txt", "--model", "m.txt", "--test", "t.tsv",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("dimension"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = genderprobe(&["condition", "--wat"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // Unknown condition kind is a configuration error: exit 1 too.
    fs::write(dir.path().join("c.tsv"), "a\ta\tNOUN\t_\n").unwrap();
    let out = genderprobe(&["condition", "--in", "c.tsv", "--kind", "sideways"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_corpus_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.tsv"), "only\ttwo\n").unwrap();
    let out = genderprobe(&["condition", "--in", "bad.tsv", "--kind", "forms"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(":1:"), "error names the line: {stderr}");
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = genderprobe(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for subcommand in [
        "synth", "condition", "embed", "lexicon", "classify", "densify", "evaluate", "report",
        "run",
    ] {
        assert!(stdout.contains(subcommand), "help lists {subcommand}");
    }
}

#[test]
fn pipeline_run_report_and_rerun_caching() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path(), 3000, 0.0);
    assert!(genderprobe(
        &["synth", "--spec", spec.to_str().unwrap(), "--out", "data"],
        dir.path()
    )
    .status
    .success());
    fs::write(
        dir.path().join("experiment.cfg"),
        "[experiment]\nlanguages = syn\noutput_dir = out\nseed = 9\n\
         [paths]\ncorpus.syn = data/corpus.tsv\nconcepts.syn = data/concepts.tsv\n\
         [sgns]\ndim = 16\nepochs = 2\nmin_count = 2\n\
         [lexicon]\nmin_occurrences = 4\nn_splits = 2\n\
         [classifier]\nepochs = 8\ndepths = 1\nhiddens = 16\nnonlinearities = tanh\n\
         [densifier]\niterations = 100\n\
         [stats]\nn_permutations = 1000\n",
    )
    .unwrap();
    let out = genderprobe(
        &["run", "--config", "experiment.cfg", "--format", "tsv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("classifier\tsyn\tforms"));
    assert!(stdout.contains("correlation\tsyn\tnot_nouns"));

    // Rerun: everything cached.
    let out = genderprobe(
        &["run", "--config", "experiment.cfg", "--format", "tsv"],
        dir.path(),
    );
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("0 stages executed"),
        "expected all cache hits: {stderr}"
    );

    // The report subcommand renders from the stored artifacts.
    let out = genderprobe(
        &["report", "--run", "out", "--language", "syn", "--format", "table"],
        dir.path(),
    );
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("condition"));
    assert!(table.contains("most gendered"));
}
