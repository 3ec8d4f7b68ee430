//! Full-experiment orchestration: configuration, stage caching and the
//! condition → embed → lexicon → classify → densify → report pipeline.

pub mod cache;
mod config;
mod run;

pub use config::{
    ClassifierSettings, DensifierSettings, ExperimentConfig, LexiconSettings, SgnsSettings,
    StatsSettings,
};
pub use run::{run_pipeline, DensifyArtifact, LangPaths, PipelineRun, StageExecution};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ConditionKind;
    use crate::report::ReportFormat;
    use crate::synth::{generate_to_writer, write_concepts, SynthSpec};
    use std::fs;
    use std::path::Path;

    fn synth_fixture(dir: &Path, beta: f64) -> (std::path::PathBuf, std::path::PathBuf) {
        let spec = SynthSpec {
            n_noun_lemmas: 60,
            n_context_lemmas: 30,
            whorf_strength: beta,
            n_sentences: 4000,
            seed: 7,
            ..SynthSpec::default()
        };
        let corpus_path = dir.join("corpus.tsv");
        let concepts_path = dir.join("concepts.tsv");
        let mut w = fs::File::create(&corpus_path).unwrap();
        let truth = generate_to_writer(&spec, &mut w).unwrap();
        let mut w = fs::File::create(&concepts_path).unwrap();
        write_concepts(&truth, 0.5, 3, &mut w).unwrap();
        (corpus_path, concepts_path)
    }

    fn tiny_config(dir: &Path, beta: f64) -> ExperimentConfig {
        let (corpus, concepts) = synth_fixture(dir, beta);
        let mut config = ExperimentConfig {
            languages: vec!["syn".into()],
            output_dir: dir.join("out"),
            seed: 11,
            ..ExperimentConfig::default()
        };
        config.corpus_paths.insert("syn".into(), corpus);
        config.concepts_paths.insert("syn".into(), concepts);
        config.sgns.dim = 16;
        config.sgns.epochs = 2;
        config.sgns.min_count = 3;
        config.lexicon.min_occurrences = 5;
        config.lexicon.n_splits = 2;
        config.classifier.epochs = 10;
        config.classifier.depths = vec![1];
        config.classifier.hiddens = vec![16];
        config.classifier.nonlinearities = vec![crate::classifier::Nonlinearity::Tanh];
        config.densifier.iterations = 100;
        config.stats.n_permutations = 1000;
        config
    }

    #[test]
    fn pipeline_produces_a_structurally_complete_report() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path(), 0.0);
        let run = run_pipeline(&config).unwrap();
        assert!(run.failures.is_empty(), "failures: {:?}", run.failures);
        let report = &run.reports["syn"];
        assert_eq!(report.accuracies.len(), 4);
        assert_eq!(report.correlations.len(), 4);
        assert_eq!(report.listings.len(), 4);
        // All artifacts on disk.
        let paths = LangPaths::new(&config.output_dir, "syn");
        for kind in ConditionKind::ALL {
            assert!(paths.stream(kind).exists());
            assert!(paths.vectors(kind).exists());
            assert!(paths.classify(kind).exists());
            assert!(paths.densify(kind).exists());
            assert!(paths.sweep_log(kind).exists());
            assert!(paths.scores(kind).exists());
        }
        assert!(paths.report(ReportFormat::Json).exists());
    }

    #[test]
    fn rerun_hits_cache_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path(), 0.0);
        let first = run_pipeline(&config).unwrap();
        assert!(first.failures.is_empty());
        assert!(!first.executed_stages().is_empty());
        let second = run_pipeline(&config).unwrap();
        assert!(second.failures.is_empty());
        assert_eq!(
            second.executed_stages().len(),
            0,
            "expected all cache hits, got {:?}",
            second.executed_stages()
        );
        assert_eq!(first.reports, second.reports);
    }

    #[test]
    fn corrupting_one_vector_file_reruns_exactly_its_consumers() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path(), 0.0);
        run_pipeline(&config).unwrap();
        let paths = LangPaths::new(&config.output_dir, "syn");
        // Corrupt the forms vectors: still a valid file, different content.
        let vectors = paths.vectors(ConditionKind::Forms);
        let text = fs::read_to_string(&vectors).unwrap();
        let mut lines: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        let fields: Vec<&str> = lines[1].split_whitespace().collect();
        let mut new_row = vec![fields[0].to_string()];
        new_row.extend(fields[1..].iter().map(|_| "0.25".to_string()));
        lines[1] = new_row.join(" ");
        fs::write(&vectors, lines.join("\n") + "\n").unwrap();

        let rerun = run_pipeline(&config).unwrap();
        assert!(rerun.failures.is_empty(), "failures: {:?}", rerun.failures);
        let mut executed: Vec<String> = rerun
            .executed_stages()
            .iter()
            .map(|e| e.stage.clone())
            .collect();
        executed.sort();
        // Exactly the consumers of the corrupted file re-execute. The
        // report re-executes only when the rewritten analysis artifacts
        // actually changed.
        assert!(
            executed.contains(&"classify-forms".to_string())
                && executed.contains(&"densify-forms".to_string()),
            "consumers did not re-execute: {executed:?}"
        );
        for stage in &executed {
            assert!(
                ["classify-forms", "densify-forms", "report"].contains(&stage.as_str()),
                "unexpected stage re-executed: {stage}"
            );
        }
    }

    #[test]
    fn deterministic_reruns_are_byte_identical_across_directories() {
        let dir = tempfile::tempdir().unwrap();
        let mut config_a = tiny_config(dir.path(), 0.0);
        let mut config_b = config_a.clone();
        config_a.output_dir = dir.path().join("run_a");
        config_b.output_dir = dir.path().join("run_b");
        run_pipeline(&config_a).unwrap();
        run_pipeline(&config_b).unwrap();
        for format in [ReportFormat::Json, ReportFormat::Tsv, ReportFormat::Table] {
            let a = fs::read(LangPaths::new(&config_a.output_dir, "syn").report(format)).unwrap();
            let b = fs::read(LangPaths::new(&config_b.output_dir, "syn").report(format)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn failing_language_does_not_block_others() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path(), 0.0);
        // Second language with a corpus that parses but yields no usable
        // evaluation set (no gendered nouns at all).
        let bad = dir.path().join("bad.tsv");
        fs::write(&bad, "x\tx\tVERB\t_\n\n").unwrap();
        let bad_concepts = dir.path().join("bad-concepts.tsv");
        fs::write(&bad_concepts, "A::N\ta\ta\tinanimate\n").unwrap();
        config.languages.push("bad".into());
        config.corpus_paths.insert("bad".into(), bad);
        config.concepts_paths.insert("bad".into(), bad_concepts);

        let run = run_pipeline(&config).unwrap();
        assert!(run.reports.contains_key("syn"));
        assert!(run.failures.contains_key("bad"));
        // The failure is stage-tagged.
        let message = format!("{}", run.failures["bad"]);
        assert!(message.contains("evalset"), "got: {message}");
    }

    #[test]
    fn multi_worker_run_matches_single_worker_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut config_a = tiny_config(dir.path(), 0.2);
        let mut config_b = config_a.clone();
        config_a.output_dir = dir.path().join("serial");
        config_a.workers = 1;
        config_b.output_dir = dir.path().join("pooled");
        config_b.workers = 4;
        let a = run_pipeline(&config_a).unwrap();
        let b = run_pipeline(&config_b).unwrap();
        assert!(a.failures.is_empty() && b.failures.is_empty());
        assert_eq!(a.reports, b.reports);
    }
}
