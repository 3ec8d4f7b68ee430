//! Experiment report assembly and rendering: per-condition classifier
//! accuracies against the majority baseline, per-condition rank
//! correlations of the learned gender dimension, and the most-gendered
//! test lemmas.

use serde::{Deserialize, Serialize};

use crate::corpus::ConditionKind;
use crate::error::{Error, Result};
use crate::lexicon::GenderLabel;
use crate::stats::{CorrelationResult, ALPHA};

/// Classifier outcome on one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split_id: usize,
    pub test_accuracy: f64,
    pub baseline_accuracy: f64,
    /// Approximate-randomization p-value against the baseline.
    pub p_value: f64,
    pub best_depth: usize,
    pub best_hidden: usize,
    pub best_nonlinearity: String,
}

/// One scored lemma in the most-gendered listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLemma {
    pub lemma: String,
    pub score: f64,
    pub gold: String,
}

impl ScoredLemma {
    pub fn new(lemma: impl Into<String>, score: f64, gold: GenderLabel) -> Self {
        ScoredLemma {
            lemma: lemma.into(),
            score,
            gold: gold.name().to_string(),
        }
    }
}

/// Everything one condition contributes to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRun {
    pub condition: String,
    pub splits: Vec<SplitOutcome>,
    pub correlation: CorrelationResult,
    pub most_masculine: Vec<ScoredLemma>,
    pub most_feminine: Vec<ScoredLemma>,
}

/// Aggregated classifier row (accuracy-figure analogue).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub condition: String,
    pub mean_accuracy: f64,
    pub mean_baseline: f64,
    pub n_splits: usize,
    /// Splits where the classifier differs significantly from the baseline.
    pub significant_splits: usize,
    pub per_split_accuracy: Vec<f64>,
    pub per_split_p: Vec<f64>,
}

/// Correlation row (gender-dimension table analogue).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub condition: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
}

/// Most-gendered listings for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderedListing {
    pub condition: String,
    pub most_masculine: Vec<ScoredLemma>,
    pub most_feminine: Vec<ScoredLemma>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub language: String,
    pub eval_lemmas_total: usize,
    /// Evaluation lemmas retained after vocabulary/lexicon filtering.
    pub eval_lemmas_used: usize,
    pub accuracies: Vec<AccuracyRow>,
    pub correlations: Vec<CorrelationRow>,
    pub listings: Vec<GenderedListing>,
}

/// Assemble the per-language report. All four conditions must be present.
pub fn assemble_report(
    language: &str,
    eval_lemmas_total: usize,
    eval_lemmas_used: usize,
    mut runs: Vec<ConditionRun>,
) -> Result<ExperimentReport> {
    for kind in ConditionKind::ALL {
        if !runs.iter().any(|r| r.condition == kind.name()) {
            return Err(Error::Format(format!(
                "cannot assemble report: condition `{kind}` missing"
            )));
        }
    }
    // Canonical condition order.
    runs.sort_by_key(|r| {
        ConditionKind::ALL
            .iter()
            .position(|k| k.name() == r.condition)
            .unwrap_or(usize::MAX)
    });

    let mut accuracies = Vec::new();
    let mut correlations = Vec::new();
    let mut listings = Vec::new();
    for run in runs {
        let n = run.splits.len();
        let mean = |f: &dyn Fn(&SplitOutcome) -> f64| -> f64 {
            run.splits.iter().map(|s| f(s)).sum::<f64>() / n.max(1) as f64
        };
        accuracies.push(AccuracyRow {
            condition: run.condition.clone(),
            mean_accuracy: mean(&|s| s.test_accuracy),
            mean_baseline: mean(&|s| s.baseline_accuracy),
            n_splits: n,
            significant_splits: run.splits.iter().filter(|s| s.p_value < ALPHA).count(),
            per_split_accuracy: run.splits.iter().map(|s| s.test_accuracy).collect(),
            per_split_p: run.splits.iter().map(|s| s.p_value).collect(),
        });
        correlations.push(CorrelationRow {
            condition: run.condition.clone(),
            rho: run.correlation.rho,
            p_value: run.correlation.p_value,
            n: run.correlation.n,
            significant: run.correlation.significant,
        });
        listings.push(GenderedListing {
            condition: run.condition,
            most_masculine: run.most_masculine,
            most_feminine: run.most_feminine,
        });
    }
    Ok(ExperimentReport {
        language: language.to_string(),
        eval_lemmas_total,
        eval_lemmas_used,
        accuracies,
        correlations,
        listings,
    })
}

/// Rank test lemmas by gender score and keep the k most extreme per
/// direction. The feminine direction is the sign of ρ (labels are coded
/// masculine 0, feminine 1); ties break by lemma.
pub fn most_gendered(
    scored: &[(String, f64, GenderLabel)],
    rho: f64,
    k: usize,
) -> (Vec<ScoredLemma>, Vec<ScoredLemma>) {
    let feminine_direction = if rho < 0.0 { -1.0 } else { 1.0 };
    let mut ranked: Vec<&(String, f64, GenderLabel)> = scored.iter().collect();
    ranked.sort_by(|a, b| {
        let x = a.1 * feminine_direction;
        let y = b.1 * feminine_direction;
        y.partial_cmp(&x).unwrap().then_with(|| a.0.cmp(&b.0))
    });
    let most_feminine: Vec<ScoredLemma> = ranked
        .iter()
        .take(k)
        .map(|(l, s, g)| ScoredLemma::new(l.clone(), *s, *g))
        .collect();
    let most_masculine: Vec<ScoredLemma> = ranked
        .iter()
        .rev()
        .take(k)
        .map(|(l, s, g)| ScoredLemma::new(l.clone(), *s, *g))
        .collect();
    (most_masculine, most_feminine)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
    Table,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::Config(format!(
                "unknown report format `{other}` (expected tsv, json or table)"
            ))),
        }
    }
}

/// Render a report. Output is byte-stable for identical inputs.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("serializable report");
            out.push('\n');
            out
        }
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::Table => render_table(report),
    }
}

fn render_tsv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "meta\t{}\teval_total={}\teval_used={}\n",
        report.language, report.eval_lemmas_total, report.eval_lemmas_used
    ));
    for row in &report.accuracies {
        out.push_str(&format!(
            "classifier\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\n",
            report.language,
            row.condition,
            row.mean_accuracy,
            row.mean_baseline,
            row.significant_splits,
            row.n_splits
        ));
    }
    for row in &report.correlations {
        out.push_str(&format!(
            "correlation\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\n",
            report.language,
            row.condition,
            row.rho,
            row.p_value,
            row.n,
            if row.significant { "significant" } else { "ns" }
        ));
    }
    for listing in &report.listings {
        for (direction, lemmas) in [
            ("masc", &listing.most_masculine),
            ("fem", &listing.most_feminine),
        ] {
            for (rank, item) in lemmas.iter().enumerate() {
                out.push_str(&format!(
                    "gendered\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\n",
                    report.language,
                    listing.condition,
                    direction,
                    rank + 1,
                    item.lemma,
                    item.score,
                    item.gold
                ));
            }
        }
    }
    out
}

fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "language {}  (evaluation lemmas: {} of {})\n\n",
        report.language, report.eval_lemmas_used, report.eval_lemmas_total
    ));
    out.push_str("condition   accuracy  baseline  sig-splits\n");
    for row in &report.accuracies {
        out.push_str(&format!(
            "{:<11} {:>8.4}  {:>8.4}  {:>6}/{}\n",
            row.condition, row.mean_accuracy, row.mean_baseline, row.significant_splits, row.n_splits
        ));
    }
    out.push_str("\ncondition   rho       p-value   significant\n");
    for row in &report.correlations {
        out.push_str(&format!(
            "{:<11} {:>8.4}  {:>8.4}  {}\n",
            row.condition,
            row.rho,
            row.p_value,
            if row.significant { "yes" } else { "no" }
        ));
    }
    for listing in &report.listings {
        out.push_str(&format!("\nmost gendered ({}):\n", listing.condition));
        out.push_str("  masculine direction: ");
        let names = |items: &[ScoredLemma]| {
            items
                .iter()
                .map(|s| format!("{} ({})", s.lemma, s.gold))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.push_str(&names(&listing.most_masculine));
        out.push_str("\n  feminine direction:  ");
        out.push_str(&names(&listing.most_feminine));
        out.push('\n');
    }
    out
}
