//! Full benchmark runs: calibrate once, evaluate every dataset against the
//! fixed threshold, pool per data type, average across types, aggregate
//! trials and render tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{load_logits, DataType, DatasetRef, EvalConfig, LogitRecord, Manifest, Pooling};
use crate::error::{Error, Result};
use crate::metrics::{self, calibrate_threshold, classify_outcome, CalibratedThreshold, ConfusionCounts};
use crate::scores::{predicted_class, ScoreMethod, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub data_type: DataType,
    pub counts: ConfusionCounts,
    pub dar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeResult {
    pub data_type: DataType,
    /// Sum of the per-dataset counts.
    pub counts: ConfusionCounts,
    pub dar: f64,
    pub per_dataset: Vec<DatasetResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub dataset: String,
    pub auroc: f64,
    pub aupr: f64,
    pub fpr: f64,
}

/// Threshold-free and fixed-TPR metrics, for comparison with the DAR table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegacyMetrics {
    /// Top-1 accuracy without rejection, one entry per known-type dataset.
    pub plain_accuracy: Vec<(String, f64)>,
    /// Clean (calibration) set versus each unknown-type dataset.
    pub binary: Vec<BinaryMetrics>,
    pub fpr_tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub num_classes: usize,
    pub threshold: CalibratedThreshold,
    /// Config as used, with `gen_top_m` resolved.
    pub config: EvalConfig,
    pub results: Vec<TypeResult>,
    pub mean_dar: f64,
    pub legacy: Option<LegacyMetrics>,
    pub trial_id: Option<String>,
    pub warnings: Vec<String>,
}

impl BenchmarkReport {
    pub fn type_result(&self, t: DataType) -> Option<&TypeResult> {
        self.results.iter().find(|r| r.data_type == t)
    }

    pub fn dataset_result(&self, name: &str) -> Option<&DatasetResult> {
        self.results
            .iter()
            .flat_map(|r| &r.per_dataset)
            .find(|d| d.name == name)
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            config: self.config.clone(),
            threshold: self.threshold,
            type_dars: self.results.iter().map(|r| (r.data_type, r.dar)).collect(),
            mean_dar: self.mean_dar,
            datasets: self
                .results
                .iter()
                .flat_map(|r| &r.per_dataset)
                .map(|d| (d.name.clone(), d.dar))
                .collect(),
            trial_id: self.trial_id.clone(),
        }
    }
}

/// The table row of a report at full precision, plus what is needed to check
/// that two reports are comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub config: EvalConfig,
    pub threshold: CalibratedThreshold,
    pub type_dars: Vec<(DataType, f64)>,
    pub mean_dar: f64,
    /// Per-dataset DARs; empty when parsed from a CSV table.
    pub datasets: Vec<(String, f64)>,
    pub trial_id: Option<String>,
}

impl ReportSummary {
    pub fn type_dar(&self, t: DataType) -> Option<f64> {
        self.type_dars.iter().find(|(d, _)| *d == t).map(|(_, v)| *v)
    }
}

/// Unweighted mean of the per-type DARs.
pub fn mean_over_types(results: &[TypeResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("mean over an empty set of data types"));
    }
    Ok(results.iter().map(|r| r.dar).sum::<f64>() / results.len() as f64)
}

/// Loads each dataset with [`load_logits`] and runs the benchmark.
pub fn evaluate(manifest: &Manifest, config: &EvalConfig) -> Result<BenchmarkReport> {
    let num_classes = manifest.num_classes;
    evaluate_with(manifest, config, |d| load_logits(d, num_classes))
}

struct DatasetEval {
    result: DatasetResult,
    plain_accuracy: Option<f64>,
    binary: Option<BinaryMetrics>,
}

/// Runs the benchmark with a caller-supplied dataset loader.
///
/// Calibration finishes before any dataset is evaluated. Datasets are then
/// evaluated in parallel and assembled in manifest order.
pub fn evaluate_with<F>(manifest: &Manifest, config: &EvalConfig, load: F) -> Result<BenchmarkReport>
where
    F: Fn(&DatasetRef) -> Result<Vec<LogitRecord>> + Sync,
{
    config.validate()?;
    manifest.validate()?;

    let mut warnings = Vec::new();
    let missing = manifest.missing_types();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|t| t.as_str()).collect();
        if !config.allow_partial {
            return Err(Error::manifest(
                "datasets",
                format!(
                    "no dataset of type {}; a full report needs all five types (allow partial reports to proceed)",
                    names.join(", ")
                ),
            ));
        }
        warnings.push(format!(
            "partial report: missing {}; mean over present types only",
            names.join(", ")
        ));
    }

    let num_classes = manifest.num_classes;
    let scorer = Scorer::from_config(config, num_classes)?;
    let (threshold, clean_scores) = calibrate_scored(manifest, config, &scorer, &load)?;

    let evals: Vec<DatasetEval> = manifest
        .datasets
        .par_iter()
        .map(|d| {
            let records = load(d)?;
            check_width(&records, num_classes)?;
            evaluate_dataset(d, &records, &threshold, &scorer, config, &clean_scores)
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    for t in manifest.types_present() {
        let per_dataset: Vec<DatasetResult> = evals
            .iter()
            .filter(|e| e.result.data_type == t)
            .map(|e| e.result.clone())
            .collect();
        let counts: ConfusionCounts = per_dataset.iter().map(|d| d.counts).sum();
        let dar = match config.pooling {
            Pooling::Pooled => metrics::dar(&counts)?,
            Pooling::MacroPerDataset => {
                // summed in sorted order so the value is independent of dataset order
                let mut dars: Vec<f64> = per_dataset.iter().map(|d| d.dar).collect();
                dars.sort_unstable_by(f64::total_cmp);
                dars.iter().sum::<f64>() / dars.len() as f64
            }
        };
        results.push(TypeResult {
            data_type: t,
            counts,
            dar,
            per_dataset,
        });
    }
    let mean_dar = mean_over_types(&results)?;

    let legacy = config.legacy.then(|| LegacyMetrics {
        plain_accuracy: evals
            .iter()
            .filter_map(|e| e.plain_accuracy.map(|a| (e.result.name.clone(), a)))
            .collect(),
        binary: evals.iter().filter_map(|e| e.binary.clone()).collect(),
        fpr_tpr: config.legacy_tpr,
    });

    let mut config_echo = config.clone();
    config_echo.gen_top_m = Some(scorer.top_m());

    Ok(BenchmarkReport {
        num_classes,
        threshold,
        config: config_echo,
        results,
        mean_dar,
        legacy,
        trial_id: manifest.trial_id.clone(),
        warnings,
    })
}

/// Calibrates the rejection threshold on the manifest's clean calibration
/// set without evaluating anything else.
pub fn calibrate(manifest: &Manifest, config: &EvalConfig) -> Result<CalibratedThreshold> {
    config.validate()?;
    manifest.validate()?;
    let num_classes = manifest.num_classes;
    let scorer = Scorer::from_config(config, num_classes)?;
    calibrate_scored(manifest, config, &scorer, &|d: &DatasetRef| load_logits(d, num_classes)).map(|(t, _)| t)
}

/// Returns the threshold and the confidences of every calibration sample.
fn calibrate_scored<F>(
    manifest: &Manifest,
    config: &EvalConfig,
    scorer: &Scorer,
    load: &F,
) -> Result<(CalibratedThreshold, Vec<f64>)>
where
    F: Fn(&DatasetRef) -> Result<Vec<LogitRecord>>,
{
    let calibration = load(manifest.calibration())?;
    check_width(&calibration, manifest.num_classes)?;
    let scores: Vec<f64> = calibration.iter().map(|r| scorer.confidence(&r.logits)).collect();
    let correct: Vec<f64> = calibration
        .iter()
        .zip(&scores)
        .filter(|(r, _)| r.label == Some(predicted_class(&r.logits)))
        .map(|(_, s)| *s)
        .collect();
    Ok((calibrate_threshold(&correct, config.accept_rate)?, scores))
}

fn check_width(records: &[LogitRecord], num_classes: usize) -> Result<()> {
    if let Some(r) = records.iter().find(|r| r.logits.len() != num_classes) {
        return Err(Error::InvalidArgument(format!(
            "sample `{}` has {} logits, expected {num_classes}",
            r.sample_id,
            r.logits.len()
        )));
    }
    Ok(())
}

fn evaluate_dataset(
    dataset: &DatasetRef,
    records: &[LogitRecord],
    threshold: &CalibratedThreshold,
    scorer: &Scorer,
    config: &EvalConfig,
    clean_scores: &[f64],
) -> Result<DatasetEval> {
    let unknown = dataset.data_type.is_unknown();
    let mut counts = ConfusionCounts::default();
    for r in records {
        if r.label.is_some() == unknown {
            return Err(Error::InvalidArgument(format!(
                "dataset `{}`: sample `{}` label does not match data type {}",
                dataset.name, r.sample_id, dataset.data_type
            )));
        }
        counts.record(classify_outcome(r, unknown, threshold, scorer));
    }
    let result = DatasetResult {
        name: dataset.name.clone(),
        data_type: dataset.data_type,
        counts,
        dar: metrics::dar(&counts)?,
    };

    let (mut plain_accuracy, mut binary) = (None, None);
    if config.legacy {
        if unknown {
            let scores: Vec<f64> = records.iter().map(|r| scorer.confidence(&r.logits)).collect();
            binary = Some(BinaryMetrics {
                dataset: dataset.name.clone(),
                auroc: metrics::auroc(clean_scores, &scores)?,
                aupr: metrics::aupr(clean_scores, &scores)?,
                fpr: metrics::fpr_at_tpr(clean_scores, &scores, config.legacy_tpr)?,
            });
        } else {
            plain_accuracy = Some(metrics::plain_accuracy(records)?);
        }
    }
    Ok(DatasetEval {
        result,
        plain_accuracy,
        binary,
    })
}

/// Mean and sample standard deviation of one table cell across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; `None` for a single trial.
    pub std: Option<f64>,
}

impl CellStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub trials: usize,
    pub config: EvalConfig,
    pub types: Vec<(DataType, CellStats)>,
    pub mean: CellStats,
    pub datasets: Vec<(String, CellStats)>,
    pub threshold: CellStats,
}

pub fn aggregate_trials(reports: &[BenchmarkReport]) -> Result<TrialAggregate> {
    let summaries: Vec<ReportSummary> = reports.iter().map(BenchmarkReport::summary).collect();
    aggregate_summaries(&summaries)
}

pub fn aggregate_summaries(reports: &[ReportSummary]) -> Result<TrialAggregate> {
    let first = reports.first().ok_or(Error::EmptyInput("aggregate of zero reports"))?;
    let types: Vec<DataType> = first.type_dars.iter().map(|(t, _)| *t).collect();
    let names: Vec<&str> = first.datasets.iter().map(|(n, _)| n.as_str()).collect();
    for (i, r) in reports.iter().enumerate().skip(1) {
        if !same_protocol(&r.config, &first.config) {
            return Err(Error::ReportMismatch(format!(
                "report {i} was produced with a different configuration"
            )));
        }
        if r.type_dars.iter().map(|(t, _)| *t).ne(types.iter().copied()) {
            return Err(Error::ReportMismatch(format!("report {i} covers different data types")));
        }
        if r.datasets.iter().map(|(n, _)| n.as_str()).ne(names.iter().copied()) {
            return Err(Error::ReportMismatch(format!("report {i} covers different datasets")));
        }
    }
    let column = |f: &dyn Fn(&ReportSummary) -> f64| CellStats::from_values(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(TrialAggregate {
        trials: reports.len(),
        config: first.config.clone(),
        types: types
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, column(&|r| r.type_dars[i].1)))
            .collect(),
        mean: column(&|r| r.mean_dar),
        datasets: names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), column(&|r| r.datasets[i].1)))
            .collect(),
        threshold: column(&|r| r.threshold.value),
    })
}

fn same_protocol(a: &EvalConfig, b: &EvalConfig) -> bool {
    a.score_method == b.score_method
        && a.accept_rate == b.accept_rate
        && a.pooling == b.pooling
        && (a.score_method != ScoreMethod::Gen || (a.gen_gamma == b.gen_gamma && a.gen_top_m == b.gen_top_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

const SUMMARY_META: [&str; 9] = [
    "score",
    "accept_rate",
    "pooling",
    "gen_gamma",
    "gen_top_m",
    "threshold",
    "n_calibration",
    "achieved_accept_rate",
    "trial_id",
];

fn full_column(t: DataType) -> String {
    format!("{}_dar", t.as_str())
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

fn two_dp(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn full(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn summary_csv(s: &ReportSummary) -> String {
    let mut header: Vec<String> = DataType::ALL.iter().map(|t| t.column_label().to_string()).collect();
    header.push("Mean".into());
    header.extend(DataType::ALL.iter().map(|t| full_column(*t)));
    header.push("mean_dar".into());
    header.extend(SUMMARY_META.iter().map(|s| s.to_string()));

    let mut row: Vec<String> = DataType::ALL.iter().map(|t| two_dp(s.type_dar(*t))).collect();
    row.push(two_dp(Some(s.mean_dar)));
    row.extend(DataType::ALL.iter().map(|t| full(s.type_dar(*t))));
    row.push(full(Some(s.mean_dar)));
    row.push(s.config.score_method.to_string());
    row.push(s.config.accept_rate.to_string());
    row.push(s.config.pooling.to_string());
    row.push(s.config.gen_gamma.to_string());
    row.push(s.config.gen_top_m.map(|m| m.to_string()).unwrap_or_default());
    row.push(s.threshold.value.to_string());
    row.push(s.threshold.n_calibration.to_string());
    row.push(s.threshold.achieved_accept_rate.to_string());
    row.push(s.trial_id.clone().unwrap_or_default());
    csv_text(vec![header, row])
}

fn markdown_row(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = String::from("|");
    for c in cells {
        line.push(' ');
        line.push_str(&c);
        line.push_str(" |");
    }
    line.push('\n');
    line
}

fn markdown_header(cells: &[&str], first_left: bool) -> String {
    let mut out = markdown_row(cells.iter().map(|c| c.to_string()));
    let rule = cells.iter().enumerate().map(|(i, _)| {
        if i == 0 && first_left {
            ":---".to_string()
        } else {
            "---:".to_string()
        }
    });
    out.push_str(&markdown_row(rule));
    out
}

fn table_header() -> Vec<&'static str> {
    let mut h: Vec<&str> = DataType::ALL.iter().map(|t| t.column_label()).collect();
    h.push("Mean");
    h
}

fn summary_markdown(s: &ReportSummary) -> String {
    let mut out = markdown_header(&table_header(), false);
    let mut cells: Vec<String> = DataType::ALL
        .iter()
        .map(|t| s.type_dar(*t).map_or("-".into(), |v| format!("{v:.2}")))
        .collect();
    cells.push(format!("{:.2}", s.mean_dar));
    out.push_str(&markdown_row(cells));
    out.push('\n');
    let _ = writeln!(
        out,
        "Threshold {} ({} score, target accept rate {}, achieved {:.4} on {} correctly classified clean samples)",
        s.threshold.value,
        s.config.score_method,
        s.config.accept_rate,
        s.threshold.achieved_accept_rate,
        s.threshold.n_calibration,
    );
    out
}

/// Renders a report. Missing data types are left blank (CSV) or `-`.
pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => summary_csv(&report.summary()),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serialises");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            for w in &report.warnings {
                let _ = writeln!(out, "> warning: {w}\n");
            }
            out.push_str(&summary_markdown(&report.summary()));
            out.push_str("\n### Datasets\n\n");
            out.push_str(&markdown_header(
                &["Dataset", "Type", "Samples", "TP", "FP", "FN", "TN", "DAR"],
                true,
            ));
            for d in report.results.iter().flat_map(|r| &r.per_dataset) {
                let c = d.counts;
                out.push_str(&markdown_row([
                    d.name.clone(),
                    d.data_type.to_string(),
                    c.total().to_string(),
                    c.tp.to_string(),
                    c.fp.to_string(),
                    c.fn_.to_string(),
                    c.tn.to_string(),
                    format!("{:.2}", d.dar),
                ]));
            }
            if let Some(legacy) = &report.legacy {
                out.push_str("\n### Legacy metrics\n\n");
                out.push_str(&markdown_header(&["Dataset", "Accuracy"], true));
                for (name, acc) in &legacy.plain_accuracy {
                    out.push_str(&markdown_row([name.clone(), format!("{acc:.2}")]));
                }
                if !legacy.binary.is_empty() {
                    out.push('\n');
                    let fpr = format!("FPR@{}%TPR", legacy.fpr_tpr * 100.0);
                    out.push_str(&markdown_header(&["Dataset", "AUROC", "AUPR", &fpr], true));
                    for b in &legacy.binary {
                        out.push_str(&markdown_row([
                            b.dataset.clone(),
                            format!("{:.2}", 100.0 * b.auroc),
                            format!("{:.2}", 100.0 * b.aupr),
                            format!("{:.2}", 100.0 * b.fpr),
                        ]));
                    }
                }
            }
            out
        }
    }
}

/// Renders just the table row of a report.
pub fn render_summary(summary: &ReportSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => summary_csv(summary),
        ReportFormat::Markdown => summary_markdown(summary),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(summary).expect("summary serialises");
            s.push('\n');
            s
        }
    }
}

fn mean_std_cell(c: &CellStats) -> String {
    match c.std {
        Some(s) => format!("{:.2} ± {s:.2}", c.mean),
        None => format!("{:.2}", c.mean),
    }
}

/// Renders a trial aggregate. Standard deviations are omitted for one trial.
pub fn render_aggregate(agg: &TrialAggregate, format: ReportFormat) -> String {
    let cell = |t: DataType| agg.types.iter().find(|(d, _)| *d == t).map(|(_, c)| *c);
    let with_std = agg.trials >= 2;
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(agg).expect("aggregate serialises");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut header: Vec<String> = table_header().iter().map(|s| s.to_string()).collect();
            let mut row: Vec<String> = DataType::ALL.iter().map(|t| two_dp(cell(*t).map(|c| c.mean))).collect();
            row.push(two_dp(Some(agg.mean.mean)));
            if with_std {
                header.extend(table_header().iter().map(|h| format!("{h}_std")));
                row.extend(DataType::ALL.iter().map(|t| two_dp(cell(*t).and_then(|c| c.std))));
                row.push(two_dp(agg.mean.std));
            }
            header.extend(["trials", "score", "accept_rate", "pooling"].map(String::from));
            row.push(agg.trials.to_string());
            row.push(agg.config.score_method.to_string());
            row.push(agg.config.accept_rate.to_string());
            row.push(agg.config.pooling.to_string());
            csv_text(vec![header, row])
        }
        ReportFormat::Markdown => {
            let mut header = table_header();
            let last = if with_std { "Mean ± Std" } else { "Mean" };
            *header.last_mut().expect("non-empty") = last;
            let mut out = markdown_header(&header, false);
            let mut cells: Vec<String> = DataType::ALL
                .iter()
                .map(|t| cell(*t).map_or("-".into(), |c| mean_std_cell(&c)))
                .collect();
            cells.push(mean_std_cell(&agg.mean));
            out.push_str(&markdown_row(cells));
            let _ = writeln!(
                out,
                "\n{} trial(s), {} score, accept rate {}",
                agg.trials, agg.config.score_method, agg.config.accept_rate
            );
            out
        }
    }
}

/// Parses a report written by [`render_report`] in CSV or JSON form.
pub fn parse_report(text: &str) -> Result<ReportSummary> {
    if text.trim_start().starts_with('{') {
        let report: BenchmarkReport = serde_json::from_str(text).map_err(|e| Error::ReportParse(e.to_string()))?;
        return Ok(report.summary());
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::ReportParse(e.to_string()))?.clone();
    let row = reader
        .records()
        .next()
        .ok_or_else(|| Error::ReportParse("no data row".into()))?
        .map_err(|e| Error::ReportParse(e.to_string()))?;
    let fields: BTreeMap<&str, &str> = header.iter().zip(row.iter()).collect();
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::ReportParse(format!("missing column `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::ReportParse(format!("column `{k}` is not a number")))
    };
    let mut type_dars = Vec::new();
    for t in DataType::ALL {
        let raw = get(&full_column(t))?;
        if !raw.is_empty() {
            let v = raw
                .parse()
                .map_err(|_| Error::ReportParse(format!("column `{}` is not a number", full_column(t))))?;
            type_dars.push((t, v));
        }
    }
    let top_m = get("gen_top_m")?;
    let config = EvalConfig {
        score_method: get("score")?.parse()?,
        accept_rate: num("accept_rate")?,
        pooling: get("pooling")?.parse()?,
        gen_gamma: num("gen_gamma")?,
        gen_top_m: if top_m.is_empty() {
            None
        } else {
            Some(top_m.parse().map_err(|_| Error::ReportParse("bad gen_top_m".into()))?)
        },
        allow_partial: type_dars.len() < DataType::ALL.len(),
        ..EvalConfig::default()
    };
    let threshold = CalibratedThreshold {
        value: num("threshold")?,
        accept_rate_target: config.accept_rate,
        achieved_accept_rate: num("achieved_accept_rate")?,
        n_calibration: get("n_calibration")?
            .parse()
            .map_err(|_| Error::ReportParse("bad n_calibration".into()))?,
    };
    let trial = get("trial_id")?;
    Ok(ReportSummary {
        config,
        threshold,
        type_dars,
        mean_dar: num("mean_dar")?,
        datasets: Vec::new(),
        trial_id: (!trial.is_empty()).then(|| trial.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn type_result(t: DataType, dar: f64) -> TypeResult {
        TypeResult {
            data_type: t,
            counts: ConfusionCounts::default(),
            dar,
            per_dataset: vec![],
        }
    }

    fn report_from_dars(dars: [f64; 5]) -> BenchmarkReport {
        let results: Vec<TypeResult> = DataType::ALL
            .iter()
            .zip(dars)
            .map(|(t, d)| type_result(*t, d))
            .collect();
        BenchmarkReport {
            num_classes: 10,
            threshold: CalibratedThreshold {
                value: 0.9,
                accept_rate_target: 0.95,
                achieved_accept_rate: 0.95,
                n_calibration: 100,
            },
            config: EvalConfig::default(),
            mean_dar: mean_over_types(&results).unwrap(),
            results,
            legacy: None,
            trial_id: None,
            warnings: vec![],
        }
    }

    #[test]
    fn renders_table_row() {
        let r = report_from_dars([93.20, 80.92, 3.57, 74.61, 62.62]);
        let csv = render_report(&r, ReportFormat::Csv);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("93.20,80.92,3.57,74.61,62.62,62.98,"), "{row}");
        assert!(csv.starts_with("Clean,Corrupt,Adversarial,Novel,Unrecog.,Mean,"));
        assert_eq!(csv, render_report(&r, ReportFormat::Csv));

        let md = render_report(&r, ReportFormat::Markdown);
        assert!(md.contains("| 93.20 | 80.92 | 3.57 | 74.61 | 62.62 | 62.98 |"), "{md}");
        assert!(!md.contains("Legacy"));
        assert_eq!(md, render_report(&r, ReportFormat::Markdown));
    }

    #[test]
    fn csv_round_trips_full_precision() {
        let mut r = report_from_dars([1.0 / 3.0, 80.92, 3.57, 200.0 / 3.0, 62.62]);
        r.trial_id = Some("seed,1".into());
        let parsed = parse_report(&render_report(&r, ReportFormat::Csv)).unwrap();
        let mut want = r.summary();
        want.datasets.clear();
        assert_eq!(parsed, want);

        let parsed = parse_report(&render_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(parsed, r.summary());
    }

    #[test]
    fn aggregate_examples() {
        let r = report_from_dars([10.0, 20.0, 30.0, 40.0, 50.0]);
        let agg = aggregate_trials(&[r.clone(), r.clone(), r.clone()]).unwrap();
        assert_eq!(agg.trials, 3);
        assert!(agg.types.iter().all(|(_, c)| c.std == Some(0.0)));
        assert_eq!(agg.mean.mean, 30.0);

        let s = CellStats::from_values(&[10.0, 20.0]);
        assert_eq!(s.mean, 15.0);
        assert!((s.std.unwrap() - 7.0710678118654755).abs() < 1e-12);

        let s = CellStats::from_values(&[62.98, 62.98]);
        assert_eq!(s.mean, 62.98);
        assert_eq!(s.std, Some(0.0));

        let one = aggregate_trials(std::slice::from_ref(&r)).unwrap();
        assert_eq!(one.mean.std, None);
        let csv = render_aggregate(&one, ReportFormat::Csv);
        assert!(!csv.contains("_std"), "{csv}");

        let mut other = r.clone();
        other.config.accept_rate = 0.99;
        assert!(matches!(
            aggregate_trials(&[r.clone(), other]),
            Err(Error::ReportMismatch(_))
        ));

        let mut partial = r.clone();
        partial.results.pop();
        assert!(matches!(aggregate_trials(&[r, partial]), Err(Error::ReportMismatch(_))));
        assert!(aggregate_trials(&[]).is_err());
    }

    #[test]
    fn aggregate_markdown_has_std() {
        let a = report_from_dars([10.0, 20.0, 30.0, 40.0, 50.0]);
        let b = report_from_dars([20.0, 20.0, 30.0, 40.0, 50.0]);
        let agg = aggregate_trials(&[a, b]).unwrap();
        let md = render_aggregate(&agg, ReportFormat::Markdown);
        assert!(md.contains("Mean ± Std"), "{md}");
        assert!(md.contains("15.00 ± 7.07"), "{md}");
    }
}
