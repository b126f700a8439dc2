//! Benchmark data model, the logit CSV and manifest JSON formats, and ingest
//! validation.
//!
//! Logit files are UTF-8 CSV with a header `id,label,logit_0,...,logit_{C-1}`.
//! Unknown-class samples (novel and unrecognisable data) carry label `-1`.
//! Validation is strict: a single bad row aborts the load with a diagnostic
//! naming the file, line and sample.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::ScoreMethod;

/// Wire value for the label of an unknown-class sample.
pub const UNKNOWN_LABEL: i64 = -1;

/// The five categories of test data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Clean,
    Corrupt,
    Adversarial,
    Novel,
    #[serde(alias = "unrecognizable")]
    Unrecognisable,
}

impl DataType {
    pub const ALL: [DataType; 5] = [
        DataType::Clean,
        DataType::Corrupt,
        DataType::Adversarial,
        DataType::Novel,
        DataType::Unrecognisable,
    ];

    /// Novel and unrecognisable data contain no sample of a training class.
    pub fn is_unknown(self) -> bool {
        matches!(self, DataType::Novel | DataType::Unrecognisable)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Clean => "clean",
            DataType::Corrupt => "corrupt",
            DataType::Adversarial => "adversarial",
            DataType::Novel => "novel",
            DataType::Unrecognisable => "unrecognisable",
        }
    }

    /// Column heading used in rendered tables.
    pub fn column_label(self) -> &'static str {
        match self {
            DataType::Clean => "Clean",
            DataType::Corrupt => "Corrupt",
            DataType::Adversarial => "Adversarial",
            DataType::Novel => "Novel",
            DataType::Unrecognisable => "Unrecog.",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(DataType::Clean),
            "corrupt" => Ok(DataType::Corrupt),
            "adversarial" => Ok(DataType::Adversarial),
            "novel" => Ok(DataType::Novel),
            "unrecognisable" | "unrecognizable" => Ok(DataType::Unrecognisable),
            other => Err(Error::InvalidArgument(format!("unknown data type `{other}`"))),
        }
    }
}

/// One sample: identifier, ground truth (`None` for unknown-class data) and
/// the raw, unnormalised classifier outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub sample_id: String,
    pub label: Option<usize>,
    pub logits: Vec<f64>,
}

impl LogitRecord {
    pub fn new(sample_id: impl Into<String>, label: Option<usize>, logits: Vec<f64>) -> Self {
        Self {
            sample_id: sample_id.into(),
            label,
            logits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub data_type: DataType,
    pub path: PathBuf,
    /// Perturbation budget of an adversarial set. Informational only.
    pub attack_budget: Option<f64>,
    /// Number of rows, counted when the manifest is loaded.
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_classes: usize,
    pub calibration_dataset: String,
    pub datasets: Vec<DatasetRef>,
    pub trial_id: Option<String>,
}

impl Manifest {
    pub fn calibration(&self) -> &DatasetRef {
        self.dataset(&self.calibration_dataset)
            .expect("validated manifest has a calibration dataset")
    }

    pub fn dataset(&self, name: &str) -> Option<&DatasetRef> {
        self.datasets.iter().find(|d| d.name == name)
    }

    /// Data types with at least one dataset, in canonical column order.
    pub fn types_present(&self) -> Vec<DataType> {
        DataType::ALL
            .into_iter()
            .filter(|t| self.datasets.iter().any(|d| d.data_type == *t))
            .collect()
    }

    pub fn missing_types(&self) -> Vec<DataType> {
        DataType::ALL
            .into_iter()
            .filter(|t| !self.datasets.iter().any(|d| d.data_type == *t))
            .collect()
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::manifest(
                "num_classes",
                format!("need at least 2 classes, got {}", self.num_classes),
            ));
        }
        if self.datasets.is_empty() {
            return Err(Error::manifest("datasets", "no datasets declared"));
        }
        let mut seen = HashSet::new();
        for (i, d) in self.datasets.iter().enumerate() {
            if d.name.is_empty() {
                return Err(Error::manifest(format!("datasets[{i}].name"), "empty name"));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(Error::manifest(
                    format!("datasets[{i}].name"),
                    format!("duplicate dataset name `{}`", d.name),
                ));
            }
            if let Some(eps) = d.attack_budget {
                if !eps.is_finite() || eps < 0.0 {
                    return Err(Error::manifest(
                        format!("datasets[{i}].attack_budget"),
                        format!("must be a finite non-negative number, got {eps}"),
                    ));
                }
            }
        }
        match self.dataset(&self.calibration_dataset) {
            None => Err(Error::manifest(
                "calibration_dataset",
                format!("no dataset named `{}`", self.calibration_dataset),
            )),
            Some(d) if d.data_type != DataType::Clean => Err(Error::manifest(
                "calibration_dataset",
                format!("`{}` has type {}, expected clean", d.name, d.data_type),
            )),
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    num_classes: usize,
    calibration_dataset: String,
    datasets: Vec<ManifestEntry>,
    #[serde(default)]
    trial_id: Option<String>,
}

/// Parses and fully validates a manifest, including every referenced logit
/// file. Relative dataset paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest = serde_json::from_str(&text).map_err(|source| Error::ManifestParse {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));

    let mut manifest = Manifest {
        num_classes: raw.num_classes,
        calibration_dataset: raw.calibration_dataset,
        datasets: raw
            .datasets
            .into_iter()
            .map(|d| DatasetRef {
                name: d.name,
                data_type: d.data_type,
                path: if d.path.is_absolute() {
                    d.path
                } else {
                    base.join(d.path)
                },
                attack_budget: d.attack_budget,
                sample_count: 0,
            })
            .collect(),
        trial_id: raw.trial_id,
    };
    manifest.validate()?;

    for (i, d) in manifest.datasets.iter().enumerate() {
        if !d.path.is_file() {
            return Err(Error::manifest(
                format!("datasets[{i}].path"),
                format!("logit file {} does not exist", d.path.display()),
            ));
        }
    }

    let num_classes = manifest.num_classes;
    let counts: Vec<usize> = manifest
        .datasets
        .par_iter()
        .map(|d| stream_logits(&d.path, d.data_type, num_classes, |_| Ok(())))
        .collect::<Result<_>>()?;
    for (d, n) in manifest.datasets.iter_mut().zip(counts) {
        d.sample_count = n;
    }
    Ok(manifest)
}

/// Loads every record of a dataset, validated against `num_classes` and the
/// dataset's data type. File order is preserved.
pub fn load_logits(dataset: &DatasetRef, num_classes: usize) -> Result<Vec<LogitRecord>> {
    let mut records = Vec::with_capacity(dataset.sample_count);
    stream_logits(&dataset.path, dataset.data_type, num_classes, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}

/// Streams a logit file row by row, validating each record before handing it
/// to `visit`. Returns the number of rows.
pub fn stream_logits<F>(path: &Path, data_type: DataType, num_classes: usize, mut visit: F) -> Result<usize>
where
    F: FnMut(LogitRecord) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));

    let row_err = |line: u64, message: String| Error::LogitRow {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut rows = reader.records();
    let header = match rows.next() {
        None => {
            return Err(Error::LogitFile {
                path: path.to_path_buf(),
                message: "empty file".into(),
            })
        }
        Some(h) => h.map_err(|e| row_err(1, e.to_string()))?,
    };
    check_header(&header, num_classes).map_err(|m| row_err(1, m))?;

    let mut seen = HashSet::new();
    let mut count = 0usize;
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let record = parse_row(&row, data_type, num_classes).map_err(|m| row_err(line, m))?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(row_err(line, format!("duplicate sample id `{}`", record.sample_id)));
        }
        visit(record)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::LogitFile {
            path: path.to_path_buf(),
            message: "no samples (header only)".into(),
        });
    }
    Ok(count)
}

fn check_header(header: &csv::StringRecord, num_classes: usize) -> Result<(), String> {
    let expected = num_classes + 2;
    if header.len() != expected {
        return Err(format!(
            "header has {} columns, expected {expected} (id,label,logit_0..logit_{})",
            header.len(),
            num_classes - 1
        ));
    }
    let field = |i| header.get(i).unwrap_or_default();
    if field(0) != "id" || field(1) != "label" {
        return Err("header must start with `id,label`".into());
    }
    for c in 0..num_classes {
        let want = format!("logit_{c}");
        if field(c + 2) != want {
            return Err(format!(
                "header column {} is `{}`, expected `{want}`",
                c + 2,
                field(c + 2)
            ));
        }
    }
    Ok(())
}

fn parse_row(row: &csv::StringRecord, data_type: DataType, num_classes: usize) -> Result<LogitRecord, String> {
    let expected = num_classes + 2;
    if row.len() != expected {
        return Err(format!("row has {} columns, expected {expected}", row.len()));
    }
    let sample_id = row[0].to_string();
    if sample_id.is_empty() {
        return Err("empty sample id".into());
    }
    let raw_label: i64 = row[1]
        .parse()
        .map_err(|_| format!("sample `{sample_id}`: label `{}` is not an integer", &row[1]))?;
    let label = match raw_label {
        UNKNOWN_LABEL => None,
        l if l >= 0 && (l as u64) < num_classes as u64 => Some(l as usize),
        l => {
            return Err(format!(
                "sample `{sample_id}`: label {l} out of range [-1, {}]",
                num_classes - 1
            ))
        }
    };
    match (data_type.is_unknown(), label) {
        (true, Some(l)) => {
            return Err(format!(
                "sample `{sample_id}`: unknown-type dataset contains known label {l}"
            ))
        }
        (false, None) => {
            return Err(format!(
                "sample `{sample_id}`: known-type dataset contains unknown label -1"
            ))
        }
        _ => {}
    }
    let mut logits = Vec::with_capacity(num_classes);
    for (c, cell) in row.iter().skip(2).enumerate() {
        let v: f64 = cell
            .parse()
            .map_err(|_| format!("sample `{sample_id}`: logit_{c} `{cell}` is not a number"))?;
        if !v.is_finite() {
            return Err(format!("sample `{sample_id}`: logit_{c} is not finite ({cell})"));
        }
        logits.push(v);
    }
    Ok(LogitRecord {
        sample_id,
        label,
        logits,
    })
}

/// Formats a value with at least nine significant digits, falling back to
/// the shortest exact representation when nine digits do not round-trip.
pub fn format_logit(v: f64) -> String {
    let nine = format!("{v:.8e}");
    if nine.parse::<f64>() == Ok(v) {
        nine
    } else {
        format!("{v:e}")
    }
}

pub fn write_logits_to<W: Write>(
    mut out: W,
    records: &[LogitRecord],
    num_classes: usize,
) -> Result<(), std::io::Error> {
    let mut header = String::from("id,label");
    for c in 0..num_classes {
        header.push_str(&format!(",logit_{c}"));
    }
    writeln!(out, "{header}")?;
    for r in records {
        let label = r.label.map_or(UNKNOWN_LABEL, |l| l as i64);
        write!(out, "{},{label}", r.sample_id)?;
        for v in &r.logits {
            write!(out, ",{}", format_logit(*v))?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes records in the logit wire format.
pub fn write_logits(path: impl AsRef<Path>, records: &[LogitRecord], num_classes: usize) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = records.iter().find(|r| r.logits.len() != num_classes) {
        return Err(Error::InvalidArgument(format!(
            "sample `{}` has {} logits, expected {num_classes}",
            bad.sample_id,
            bad.logits.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_logits_to(BufWriter::new(file), records, num_classes).map_err(|e| Error::io(path, e))
}

/// A dataset entry as it appears in manifest JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: DataType,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_budget: Option<f64>,
}

/// Serialises a manifest document. Paths are written as given.
pub fn manifest_json(
    num_classes: usize,
    calibration_dataset: &str,
    entries: &[ManifestEntry],
    trial_id: Option<&str>,
) -> String {
    let mut doc = serde_json::json!({
        "num_classes": num_classes,
        "calibration_dataset": calibration_dataset,
        "datasets": entries,
    });
    if let Some(t) = trial_id {
        doc["trial_id"] = serde_json::Value::String(t.to_string());
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("manifest serialises");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// One DAR over all samples of a data type.
    #[default]
    Pooled,
    /// Mean of the per-dataset DARs within a data type.
    #[serde(rename = "macro")]
    MacroPerDataset,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Pooling::Pooled),
            "macro" | "macro-per-dataset" => Ok(Pooling::MacroPerDataset),
            other => Err(Error::InvalidArgument(format!("unknown pooling `{other}`"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Pooled => "pooled",
            Pooling::MacroPerDataset => "macro",
        })
    }
}

pub const DEFAULT_ACCEPT_RATE: f64 = 0.95;
pub const DEFAULT_GEN_GAMMA: f64 = 0.1;
pub const DEFAULT_GEN_TOP_M: usize = 100;
pub const DEFAULT_LEGACY_TPR: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub score_method: ScoreMethod,
    /// Fraction of correctly classified clean samples to accept.
    pub accept_rate: f64,
    pub pooling: Pooling,
    pub gen_gamma: f64,
    /// `None` means `min(C, 100)`. Larger values are clamped to `C`.
    pub gen_top_m: Option<usize>,
    /// Permit a report that lacks one or more data types.
    pub allow_partial: bool,
    /// Also compute AUROC/AUPR/FPR and plain accuracy.
    pub legacy: bool,
    /// TPR at which the legacy FPR is reported.
    pub legacy_tpr: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            score_method: ScoreMethod::Msp,
            accept_rate: DEFAULT_ACCEPT_RATE,
            pooling: Pooling::Pooled,
            gen_gamma: DEFAULT_GEN_GAMMA,
            gen_top_m: None,
            allow_partial: false,
            legacy: false,
            legacy_tpr: DEFAULT_LEGACY_TPR,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accept_rate > 0.0 && self.accept_rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "accept_rate must lie strictly between 0 and 1, got {}",
                self.accept_rate
            )));
        }
        if !(self.gen_gamma > 0.0 && self.gen_gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gen_gamma must be positive, got {}",
                self.gen_gamma
            )));
        }
        if self.gen_top_m == Some(0) {
            return Err(Error::InvalidArgument("gen_top_m must be at least 1".into()));
        }
        if !(self.legacy_tpr > 0.0 && self.legacy_tpr <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "legacy_tpr must lie in (0, 1], got {}",
                self.legacy_tpr
            )));
        }
        Ok(())
    }

    pub fn effective_top_m(&self, num_classes: usize) -> usize {
        self.gen_top_m.unwrap_or(DEFAULT_GEN_TOP_M).min(num_classes).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn dataset(path: PathBuf, data_type: DataType) -> DatasetRef {
        DatasetRef {
            name: "d".into(),
            data_type,
            path,
            attack_budget: None,
            sample_count: 0,
        }
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "id,label,logit_0,logit_1\na,0,1.0,0.0\nb,1,0.5,2.5\nc,1,-1e-3,3\n",
        );
        let recs = load_logits(&dataset(p, DataType::Clean), 2).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs.iter().map(|r| r.label).collect::<Vec<_>>(),
            vec![Some(0), Some(1), Some(1)]
        );
        assert_eq!(recs[2].logits, vec![-1e-3, 3.0]);
    }

    #[test]
    fn nan_row_names_sample() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "id,label,logit_0,logit_1\na,0,1,0\nbad7,1,NaN,0\n");
        let err = load_logits(&dataset(p, DataType::Clean), 2).unwrap_err().to_string();
        assert!(err.contains("bad7"), "{err}");
        assert!(err.contains(":3:"), "{err}");
    }

    #[test]
    fn novel_with_unknown_labels_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.csv", "id,label,logit_0,logit_1\na,-1,1,0\nb,-1,0,1\n");
        let recs = load_logits(&dataset(p, DataType::Novel), 2).unwrap();
        assert!(recs.iter().all(|r| r.label.is_none()));
    }

    #[test]
    fn row_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("id,label,logit_0,logit_1\na,0,1\n", DataType::Clean, "columns"),
            ("id,label,logit_0,logit_1\na,2,1,0\n", DataType::Clean, "out of range"),
            ("id,label,logit_0,logit_1\na,-2,1,0\n", DataType::Clean, "out of range"),
            (
                "id,label,logit_0,logit_1\na,-1,1,0\n",
                DataType::Corrupt,
                "unknown label",
            ),
            ("id,label,logit_0,logit_1\na,1,1,0\n", DataType::Novel, "known label"),
            ("id,label,logit_0,logit_1\na,1,inf,0\n", DataType::Clean, "not finite"),
            ("id,label,logit_0,logit_1\na,1,x,0\n", DataType::Clean, "not a number"),
            (
                "id,label,logit_0,logit_1\na,1,1,0\na,0,1,0\n",
                DataType::Clean,
                "duplicate",
            ),
            ("id,label,logit_0,logit_1\n", DataType::Clean, "no samples"),
            ("", DataType::Clean, "empty"),
            (
                "id,label,logit_0,logit_2\na,1,1,0\n",
                DataType::Clean,
                "expected `logit_1`",
            ),
            ("id,label,logit_0\na,1,1\n", DataType::Clean, "header"),
        ];
        for (i, (body, ty, needle)) in cases.iter().enumerate() {
            let p = write(dir.path(), &format!("{i}.csv"), body);
            let err = load_logits(&dataset(p, *ty), 2).unwrap_err().to_string();
            assert!(err.contains(needle), "case {i}: {err}");
        }
    }

    fn manifest_dir(novel_body: &str, extra: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let known = "id,label,logit_0,logit_1\na,0,1,0\nb,1,0,1\n";
        let unknown = "id,label,logit_0,logit_1\nu,-1,1,0\n";
        write(dir.path(), "clean.csv", known);
        write(dir.path(), "corrupt.csv", known);
        write(dir.path(), "adv.csv", known);
        write(dir.path(), "novel.csv", novel_body);
        write(dir.path(), "unrec.csv", unknown);
        let body = format!(
            r#"{{"num_classes": 2, "calibration_dataset": "clean", "datasets": [
                {{"name": "clean", "type": "clean", "path": "clean.csv"}},
                {{"name": "corrupt", "type": "corrupt", "path": "corrupt.csv"}},
                {{"name": "adv", "type": "adversarial", "path": "adv.csv", "attack_budget": 0.03}},
                {{"name": "novel", "type": "novel", "path": "novel.csv"}},
                {{"name": "unrec", "type": "unrecognisable", "path": "unrec.csv"}}{extra}
            ]}}"#
        );
        write(dir.path(), "manifest.json", &body);
        dir
    }

    #[test]
    fn manifest_well_formed() {
        let dir = manifest_dir("id,label,logit_0,logit_1\nu,-1,1,0\nv,-1,0,0\n", "");
        let m = load_manifest(dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.num_classes, 2);
        assert_eq!(m.datasets.len(), 5);
        assert_eq!(m.dataset("novel").unwrap().sample_count, 2);
        assert_eq!(m.dataset("adv").unwrap().attack_budget, Some(0.03));
        assert!(m.missing_types().is_empty());
        // idempotent
        assert_eq!(m, load_manifest(dir.path().join("manifest.json")).unwrap());
    }

    #[test]
    fn manifest_novel_with_known_label() {
        let dir = manifest_dir("id,label,logit_0,logit_1\nu,3,1,0\n", "");
        let err = load_manifest(dir.path().join("manifest.json")).unwrap_err().to_string();
        // label 3 is also out of range for C=2, so widen C to see the type check
        assert!(err.contains("out of range") || err.contains("known label"), "{err}");

        let dir = manifest_dir("id,label,logit_0,logit_1\nu,1,1,0\n", "");
        let err = load_manifest(dir.path().join("manifest.json")).unwrap_err().to_string();
        assert!(err.contains("unknown-type dataset contains known label"), "{err}");
    }

    #[test]
    fn manifest_duplicate_name() {
        let dir = manifest_dir(
            "id,label,logit_0,logit_1\nu,-1,1,0\n",
            r#", {"name": "clean", "type": "clean", "path": "clean.csv"}"#,
        );
        let err = load_manifest(dir.path().join("manifest.json")).unwrap_err().to_string();
        assert!(err.contains("duplicate dataset name `clean`"), "{err}");
        assert!(err.contains("datasets[5].name"), "{err}");
    }

    #[test]
    fn manifest_dangling_and_calibration_errors() {
        let dir = manifest_dir(
            "id,label,logit_0,logit_1\nu,-1,1,0\n",
            r#", {"name": "gone", "type": "corrupt", "path": "missing.csv"}"#,
        );
        let err = load_manifest(dir.path().join("manifest.json")).unwrap_err().to_string();
        assert!(err.contains("datasets[5].path"), "{err}");

        let p = write(
            dir.path(),
            "bad.json",
            r#"{"num_classes": 2, "calibration_dataset": "corrupt", "datasets": [
                {"name": "corrupt", "type": "corrupt", "path": "corrupt.csv"}]}"#,
        );
        let err = load_manifest(p).unwrap_err().to_string();
        assert!(err.contains("calibration_dataset"), "{err}");

        let p = write(
            dir.path(),
            "nocal.json",
            r#"{"num_classes": 2, "calibration_dataset": "x", "datasets": [
                {"name": "clean", "type": "clean", "path": "clean.csv"}]}"#,
        );
        assert!(load_manifest(p)
            .unwrap_err()
            .to_string()
            .contains("no dataset named `x`"));

        let p = write(
            dir.path(),
            "one.json",
            r#"{"num_classes": 1, "calibration_dataset": "clean", "datasets": [
                {"name": "clean", "type": "clean", "path": "clean.csv"}]}"#,
        );
        assert!(load_manifest(p).unwrap_err().to_string().contains("num_classes"));

        let p = write(dir.path(), "garbage.json", "{ not json");
        assert!(matches!(load_manifest(p), Err(Error::ManifestParse { .. })));

        let p = write(
            dir.path(),
            "typo.json",
            r#"{"num_classes": 2, "calibration_dataset": "clean", "datasets": [
                {"name": "clean", "type": "clen", "path": "clean.csv"}]}"#,
        );
        assert!(matches!(load_manifest(p), Err(Error::ManifestParse { .. })));
    }

    #[test]
    fn config_defaults() {
        let c = EvalConfig::default();
        assert_eq!(c.score_method, ScoreMethod::Msp);
        assert_eq!(c.accept_rate, 0.95);
        assert_eq!(c.effective_top_m(10), 10);
        assert_eq!(c.effective_top_m(1000), 100);
        c.validate().unwrap();
        for q in [0.0, 1.0, -0.1, f64::NAN] {
            let bad = EvalConfig {
                accept_rate: q,
                ..EvalConfig::default()
            };
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn format_logit_has_nine_digits() {
        assert_eq!(format_logit(0.5), "5.00000000e-1");
        let third = 1.0f64 / 3.0;
        assert_eq!(format_logit(third).parse::<f64>().unwrap(), third);
    }

    fn record_strategy(c: usize) -> impl Strategy<Value = Vec<(Option<usize>, Vec<f64>)>> {
        prop::collection::vec(
            (
                prop::option::of(0..c),
                prop::collection::vec(
                    prop_oneof![-1e6f64..1e6, any::<f64>().prop_filter("finite", |v| v.is_finite())],
                    c,
                ),
            ),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn wire_round_trip(rows in record_strategy(4), unknown in any::<bool>()) {
            let records: Vec<LogitRecord> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (l, z))| LogitRecord::new(
                    format!("s{i}"),
                    if unknown { None } else { Some(l.unwrap_or(0)) },
                    z,
                ))
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.csv");
            write_logits(&p, &records, 4).unwrap();
            let ty = if unknown { DataType::Novel } else { DataType::Clean };
            let back = load_logits(&dataset(p, ty), 4).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
