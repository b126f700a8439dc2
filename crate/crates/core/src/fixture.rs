//! Self-contained synthetic benchmark.
//!
//! A seeded nearest-centroid linear classifier over Gaussian class clusters
//! stands in for a trained network, so the whole pipeline can run without
//! any ML framework. Logits are `w_k . x + b_k` with `w_k = mu_k` and
//! `b_k = -|mu_k|^2 / 2`.
//!
//! - clean: `mu_y + sigma * e`
//! - corrupt: a clean draw plus extra isotropic noise
//! - adversarial: a clean draw moved by one sign-gradient step against the
//!   margin to the strongest competing class
//! - novel: samples around held-out cluster centres (label -1)
//! - unrecognisable: wide isotropic noise around the origin (label -1)

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{manifest_json, write_logits, DataType, LogitRecord, ManifestEntry};
use crate::error::{Error, Result};
use crate::rng::{domain, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub dim: usize,
    /// Held-out cluster centres used for the novel set.
    pub novel_classes: usize,
    /// Samples per data type, in `DataType::ALL` order. Zero omits the type.
    pub samples: [usize; 5],
    /// Standard deviation of the class centres.
    pub center_scale: f64,
    /// Within-cluster standard deviation.
    pub cluster_noise: f64,
    pub corrupt_noise: f64,
    pub adversarial_step: f64,
    pub unrecognisable_scale: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_classes: 10,
            dim: 16,
            novel_classes: 5,
            samples: [1000; 5],
            center_scale: 0.8,
            cluster_noise: 1.0,
            corrupt_noise: 0.8,
            adversarial_step: 1.0,
            unrecognisable_scale: 3.0,
        }
    }
}

impl FixtureConfig {
    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = [n; 5];
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidArgument(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("dim", self.dim)?;
        positive("novel classes", self.novel_classes)?;
        positive("clean sample count", self.samples[0])?;
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("fixture needs at least 2 classes".into()));
        }
        for (name, v) in [
            ("center_scale", self.center_scale),
            ("cluster_noise", self.cluster_noise),
            ("corrupt_noise", self.corrupt_noise),
            ("adversarial_step", self.adversarial_step),
            ("unrecognisable_scale", self.unrecognisable_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

struct LinearModel {
    centers: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearModel {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_vec(stream: &mut Stream, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * stream.standard_normal()).collect()
}

fn around(center: &[f64], stream: &mut Stream, scale: f64) -> Vec<f64> {
    center.iter().map(|c| c + scale * stream.standard_normal()).collect()
}

/// Files written by [`write_fixture`].
#[derive(Debug, Clone)]
pub struct Fixture {
    pub manifest_path: PathBuf,
    pub datasets: Vec<(DataType, PathBuf, usize)>,
}

/// Builds the synthetic datasets in memory, in `DataType::ALL` order,
/// skipping types with zero samples.
pub fn build_fixture(config: &FixtureConfig) -> Result<Vec<(DataType, Vec<LogitRecord>)>> {
    config.validate()?;
    let (c, d) = (config.num_classes, config.dim);
    let mut model_stream = Stream::new(config.seed, domain::FIXTURE, 0);
    let centers: Vec<Vec<f64>> = (0..c)
        .map(|_| gaussian_vec(&mut model_stream, d, config.center_scale))
        .collect();
    let novel_centers: Vec<Vec<f64>> = (0..config.novel_classes)
        .map(|_| gaussian_vec(&mut model_stream, d, config.center_scale))
        .collect();
    let bias = centers.iter().map(|w| -0.5 * dot(w, w)).collect();
    let model = LinearModel { centers, bias };

    let mut out = Vec::new();
    for (i, ty) in DataType::ALL.iter().enumerate() {
        let n = config.samples[i];
        if n == 0 {
            continue;
        }
        let mut stream = Stream::new(config.seed, domain::FIXTURE, i as u64 + 1);
        let mut records = Vec::with_capacity(n);
        for s in 0..n {
            let (label, x) = match ty {
                DataType::Clean | DataType::Corrupt | DataType::Adversarial => {
                    let y = stream.below(c as u64) as usize;
                    let mut x = around(&model.centers[y], &mut stream, config.cluster_noise);
                    if *ty == DataType::Corrupt {
                        x = around(&x, &mut stream, config.corrupt_noise);
                    } else if *ty == DataType::Adversarial {
                        adversarial_step(&model, &mut x, y, config.adversarial_step);
                    }
                    (Some(y), x)
                }
                DataType::Novel => {
                    let k = stream.below(novel_centers.len() as u64) as usize;
                    (None, around(&novel_centers[k], &mut stream, config.cluster_noise))
                }
                DataType::Unrecognisable => (None, gaussian_vec(&mut stream, d, config.unrecognisable_scale)),
            };
            records.push(LogitRecord::new(format!("{ty}-{s:06}"), label, model.logits(&x)));
        }
        out.push((*ty, records));
    }
    Ok(out)
}

/// One step of size `eps` along `-sign(grad)` of the margin `z_y - z_j`,
/// where `j` is the highest-scoring class other than `y`.
fn adversarial_step(model: &LinearModel, x: &mut [f64], y: usize, eps: f64) {
    let z = model.logits(x);
    let j = (0..z.len())
        .filter(|k| *k != y)
        .fold(None, |best: Option<usize>, k| match best {
            Some(b) if z[b] >= z[k] => Some(b),
            _ => Some(k),
        })
        .expect("at least two classes");
    for (xi, (wy, wj)) in x.iter_mut().zip(model.centers[y].iter().zip(&model.centers[j])) {
        let g = wy - wj;
        if g != 0.0 {
            *xi -= eps * g.signum();
        }
    }
}

/// Writes one logit CSV per data type and `manifest.json` into `out_dir`.
pub fn write_fixture(config: &FixtureConfig, out_dir: &Path) -> Result<Fixture> {
    let sets = build_fixture(config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::new();
    let mut datasets = Vec::new();
    for (ty, records) in &sets {
        let file = format!("{ty}.csv");
        let path = out_dir.join(&file);
        write_logits(&path, records, config.num_classes)?;
        entries.push(ManifestEntry {
            name: ty.to_string(),
            data_type: *ty,
            path: PathBuf::from(file),
            attack_budget: (*ty == DataType::Adversarial).then_some(config.adversarial_step),
        });
        datasets.push((*ty, path, records.len()));
    }
    let manifest_path = out_dir.join("manifest.json");
    let trial = format!("synthetic-seed-{}", config.seed);
    let text = manifest_json(config.num_classes, "clean", &entries, Some(&trial));
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(Fixture {
        manifest_path,
        datasets,
    })
}
