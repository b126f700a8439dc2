//! Post-hoc confidence scores computed from a single logit vector.
//!
//! Every score is oriented so that a higher value means the sample is more
//! likely to belong to a known class.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::EvalConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMethod {
    /// Maximum softmax probability.
    #[default]
    Msp,
    /// Maximum logit.
    Mls,
    /// Log-sum-exp of the logits (temperature 1).
    Energy,
    /// Negated generalised entropy over the top-M softmax probabilities.
    Gen,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 4] = [
        ScoreMethod::Msp,
        ScoreMethod::Mls,
        ScoreMethod::Energy,
        ScoreMethod::Gen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMethod::Msp => "msp",
            ScoreMethod::Mls => "mls",
            ScoreMethod::Energy => "energy",
            ScoreMethod::Gen => "gen",
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msp" => Ok(ScoreMethod::Msp),
            "mls" => Ok(ScoreMethod::Mls),
            "energy" => Ok(ScoreMethod::Energy),
            "gen" => Ok(ScoreMethod::Gen),
            other => Err(Error::InvalidArgument(format!("unknown score method `{other}`"))),
        }
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("softmax of an empty vector"));
    }
    let max = max_logit(logits);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// Index of the largest logit; ties go to the lowest index.
///
/// Panics on an empty slice.
pub fn predicted_class(logits: &[f64]) -> usize {
    assert!(!logits.is_empty(), "predicted_class of an empty vector");
    let mut best = 0;
    for (i, z) in logits.iter().enumerate().skip(1) {
        if *z > logits[best] {
            best = i;
        }
    }
    best
}

fn max_logit(logits: &[f64]) -> f64 {
    logits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Sum of `exp(z - max)`; always in `[1, len]`.
fn shifted_exp_sum(logits: &[f64], max: f64) -> f64 {
    logits.iter().map(|z| (z - max).exp()).sum()
}

/// Maximum softmax probability.
pub fn msp(logits: &[f64]) -> f64 {
    let max = max_logit(logits);
    // the arg-max entry of the shifted softmax is exp(0) / sum
    1.0 / shifted_exp_sum(logits, max)
}

/// Maximum logit score.
pub fn mls(logits: &[f64]) -> f64 {
    max_logit(logits)
}

/// `log(sum(exp(z)))`, computed in shifted form so it never overflows.
pub fn energy_confidence(logits: &[f64]) -> f64 {
    let max = max_logit(logits);
    max + shifted_exp_sum(logits, max).ln()
}

/// Generalised-entropy confidence: `-sum_{top M} p^gamma (1 - p)^gamma`.
///
/// Terms are accumulated from the largest probability down, so the value is
/// non-increasing in `top_m` even under rounding.
pub fn gen_confidence(logits: &[f64], gamma: f64, top_m: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "GEN gamma must be positive, got {gamma}"
        )));
    }
    if top_m == 0 || top_m > logits.len() {
        return Err(Error::InvalidArgument(format!(
            "GEN top_m must lie in [1, {}], got {top_m}",
            logits.len()
        )));
    }
    let mut p = softmax(logits)?;
    Ok(-gen_sum(&mut p, gamma, top_m))
}

fn gen_sum(p: &mut [f64], gamma: f64, top_m: usize) -> f64 {
    let by_desc = |a: &f64, b: &f64| b.total_cmp(a);
    if top_m < p.len() {
        p.select_nth_unstable_by(top_m - 1, by_desc);
    }
    let top = &mut p[..top_m];
    top.sort_unstable_by(by_desc);
    top.iter().map(|&pi| pi.powf(gamma) * (1.0 - pi).powf(gamma)).sum()
}

/// A score method together with its (already validated) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scorer {
    method: ScoreMethod,
    gamma: f64,
    top_m: usize,
    num_classes: usize,
}

impl Scorer {
    pub fn new(method: ScoreMethod, num_classes: usize, gamma: f64, top_m: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be positive".into()));
        }
        if method == ScoreMethod::Gen {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "GEN gamma must be positive, got {gamma}"
                )));
            }
            if top_m == 0 || top_m > num_classes {
                return Err(Error::InvalidArgument(format!(
                    "GEN top_m must lie in [1, {num_classes}], got {top_m}"
                )));
            }
        }
        Ok(Self {
            method,
            gamma,
            top_m,
            num_classes,
        })
    }

    /// Builds a scorer from an evaluation config, clamping `top_m` to `C`.
    pub fn from_config(config: &EvalConfig, num_classes: usize) -> Result<Self> {
        Self::new(
            config.score_method,
            num_classes,
            config.gen_gamma,
            config.effective_top_m(num_classes),
        )
    }

    pub fn method(&self) -> ScoreMethod {
        self.method
    }

    pub fn top_m(&self) -> usize {
        self.top_m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Confidence for a logit vector of length `C`.
    pub fn confidence(&self, logits: &[f64]) -> f64 {
        debug_assert_eq!(logits.len(), self.num_classes);
        match self.method {
            ScoreMethod::Msp => msp(logits),
            ScoreMethod::Mls => mls(logits),
            ScoreMethod::Energy => energy_confidence(logits),
            ScoreMethod::Gen => {
                let mut p = softmax(logits).expect("non-empty logits");
                -gen_sum(&mut p, self.gamma, self.top_m)
            }
        }
    }
}
