//! Probability-averaging ensembles and accuracy-vs-ensemble-size curves.
//!
//! Prediction files are JSON lines, one `{"sample_id", "model_id", "probs"}`
//! object per model and sample. Curves are written as CSV with header
//! `size,mean_acc,std_acc`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::tta::argmax;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no models given")]
    NoModels,
    #[error("sample {sample} missing from model {model}")]
    MissingSample { model: String, sample: SampleId },
    #[error("sample {0} has no label")]
    MissingLabel(SampleId),
    #[error("model {model} sample {sample}: expected {expected} classes, got {got}")]
    ClassCount { model: String, sample: SampleId, expected: usize, got: usize },
    #[error("model {model} sample {sample}: not a probability distribution")]
    NotADistribution { model: String, sample: SampleId },
    #[error("model {model}: covers {got} samples, expected {expected}")]
    Coverage { model: String, expected: usize, got: usize },
    #[error("duplicate entry for model {model} sample {sample}")]
    Duplicate { model: String, sample: SampleId },
    #[error("ensemble size {size} outside [1, {models}]")]
    BadSize { size: usize, models: usize },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sample identifier. Files may carry it as a JSON string or integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SampleId(pub String);

impl<'de> Deserialize<'de> for SampleId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Str(s) => SampleId(s),
            Raw::Int(i) => SampleId(i.to_string()),
        })
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SampleId {
    fn from(s: &str) -> Self {
        SampleId(s.to_string())
    }
}

impl From<usize> for SampleId {
    fn from(i: usize) -> Self {
        SampleId(i.to_string())
    }
}

/// Post-TTA probability vectors of one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPredictions {
    pub model_id: String,
    pub samples: BTreeMap<SampleId, Vec<f64>>,
}

const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

impl ModelPredictions {
    pub fn new(model_id: impl Into<String>) -> Self {
        ModelPredictions { model_id: model_id.into(), samples: BTreeMap::new() }
    }

    pub fn insert(&mut self, sample: impl Into<SampleId>, probs: Vec<f64>) -> Result<(), EnsembleError> {
        let sample = sample.into();
        let valid = probs.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (probs.iter().sum::<f64>() - 1.0).abs() <= DISTRIBUTION_TOLERANCE;
        if !valid {
            return Err(EnsembleError::NotADistribution { model: self.model_id.clone(), sample });
        }
        if self.samples.contains_key(&sample) {
            return Err(EnsembleError::Duplicate { model: self.model_id.clone(), sample });
        }
        self.samples.insert(sample, probs);
        Ok(())
    }
}

/// Mean class-probability vector over `models` for one sample, and its argmax
/// (lowest index on ties).
///
/// Each class column is summed in sorted order, so the result does not
/// depend on model order at all.
pub fn combine(models: &[ModelPredictions], sample: &SampleId) -> Result<(usize, Vec<f64>), EnsembleError> {
    let refs: Vec<&ModelPredictions> = models.iter().collect();
    combine_refs(&refs, sample)
}

fn combine_refs(models: &[&ModelPredictions], sample: &SampleId) -> Result<(usize, Vec<f64>), EnsembleError> {
    let first = models.first().ok_or(EnsembleError::NoModels)?;
    fn lookup<'a>(m: &'a ModelPredictions, sample: &SampleId) -> Result<&'a Vec<f64>, EnsembleError> {
        m.samples
            .get(sample)
            .ok_or_else(|| EnsembleError::MissingSample { model: m.model_id.clone(), sample: sample.clone() })
    }
    let classes = lookup(first, sample)?.len();
    let mut columns = vec![Vec::with_capacity(models.len()); classes];
    for m in models {
        let probs = lookup(m, sample)?;
        if probs.len() != classes {
            return Err(EnsembleError::ClassCount {
                model: m.model_id.clone(),
                sample: sample.clone(),
                expected: classes,
                got: probs.len(),
            });
        }
        for (col, p) in columns.iter_mut().zip(probs) {
            col.push(*p);
        }
    }
    let n = models.len() as f64;
    let mean: Vec<f64> = columns
        .into_iter()
        .map(|mut col| {
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / n
        })
        .collect();
    let class = argmax(&mean).unwrap_or(0);
    Ok((class, mean))
}

fn accuracy_refs(models: &[&ModelPredictions], labels: &BTreeMap<SampleId, usize>) -> Result<f64, EnsembleError> {
    let mut correct = 0usize;
    for (sample, label) in labels {
        if combine_refs(models, sample)?.0 == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len().max(1) as f64)
}

/// Top-1 accuracy of the ensemble over every labelled sample.
pub fn ensemble_accuracy(models: &[ModelPredictions], labels: &BTreeMap<SampleId, usize>) -> Result<f64, EnsembleError> {
    let refs: Vec<&ModelPredictions> = models.iter().collect();
    accuracy_refs(&refs, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: usize,
    pub mean_acc: f64,
    /// Population standard deviation across repeats.
    pub std_acc: f64,
}

/// For each ensemble size, the mean and spread of accuracy over `repeats`
/// random subsets of distinct models. The full-size subset is unique, so it
/// is evaluated once and reported with zero spread.
pub fn ensemble_size_curve<R: Rng + ?Sized>(
    models: &[ModelPredictions],
    labels: &BTreeMap<SampleId, usize>,
    sizes: &[usize],
    repeats: usize,
    rng: &mut R,
) -> Result<Vec<CurvePoint>, EnsembleError> {
    if models.is_empty() {
        return Err(EnsembleError::NoModels);
    }
    if repeats == 0 {
        return Err(EnsembleError::ZeroRepeats);
    }
    if let Some(&size) = sizes.iter().find(|s| **s == 0 || **s > models.len()) {
        return Err(EnsembleError::BadSize { size, models: models.len() });
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let accs: Vec<f64> = if size == models.len() {
            let all: Vec<&ModelPredictions> = models.iter().collect();
            vec![accuracy_refs(&all, labels)?]
        } else {
            (0..repeats)
                .map(|_| {
                    let subset: Vec<&ModelPredictions> =
                        sample_indices(rng, models.len(), size).into_iter().map(|i| &models[i]).collect();
                    accuracy_refs(&subset, labels)
                })
                .collect::<Result<_, _>>()?
        };
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
        points.push(CurvePoint { size, mean_acc: mean, std_acc: var.sqrt() });
    }
    Ok(points)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionLine {
    sample_id: SampleId,
    model_id: String,
    probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelLine {
    sample_id: SampleId,
    label: usize,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(reader: impl BufRead) -> impl Iterator<Item = Result<(usize, T), EnsembleError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        match line {
            Err(e) => Some(Err(e.into())),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(
                serde_json::from_str(&l)
                    .map(|v| (line_no, v))
                    .map_err(|e| EnsembleError::Parse { line: line_no, message: e.to_string() }),
            ),
        }
    })
}

/// Reads a prediction file and groups it by model, in order of first
/// appearance. Every model must cover the same samples.
pub fn read_predictions(reader: impl BufRead) -> Result<Vec<ModelPredictions>, EnsembleError> {
    let mut models: Vec<ModelPredictions> = Vec::new();
    for item in parse_lines::<PredictionLine>(reader) {
        let (line, p) = item?;
        let idx = match models.iter().position(|m| m.model_id == p.model_id) {
            Some(i) => i,
            None => {
                models.push(ModelPredictions::new(p.model_id.clone()));
                models.len() - 1
            }
        };
        models[idx]
            .insert(p.sample_id, p.probs)
            .map_err(|e| EnsembleError::Parse { line, message: e.to_string() })?;
    }
    check_coverage(&models)?;
    Ok(models)
}

/// Every model must hold the same sample ids with the same class count.
pub fn check_coverage(models: &[ModelPredictions]) -> Result<(), EnsembleError> {
    let Some(first) = models.first() else { return Ok(()) };
    for m in models {
        if m.samples.len() != first.samples.len() {
            return Err(EnsembleError::Coverage {
                model: m.model_id.clone(),
                expected: first.samples.len(),
                got: m.samples.len(),
            });
        }
        for (sample, probs) in &first.samples {
            let other = m.samples.get(sample).ok_or_else(|| EnsembleError::MissingSample {
                model: m.model_id.clone(),
                sample: sample.clone(),
            })?;
            if other.len() != probs.len() {
                return Err(EnsembleError::ClassCount {
                    model: m.model_id.clone(),
                    sample: sample.clone(),
                    expected: probs.len(),
                    got: other.len(),
                });
            }
        }
    }
    Ok(())
}

pub fn write_predictions(mut writer: impl Write, models: &[ModelPredictions]) -> Result<(), EnsembleError> {
    for m in models {
        for (sample, probs) in &m.samples {
            let line = PredictionLine { sample_id: sample.clone(), model_id: m.model_id.clone(), probs: probs.clone() };
            serde_json::to_writer(&mut writer, &line).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Labels file: JSON lines `{"sample_id": ..., "label": <class index>}`.
pub fn read_labels(reader: impl BufRead) -> Result<BTreeMap<SampleId, usize>, EnsembleError> {
    let mut labels = BTreeMap::new();
    for item in parse_lines::<LabelLine>(reader) {
        let (_, l) = item?;
        labels.insert(l.sample_id, l.label);
    }
    Ok(labels)
}

pub fn write_labels(mut writer: impl Write, labels: &BTreeMap<SampleId, usize>) -> Result<(), EnsembleError> {
    for (sample_id, label) in labels {
        serde_json::to_writer(&mut writer, &LabelLine { sample_id: sample_id.clone(), label: *label })
            .map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_curve_csv(mut writer: impl Write, points: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(writer, "size,mean_acc,std_acc")?;
    for p in points {
        writeln!(writer, "{},{},{}", p.size, p.mean_acc, p.std_acc)?;
    }
    Ok(())
}
