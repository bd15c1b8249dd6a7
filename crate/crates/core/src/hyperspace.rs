//! Hyperparameter search space and trial sampling.
//!
//! A [`SearchSpace`] is plain data, usually read from the campaign config:
//!
//! ```toml
//! [search_space]
//! learning_rate = { loguniform = [1e-4, 0.1] }
//! weight_decay = { loguniform = [1e-5, 0.1] }
//! randaugment_n = { choice = [1, 2, 3] }
//! randaugment_m = { choice = [2, 6, 10, 14] }
//! batch_size = { choice = [8, 16] }
//! ```

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("{name}: loguniform bounds must satisfy 0 < low < high, got [{low}, {high}]")]
    BadBounds { name: String, low: f64, high: f64 },
    #[error("{name}: choice needs at least one value")]
    EmptyChoice { name: String },
    #[error("{name}: duplicate choice value {value}")]
    DuplicateChoice { name: String, value: Scalar },
    #[error("{name}: integer parameter must be a choice of positive integers")]
    NotInteger { name: String },
}

/// A choice value. Integers stay integers so `N`, `M` and batch size never
/// round-trip through floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Real(f64),
}

impl Scalar {
    pub fn as_f64(self) -> f64 {
        match self {
            Scalar::Int(v) => v as f64,
            Scalar::Real(v) => v,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Real(v) => write!(f, "{v}"),
        }
    }
}

/// Domain of a single hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamSpec {
    #[serde(rename = "loguniform")]
    LogUniform([f64; 2]),
    #[serde(rename = "choice")]
    Choice(Vec<Scalar>),
}

impl ParamSpec {
    pub fn log_uniform(low: f64, high: f64) -> Self {
        ParamSpec::LogUniform([low, high])
    }

    pub fn choice<T: Into<Scalar>>(values: impl IntoIterator<Item = T>) -> Self {
        ParamSpec::Choice(values.into_iter().map(Into::into).collect())
    }

    fn check(&self, name: &str) -> Result<(), SpaceError> {
        match self {
            ParamSpec::LogUniform([low, high]) => {
                if !(low.is_finite() && high.is_finite() && *low > 0.0 && low < high) {
                    return Err(SpaceError::BadBounds { name: name.into(), low: *low, high: *high });
                }
            }
            ParamSpec::Choice(values) => {
                if values.is_empty() {
                    return Err(SpaceError::EmptyChoice { name: name.into() });
                }
                for (i, v) in values.iter().enumerate() {
                    if values[..i].iter().any(|w| w.as_f64() == v.as_f64()) {
                        return Err(SpaceError::DuplicateChoice { name: name.into(), value: *v });
                    }
                }
            }
        }
        Ok(())
    }

    /// Maps a unit draw `u ∈ [0, 1]` onto the log-uniform range:
    /// `exp(ln low + u·(ln high − ln low))`, clamped to the closed range.
    /// Returns `None` for choice specs.
    pub fn log_uniform_from_unit(&self, u: f64) -> Option<f64> {
        match self {
            ParamSpec::LogUniform([low, high]) => {
                if u <= 0.0 {
                    return Some(*low);
                }
                if u >= 1.0 {
                    return Some(*high);
                }
                let (a, b) = (low.ln(), high.ln());
                Some((a + u * (b - a)).exp().clamp(*low, *high))
            }
            ParamSpec::Choice(_) => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        match self {
            ParamSpec::LogUniform(_) => {
                let u: f64 = rng.random();
                Scalar::Real(self.log_uniform_from_unit(u).expect("loguniform"))
            }
            ParamSpec::Choice(values) => values[rng.random_range(0..values.len())],
        }
    }

    pub fn contains(&self, value: Scalar) -> bool {
        match self {
            ParamSpec::LogUniform([low, high]) => {
                let v = value.as_f64();
                v >= *low && v <= *high
            }
            ParamSpec::Choice(values) => match value {
                Scalar::Int(x) => values.iter().any(|v| match v {
                    Scalar::Int(y) => *y == x,
                    Scalar::Real(y) => *y == x as f64,
                }),
                Scalar::Real(x) => values.iter().any(|v| v.as_f64() == x),
            },
        }
    }

    fn is_positive_int_choice(&self) -> bool {
        matches!(self, ParamSpec::Choice(values) if values.iter().all(|v| matches!(v, Scalar::Int(i) if *i > 0)))
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Real(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    learning_rate: ParamSpec,
    weight_decay: ParamSpec,
    randaugment_n: ParamSpec,
    randaugment_m: ParamSpec,
    batch_size: ParamSpec,
}

/// The five tunable hyperparameters. Validated on construction and immutable
/// afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    raw: RawSpace,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        for (name, spec) in [
            ("learning_rate", &raw.learning_rate),
            ("weight_decay", &raw.weight_decay),
            ("randaugment_n", &raw.randaugment_n),
            ("randaugment_m", &raw.randaugment_m),
            ("batch_size", &raw.batch_size),
        ] {
            spec.check(name)?;
        }
        for (name, spec) in [
            ("randaugment_n", &raw.randaugment_n),
            ("randaugment_m", &raw.randaugment_m),
            ("batch_size", &raw.batch_size),
        ] {
            if !spec.is_positive_int_choice() {
                return Err(SpaceError::NotInteger { name: name.into() });
            }
        }
        Ok(SearchSpace { raw })
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(space: SearchSpace) -> Self {
        space.raw
    }
}

impl Default for SearchSpace {
    /// The reference search space: log-uniform learning rate and weight decay,
    /// RandAugment `N ∈ {1,2,3}`, `M ∈ {2,6,10,14}`, batch size `{8,16}`.
    fn default() -> Self {
        SearchSpace::new(
            ParamSpec::log_uniform(1e-4, 0.1),
            ParamSpec::log_uniform(1e-5, 0.1),
            ParamSpec::choice([1i64, 2, 3]),
            ParamSpec::choice([2i64, 6, 10, 14]),
            ParamSpec::choice([8i64, 16]),
        )
        .expect("reference space is valid")
    }
}

impl SearchSpace {
    pub fn new(
        learning_rate: ParamSpec,
        weight_decay: ParamSpec,
        randaugment_n: ParamSpec,
        randaugment_m: ParamSpec,
        batch_size: ParamSpec,
    ) -> Result<Self, SpaceError> {
        RawSpace { learning_rate, weight_decay, randaugment_n, randaugment_m, batch_size }.try_into()
    }

    pub fn learning_rate(&self) -> &ParamSpec {
        &self.raw.learning_rate
    }
    pub fn weight_decay(&self) -> &ParamSpec {
        &self.raw.weight_decay
    }
    pub fn randaugment_n(&self) -> &ParamSpec {
        &self.raw.randaugment_n
    }
    pub fn randaugment_m(&self) -> &ParamSpec {
        &self.raw.randaugment_m
    }
    pub fn batch_size(&self) -> &ParamSpec {
        &self.raw.batch_size
    }

    /// Draws one configuration. Fields are sampled in declaration order, one
    /// draw each, so a given rng state always yields the same config.
    pub fn sample_config<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialConfig {
        let int = |s: Scalar| match s {
            Scalar::Int(v) => v as u32,
            Scalar::Real(v) => v as u32,
        };
        TrialConfig {
            learning_rate: self.raw.learning_rate.sample(rng).as_f64(),
            weight_decay: self.raw.weight_decay.sample(rng).as_f64(),
            randaugment_n: int(self.raw.randaugment_n.sample(rng)),
            randaugment_m: int(self.raw.randaugment_m.sample(rng)),
            batch_size: int(self.raw.batch_size.sample(rng)),
        }
    }

    /// Lists every field of `config` that lies outside its domain. Empty means valid.
    pub fn validate_config(&self, config: &TrialConfig) -> Vec<Violation> {
        let checks = [
            ("learning_rate", &self.raw.learning_rate, Scalar::Real(config.learning_rate)),
            ("weight_decay", &self.raw.weight_decay, Scalar::Real(config.weight_decay)),
            ("randaugment_n", &self.raw.randaugment_n, Scalar::Int(config.randaugment_n as i64)),
            ("randaugment_m", &self.raw.randaugment_m, Scalar::Int(config.randaugment_m as i64)),
            ("batch_size", &self.raw.batch_size, Scalar::Int(config.batch_size as i64)),
        ];
        checks
            .into_iter()
            .filter(|(_, spec, value)| !spec.contains(*value))
            .map(|(field, _, value)| Violation { field, value })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: Scalar,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} is outside its search domain", self.field, self.value)
    }
}

/// One sampled hyperparameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub randaugment_n: u32,
    pub randaugment_m: u32,
    pub batch_size: u32,
}

impl TrialConfig {
    /// The tuned configuration reported for the reference pipeline.
    pub const TUNED: TrialConfig = TrialConfig {
        learning_rate: 1.98e-3,
        weight_decay: 4.21e-4,
        randaugment_n: 2,
        randaugment_m: 14,
        batch_size: 8,
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn log_uniform_unit_map_endpoints_and_midpoint() {
        let spec = ParamSpec::log_uniform(1e-4, 0.1);
        assert_eq!(spec.log_uniform_from_unit(0.0), Some(1e-4));
        let top = spec.log_uniform_from_unit(1.0).unwrap();
        assert!((top - 0.1).abs() <= 1e-15);
        let mid = spec.log_uniform_from_unit(0.5).unwrap();
        assert!((mid - (1e-4f64 * 0.1).sqrt()).abs() < 1e-15);
        assert!((mid - 3.1623e-3).abs() < 1e-7);
    }

    #[test]
    fn choice_frequencies_are_uniform() {
        let spec = ParamSpec::choice([2i64, 6, 10, 14]);
        let mut rng = rng_from(11);
        let mut counts = [0usize; 4];
        let draws = 100_000;
        for _ in 0..draws {
            let Scalar::Int(v) = spec.sample(&mut rng) else { panic!("integer choice") };
            counts[(v as usize - 2) / 4] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((0.24..=0.26).contains(&freq), "frequency {freq}");
        }
    }

    #[test]
    fn tuned_values_validate() {
        assert!(SearchSpace::default().validate_config(&TrialConfig::TUNED).is_empty());
    }

    #[test]
    fn out_of_domain_fields_are_reported() {
        let space = SearchSpace::default();
        let bad_lr = TrialConfig { learning_rate: 0.5, ..TrialConfig::TUNED };
        let v = space.validate_config(&bad_lr);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "learning_rate");

        let bad_m = TrialConfig { randaugment_m: 7, ..TrialConfig::TUNED };
        let v = space.validate_config(&bad_m);
        assert_eq!(v.iter().map(|v| v.field).collect::<Vec<_>>(), ["randaugment_m"]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let good = SearchSpace::default();
        let err = SearchSpace::new(
            ParamSpec::log_uniform(0.1, 1e-4),
            good.weight_decay().clone(),
            good.randaugment_n().clone(),
            good.randaugment_m().clone(),
            good.batch_size().clone(),
        );
        assert!(matches!(err, Err(SpaceError::BadBounds { .. })));
        let err = SearchSpace::new(
            good.learning_rate().clone(),
            good.weight_decay().clone(),
            ParamSpec::Choice(vec![]),
            good.randaugment_m().clone(),
            good.batch_size().clone(),
        );
        assert!(matches!(err, Err(SpaceError::EmptyChoice { .. })));
        let err = SearchSpace::new(
            good.learning_rate().clone(),
            good.weight_decay().clone(),
            good.randaugment_n().clone(),
            ParamSpec::choice([2i64, 2]),
            good.batch_size().clone(),
        );
        assert!(matches!(err, Err(SpaceError::DuplicateChoice { .. })));
        let err = SearchSpace::new(
            good.learning_rate().clone(),
            good.weight_decay().clone(),
            good.randaugment_n().clone(),
            good.randaugment_m().clone(),
            ParamSpec::log_uniform(8.0, 16.0),
        );
        assert!(matches!(err, Err(SpaceError::NotInteger { .. })));
    }

    #[test]
    fn space_parses_from_toml() {
        let text = r#"
            learning_rate = { loguniform = [1e-4, 0.1] }
            weight_decay = { loguniform = [1e-5, 0.1] }
            randaugment_n = { choice = [1, 2, 3] }
            randaugment_m = { choice = [2, 6, 10, 14] }
            batch_size = { choice = [8, 16] }
        "#;
        let space: SearchSpace = toml::from_str(text).unwrap();
        assert_eq!(space, SearchSpace::default());

        let missing = "learning_rate = { loguniform = [1e-4, 0.1] }";
        assert!(toml::from_str::<SearchSpace>(missing).is_err());
    }

    #[test]
    fn log_uniform_interval_probability() {
        let (a, b) = (1e-4f64, 0.1f64);
        let spec = ParamSpec::log_uniform(a, b);
        let mut rng = rng_from(3);
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws).map(|_| spec.sample(&mut rng).as_f64()).collect();
        for (x, y) in [(1e-4, 1e-3), (2e-3, 5e-3), (1e-2, 0.1), (3e-4, 3e-2)] {
            let expected = (f64::ln(y) - f64::ln(x)) / (b.ln() - a.ln());
            let hits = samples.iter().filter(|s| **s >= x && **s <= y).count();
            let freq = hits as f64 / draws as f64;
            assert!((freq - expected).abs() <= 0.01, "[{x},{y}]: {freq} vs {expected}");
        }
    }
}
