//! Subset-size schedules and target-domain subset samplers.
//!
//! The schedule places `n` subset sizes on an exponential curve
//! `g(x) = base^(x-1) - 1` with `base = 101^(1/(n-1))`, so that `g(1) = 0`
//! and `g(n) = 100`; sizes are `ceil(g(x))` percent. For `n = 10` this gives
//! 0, 1, 2, 4, 7, 12, 21, 36, 60 and 100 percent.
//!
//! Two samplers draw from a domain's train split, both driven by
//! [`SplitMix64`]:
//!
//! * **uniform** keeps `ceil(k% * |train|)` rows, the prefix of a seeded
//!   Fisher-Yates shuffle of the train rows in file order.
//! * **spis** (samples per intent/slot) walks a seeded shuffle of the train
//!   rows once, keeping a row whenever one of its ontology labels has been
//!   seen fewer than `k` times so far. Every label ends with at least
//!   `min(k, total occurrences)` occurrences. The subset is not minimal.
//!
//! Uniform subsets for different `k` are independent draws and are not
//! nested.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CorpusTable, DatasetError};
use crate::frame::LabelMultiset;
use crate::rng::SplitMix64;

/// Slack when ceiling values that are integral up to rounding error.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub base: f64,
    pub raw: Vec<f64>,
    pub sizes: Vec<u32>,
}

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("a schedule needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("uniform size must be a percentage in [0, 100], got {0}")]
    PercentOutOfRange(f64),
    #[error("spis size must be an integer >= 1, got {0}")]
    InvalidSpisSize(f64),
    #[error("domain {0:?} has no train rows to sample")]
    EmptyTrainSplit(String),
    #[error("spec algorithm is {actual}, expected {expected}")]
    WrongAlgorithm { expected: Algorithm, actual: Algorithm },
    #[error("row {row} is not a train row of domain {domain:?}")]
    ForeignRow { row: usize, domain: String },
}

pub fn make_schedule(n: usize) -> Result<Schedule, SamplingError> {
    if n < 2 {
        return Err(SamplingError::TooFewPoints(n));
    }
    let span = (n - 1) as f64;
    let base = 101f64.powf(1.0 / span);
    // 101^((x-1)/(n-1)) hits both endpoints exactly, unlike base.powi(x-1).
    let raw: Vec<f64> = (0..n).map(|i| 101f64.powf(i as f64 / span) - 1.0).collect();
    let sizes = raw.iter().map(|&g| ceil_percent(g)).collect();
    Ok(Schedule { n, base, raw, sizes })
}

fn ceil_percent(g: f64) -> u32 {
    (g - CEIL_SLACK).ceil().max(0.0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Uniform,
    Spis,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Uniform => "uniform",
            Algorithm::Spis => "spis",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Algorithm::Uniform),
            "spis" => Ok(Algorithm::Spis),
            other => Err(format!("unknown sampling algorithm {other:?}")),
        }
    }
}

/// What to draw: a percentage (uniform) or a minimum label count (spis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub target_domain: String,
    pub algorithm: Algorithm,
    pub size_param: f64,
    pub seed: u64,
}

impl SubsetSpec {
    pub fn validate(&self) -> Result<(), SamplingError> {
        match self.algorithm {
            Algorithm::Uniform if !(0.0..=100.0).contains(&self.size_param) => {
                Err(SamplingError::PercentOutOfRange(self.size_param))
            }
            Algorithm::Spis if !(self.size_param >= 1.0 && self.size_param.fract() == 0.0) => {
                Err(SamplingError::InvalidSpisSize(self.size_param))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub spec: SubsetSpec,
    pub row_ids: Vec<usize>,
}

impl Subset {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }
}

/// Draws a subset according to `spec.algorithm`.
pub fn sample(table: &CorpusTable, spec: &SubsetSpec) -> Result<Subset, SamplingError> {
    match spec.algorithm {
        Algorithm::Uniform => uniform_sample(table, spec),
        Algorithm::Spis => spis_sample(table, spec),
    }
}

/// Number of rows a uniform draw of `percent` keeps out of `total`.
pub fn uniform_size(percent: f64, total: usize) -> usize {
    if percent <= 0.0 {
        return 0;
    }
    // percent * total first: 12 * 1000 / 100 is exact where 0.12 * 1000 is not.
    let exact = percent * total as f64 / 100.0;
    ((exact - CEIL_SLACK).ceil().max(0.0) as usize).min(total)
}

pub fn uniform_sample(table: &CorpusTable, spec: &SubsetSpec) -> Result<Subset, SamplingError> {
    if spec.algorithm != Algorithm::Uniform {
        return Err(SamplingError::WrongAlgorithm {
            expected: Algorithm::Uniform,
            actual: spec.algorithm,
        });
    }
    spec.validate()?;
    let train = &table.domain(&spec.target_domain)?.train;
    let size = uniform_size(spec.size_param, train.len());
    if size == 0 && spec.size_param > 0.0 {
        return Err(SamplingError::EmptyTrainSplit(spec.target_domain.clone()));
    }
    let mut rows = train.clone();
    SplitMix64::new(spec.seed).shuffle_prefix(&mut rows, size);
    rows.truncate(size);
    Ok(Subset {
        spec: spec.clone(),
        row_ids: rows,
    })
}

pub fn spis_sample(table: &CorpusTable, spec: &SubsetSpec) -> Result<Subset, SamplingError> {
    if spec.algorithm != Algorithm::Spis {
        return Err(SamplingError::WrongAlgorithm {
            expected: Algorithm::Spis,
            actual: spec.algorithm,
        });
    }
    spec.validate()?;
    let k = spec.size_param as usize;
    let mut order = table.domain(&spec.target_domain)?.train.clone();
    SplitMix64::new(spec.seed).shuffle(&mut order);

    let mut seen = LabelMultiset::default();
    let mut kept = Vec::new();
    for id in order {
        let labels = table.rows()[id].frame.ontology_labels();
        if labels.iter().any(|(label, _)| seen.get(label) < k) {
            seen.merge(&labels);
            kept.push(id);
        }
    }
    Ok(Subset {
        spec: spec.clone(),
        row_ids: kept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub rows: usize,
    pub percent: f64,
    pub label_counts: BTreeMap<String, usize>,
}

/// Realized size of a subset and the label counts it achieves.
pub fn subset_size_report(
    subset: &Subset,
    table: &CorpusTable,
) -> Result<SizeReport, SamplingError> {
    let domain = &subset.spec.target_domain;
    let train = &table.domain(domain)?.train;
    let mut labels = LabelMultiset::default();
    for &id in &subset.row_ids {
        if train.binary_search(&id).is_err() {
            return Err(SamplingError::ForeignRow {
                row: id,
                domain: domain.clone(),
            });
        }
        labels.merge(&table.rows()[id].frame.ontology_labels());
    }
    let percent = if train.is_empty() {
        0.0
    } else {
        100.0 * subset.len() as f64 / train.len() as f64
    };
    Ok(SizeReport {
        rows: subset.len(),
        percent,
        label_counts: labels.into_map(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CorpusRow, Split};
    use crate::frame::parse_frame;

    fn table_of(domain: &str, parses: &[&str]) -> CorpusTable {
        CorpusTable::from_rows(
            parses
                .iter()
                .map(|p| CorpusRow {
                    domain: domain.into(),
                    utterance: "u".into(),
                    frame: parse_frame(p).unwrap(),
                    split: Split::Train,
                })
                .collect(),
        )
    }

    fn uniform(domain: &str, k: f64, seed: u64) -> SubsetSpec {
        SubsetSpec {
            target_domain: domain.into(),
            algorithm: Algorithm::Uniform,
            size_param: k,
            seed,
        }
    }

    fn spis(domain: &str, k: f64, seed: u64) -> SubsetSpec {
        SubsetSpec {
            algorithm: Algorithm::Spis,
            ..uniform(domain, k, seed)
        }
    }

    #[test]
    fn ten_point_schedule() {
        let s = make_schedule(10).unwrap();
        let expected = [0.00, 0.67, 1.79, 3.66, 6.78, 11.99, 20.69, 35.22, 59.48, 100.00];
        for (got, want) in s.raw.iter().zip(expected) {
            assert!((got - want).abs() <= 0.005, "{got} vs {want}");
        }
        assert_eq!(s.sizes, vec![0, 1, 2, 4, 7, 12, 21, 36, 60, 100]);
        assert!((s.raw[4] - 6.78).abs() <= 0.01);
        assert!((s.base - 101f64.powf(1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn schedule_endpoints_and_errors() {
        for n in 2..40 {
            let s = make_schedule(n).unwrap();
            assert_eq!(s.raw[0], 0.0);
            assert!((s.raw[n - 1] - 100.0).abs() < 1e-9);
            assert!(s.raw.windows(2).all(|w| w[0] < w[1]));
            assert!(s.sizes.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(s.sizes[0], 0);
            assert_eq!(s.sizes[n - 1], 100);
        }
        assert_eq!(make_schedule(2).unwrap().sizes, vec![0, 100]);
        assert!(matches!(make_schedule(1), Err(SamplingError::TooFewPoints(1))));
    }

    #[test]
    fn uniform_sizes() {
        assert_eq!(uniform_size(12.0, 1000), 120);
        assert_eq!(uniform_size(0.0, 1000), 0);
        assert_eq!(uniform_size(100.0, 1000), 1000);
        assert_eq!(uniform_size(1.0, 7), 1);
        assert_eq!(uniform_size(7.0, 100), 7);
        assert_eq!(uniform_size(33.3, 10), 4);
    }

    #[test]
    fn uniform_draws() {
        let parses: Vec<String> = (0..1000).map(|i| format!("[IN:A t{i} ]")).collect();
        let refs: Vec<&str> = parses.iter().map(String::as_str).collect();
        let table = table_of("d", &refs);

        let s = uniform_sample(&table, &uniform("d", 12.0, 5)).unwrap();
        assert_eq!(s.len(), 120);
        let mut ids = s.row_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 120);
        assert_eq!(s, uniform_sample(&table, &uniform("d", 12.0, 5)).unwrap());
        assert_ne!(s.row_ids, uniform_sample(&table, &uniform("d", 12.0, 6)).unwrap().row_ids);

        assert!(uniform_sample(&table, &uniform("d", 0.0, 5)).unwrap().is_empty());
        let all = uniform_sample(&table, &uniform("d", 100.0, 5)).unwrap();
        let mut sorted = all.row_ids.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..1000).collect::<Vec<_>>());
        assert_ne!(all.row_ids, sorted, "full draw should still be shuffled");

        assert!(matches!(
            uniform_sample(&table, &uniform("x", 5.0, 0)),
            Err(SamplingError::Dataset(DatasetError::UnknownDomain(_)))
        ));
        assert!(matches!(
            uniform_sample(&table, &uniform("d", 101.0, 0)),
            Err(SamplingError::PercentOutOfRange(_))
        ));
    }

    #[test]
    fn uniform_on_empty_train_split() {
        let table = CorpusTable::from_rows(vec![CorpusRow {
            domain: "d".into(),
            utterance: "u".into(),
            frame: parse_frame("[IN:A ]").unwrap(),
            split: Split::Test,
        }]);
        assert!(matches!(
            uniform_sample(&table, &uniform("d", 10.0, 0)),
            Err(SamplingError::EmptyTrainSplit(d)) if d == "d"
        ));
        assert!(uniform_sample(&table, &uniform("d", 0.0, 0)).unwrap().is_empty());
    }

    #[test]
    fn spis_distinct_intents_k1() {
        let table = table_of("d", &["[IN:A ]", "[IN:B ]", "[IN:C ]", "[IN:D ]"]);
        let s = spis_sample(&table, &spis("d", 1.0, 9)).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn spis_large_k_takes_everything() {
        let table = table_of("d", &["[IN:A [SL:X x ] ]", "[IN:A ]", "[IN:B ]"]);
        let s = spis_sample(&table, &spis("d", 50.0, 1)).unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn spis_rejects_bad_k() {
        let table = table_of("d", &["[IN:A ]"]);
        assert!(matches!(
            spis_sample(&table, &spis("d", 0.0, 1)),
            Err(SamplingError::InvalidSpisSize(_))
        ));
        assert!(matches!(
            spis_sample(&table, &spis("d", 1.5, 1)),
            Err(SamplingError::InvalidSpisSize(_))
        ));
        assert!(matches!(
            spis_sample(&table, &uniform("d", 1.0, 1)),
            Err(SamplingError::WrongAlgorithm { .. })
        ));
    }

    #[test]
    fn size_report() {
        let parses: Vec<String> = (0..1000).map(|i| format!("[IN:A t{i} ]")).collect();
        let refs: Vec<&str> = parses.iter().map(String::as_str).collect();
        let table = table_of("d", &refs);
        let s = uniform_sample(&table, &uniform("d", 12.0, 0)).unwrap();
        let report = subset_size_report(&s, &table).unwrap();
        assert_eq!(report.rows, 120);
        assert_eq!(report.percent, 12.0);
        assert_eq!(report.label_counts["IN:A"], 120);

        let empty = uniform_sample(&table, &uniform("d", 0.0, 0)).unwrap();
        let report = subset_size_report(&empty, &table).unwrap();
        assert_eq!((report.rows, report.percent), (0, 0.0));
        assert!(report.label_counts.is_empty());
    }

    #[test]
    fn subset_json_shape() {
        let s = Subset {
            spec: uniform("weather", 12.0, 3),
            row_ids: vec![4, 1],
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"spec":{"target_domain":"weather","algorithm":"uniform","size_param":12.0,"seed":3},"row_ids":[4,1]}"#
        );
    }
}
