//! Case-study aggregations: seed spread, model comparison and intent
//! complexity.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{fit_curve, CurveError, CurveModel, EfficiencyPoint};
use crate::dataset::CorpusTable;
use crate::frame::parse_frame;
use crate::protocol::Ledger;

/// Intents with fewer test occurrences than this are left out of per-intent
/// breakdowns.
pub const MIN_INTENT_OCCURRENCES: usize = 10;

/// Modeling difficulty of an intent or slot, ordered
/// none < closed < semi(-open) < open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityClass {
    None,
    Closed,
    Semi,
    Open,
}

impl ComplexityClass {
    pub const ALL: [ComplexityClass; 4] = [
        ComplexityClass::None,
        ComplexityClass::Closed,
        ComplexityClass::Semi,
        ComplexityClass::Open,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityClass::None => "none",
            ComplexityClass::Closed => "closed",
            ComplexityClass::Semi => "semi",
            ComplexityClass::Open => "open",
        }
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComplexityClass {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ComplexityClass::None),
            "closed" => Ok(ComplexityClass::Closed),
            "semi" | "semi-open" => Ok(ComplexityClass::Semi),
            "open" => Ok(ComplexityClass::Open),
            other => Err(AnalysisError::UnknownClass(other.to_owned())),
        }
    }
}

/// An intent is as complex as its most complex slot; no slots means none.
pub fn intent_complexity_from_slots(slot_classes: &[ComplexityClass]) -> ComplexityClass {
    slot_classes
        .iter()
        .copied()
        .max()
        .unwrap_or(ComplexityClass::None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityAnnotations {
    pub domain: String,
    pub classes: BTreeMap<String, ComplexityClass>,
}

impl ComplexityAnnotations {
    pub fn get(&self, intent: &str) -> Option<ComplexityClass> {
        self.classes.get(intent).copied()
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown complexity class {0:?}")]
    UnknownClass(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("intent {0:?} is annotated twice")]
    DuplicateIntent(String),
    #[error("intent {0:?} has no complexity annotation")]
    Unannotated(String),
    #[error("run {0:?} has no per-example predictions")]
    MissingPredictions(String),
    #[error("run {run_id:?} has no prediction for test row {row}")]
    MissingPrediction { run_id: String, row: usize },
    #[error("no points to aggregate")]
    Empty,
    #[error("points mix curves: {0}")]
    MixedCurves(String),
    #[error("need at least one exact-match target")]
    NoTargets,
    #[error("need at least two models, got {0}")]
    TooFewModels(usize),
    #[error("model {0:?} appears twice")]
    DuplicateModel(String),
    #[error("curve for {model} is not an increasing efficiency curve")]
    NotWellFormed { model: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

const PACKAGED_ANNOTATIONS: [(&str, &str); 5] = [
    ("messaging", include_str!("../data/annotations/messaging.csv")),
    ("music", include_str!("../data/annotations/music.csv")),
    ("reminder", include_str!("../data/annotations/reminder.csv")),
    ("timer", include_str!("../data/annotations/timer.csv")),
    ("weather", include_str!("../data/annotations/weather.csv")),
];

const PACKAGED_REFERENCE: &str = include_str!("../data/reference/model_generalizability.csv");

/// Domains with packaged complexity annotations.
pub fn packaged_annotation_domains() -> impl Iterator<Item = &'static str> {
    PACKAGED_ANNOTATIONS.iter().map(|(d, _)| *d)
}

pub fn packaged_annotations(domain: &str) -> Option<ComplexityAnnotations> {
    PACKAGED_ANNOTATIONS
        .iter()
        .find(|(d, _)| *d == domain)
        .map(|(d, text)| parse_annotations(text, d).expect("packaged annotations are valid"))
}

/// Loads an `intent,class` CSV. The domain is the file stem.
pub fn load_annotations(path: &Path) -> Result<ComplexityAnnotations, AnalysisError> {
    let text = fs::read_to_string(path).map_err(|source| AnalysisError::Io {
        path: path.to_owned(),
        source,
    })?;
    let domain = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    parse_annotations(&text, domain)
}

pub fn parse_annotations(text: &str, domain: &str) -> Result<ComplexityAnnotations, AnalysisError> {
    let mut classes = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line == "intent,class") {
            continue;
        }
        let Some((intent, class)) = line.split_once(',') else {
            return Err(AnalysisError::Malformed {
                line: line_no,
                message: "expected intent,class".into(),
            });
        };
        let intent = intent.trim();
        if !intent.starts_with(crate::frame::INTENT_PREFIX) {
            return Err(AnalysisError::Malformed {
                line: line_no,
                message: format!("{intent:?} is not an intent label"),
            });
        }
        let class: ComplexityClass = class.trim().parse()?;
        if classes.insert(intent.to_owned(), class).is_some() {
            return Err(AnalysisError::DuplicateIntent(intent.to_owned()));
        }
    }
    Ok(ComplexityAnnotations {
        domain: domain.to_owned(),
        classes,
    })
}

/// Per-intent exact match for every successful run.
///
/// Each target test row counts toward its reference frame's root intent;
/// intents with fewer than `min_occurrences` test rows are dropped. Runs
/// must carry per-example predictions. An unparseable prediction is wrong.
pub fn per_intent_points(
    ledger: &Ledger,
    table: &CorpusTable,
    min_occurrences: usize,
) -> Result<BTreeMap<String, Vec<EfficiencyPoint>>, AnalysisError> {
    let mut out: BTreeMap<String, Vec<EfficiencyPoint>> = BTreeMap::new();
    for (manifest, result) in ledger.successes() {
        let predictions = result
            .predictions
            .as_ref()
            .ok_or_else(|| AnalysisError::MissingPredictions(result.run_id.clone()))?;
        let by_row: HashMap<usize, &str> = predictions
            .iter()
            .map(|p| (p.row_id, p.frame.as_str()))
            .collect();

        let test_rows = &table.domain(&manifest.target_domain)?.test;
        let mut tallies: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for &id in test_rows {
            let reference = &table.rows()[id].frame;
            let predicted = by_row.get(&id).ok_or_else(|| AnalysisError::MissingPrediction {
                run_id: result.run_id.clone(),
                row: id,
            })?;
            let correct = parse_frame(predicted).is_ok_and(|f| &f == reference);
            let tally = tallies.entry(reference.root_label()).or_default();
            tally.0 += usize::from(correct);
            tally.1 += 1;
        }
        for (intent, (hits, total)) in tallies {
            if total < min_occurrences {
                continue;
            }
            out.entry(intent.to_owned()).or_default().push(EfficiencyPoint {
                subset_percent: manifest.subset_percent,
                exact_match: 100.0 * hits as f64 / total as f64,
                seed: result.seed,
                model_id: manifest.model_id.clone(),
                domain: manifest.target_domain.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPoint {
    pub subset_percent: f64,
    pub exact_match: f64,
    /// Intents averaged into this point.
    pub intents: usize,
}

/// Mean exact match of each intent at each subset size (seeds averaged),
/// keyed by the bit pattern of the non-negative subset size so that keys
/// sort numerically.
fn intent_means(points: &[EfficiencyPoint]) -> BTreeMap<u64, f64> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in points {
        groups.entry(p.subset_percent.to_bits()).or_default().push(p.exact_match);
    }
    groups
        .into_iter()
        .map(|(k, vs)| (k, stable_mean(vs)))
        .collect()
}

fn stable_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unweighted mean of member intents per complexity class at every subset
/// size. Every class is present; classes without intents map to an empty
/// series.
pub fn per_class_curves(
    per_intent: &BTreeMap<String, Vec<EfficiencyPoint>>,
    annotations: &ComplexityAnnotations,
) -> Result<BTreeMap<ComplexityClass, Vec<ClassPoint>>, AnalysisError> {
    let mut members: BTreeMap<ComplexityClass, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for (intent, points) in per_intent {
        let class = annotations
            .get(intent)
            .ok_or_else(|| AnalysisError::Unannotated(intent.clone()))?;
        let series = members.entry(class).or_default();
        for (k, mean) in intent_means(points) {
            series.entry(k).or_default().push(mean);
        }
    }
    Ok(ComplexityClass::ALL
        .into_iter()
        .map(|class| {
            let series = members
                .remove(&class)
                .unwrap_or_default()
                .into_iter()
                .map(|(k, ems)| ClassPoint {
                    subset_percent: f64::from_bits(k),
                    intents: ems.len(),
                    exact_match: stable_mean(ems),
                })
                .collect();
            (class, series)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub subset_percent: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `max - min`.
    pub spread: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpread {
    pub exact_match: f64,
    /// Required subset % per seed, for seeds whose curve reaches the target.
    pub required: BTreeMap<u64, f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl QuerySpread {
    pub fn spread(&self) -> Option<f64> {
        Some(self.max? - self.min?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub per_subset: Vec<SubsetStats>,
    /// One fit per seed with enough distinct positive subset sizes.
    pub seed_fits: BTreeMap<u64, CurveModel>,
    pub queries: Vec<QuerySpread>,
}

/// Per-subset statistics across seeds, a curve per seed, and the spread of
/// each seed's inverse at the requested exact-match targets.
pub fn aggregate_seeds(
    points: &[EfficiencyPoint],
    queries: &[f64],
) -> Result<SeedAggregate, AnalysisError> {
    let first = points.first().ok_or(AnalysisError::Empty)?;
    if let Some(p) = points
        .iter()
        .find(|p| p.model_id != first.model_id || p.domain != first.domain)
    {
        return Err(AnalysisError::MixedCurves(format!(
            "{}/{} and {}/{}",
            first.model_id, first.domain, p.model_id, p.domain
        )));
    }

    let mut by_subset: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut by_seed: BTreeMap<u64, Vec<EfficiencyPoint>> = BTreeMap::new();
    for p in points {
        by_subset.entry(p.subset_percent.to_bits()).or_default().push(p.exact_match);
        by_seed.entry(p.seed).or_default().push(p.clone());
    }

    let per_subset = by_subset
        .into_iter()
        .map(|(k, ems)| {
            let min = ems.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ems.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            SubsetStats {
                subset_percent: f64::from_bits(k),
                seeds: ems.len(),
                mean: stable_mean(ems),
                min,
                max,
                spread: max - min,
            }
        })
        .collect();

    let mut seed_fits = BTreeMap::new();
    for (seed, mut pts) in by_seed {
        pts.sort_by(|a, b| {
            a.subset_percent
                .total_cmp(&b.subset_percent)
                .then(a.exact_match.total_cmp(&b.exact_match))
        });
        match fit_curve(&pts) {
            Ok(model) => {
                seed_fits.insert(seed, model);
            }
            Err(CurveError::TooFewPoints(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let queries = queries
        .iter()
        .map(|&y| {
            let required: BTreeMap<u64, f64> = seed_fits
                .iter()
                .filter_map(|(&seed, m)| m.invert(y).ok().map(|inv| (seed, inv.subset_percent)))
                .collect();
            let min = required.values().copied().reduce(f64::min);
            let max = required.values().copied().reduce(f64::max);
            QuerySpread {
                exact_match: y,
                required,
                min,
                max,
            }
        })
        .collect();

    Ok(SeedAggregate {
        per_subset,
        seed_fits,
        queries,
    })
}

/// Target data needed for one exact-match target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Requirement {
    Percent(f64),
    /// Reachable only with more than all of the target data.
    ExceedsFullData(f64),
    /// At or beyond the curve's asymptote.
    Unreachable { asymptote: f64 },
    /// No value reported for this target (reference tables only).
    NotReported,
}

impl Requirement {
    fn from_model(model: &CurveModel, y: f64) -> Self {
        match model.invert(y) {
            Ok(inv) if inv.exceeds_full_data => Requirement::ExceedsFullData(inv.subset_percent),
            Ok(inv) => Requirement::Percent(inv.subset_percent),
            Err(_) => Requirement::Unreachable { asymptote: model.c },
        }
    }

    fn sort_key(&self) -> (u8, f64) {
        match *self {
            Requirement::Percent(x) => (0, x),
            Requirement::ExceedsFullData(x) => (1, x),
            Requirement::Unreachable { .. } => (2, 0.0),
            Requirement::NotReported => (3, 0.0),
        }
    }

    fn csv_cell(&self) -> String {
        match self {
            Requirement::Percent(x) => format!("{x:.4}"),
            Requirement::ExceedsFullData(x) => format!("exceeds_full_data:{x:.4}"),
            Requirement::Unreachable { .. } => "unreachable".into(),
            Requirement::NotReported => String::new(),
        }
    }

    fn text_cell(&self) -> String {
        match self {
            Requirement::Percent(x) => format!("{x:.2}%"),
            Requirement::ExceedsFullData(x) => format!(">100% ({x:.2}%)"),
            Requirement::Unreachable { asymptote } => format!("unreachable (asymptote {asymptote:.2})"),
            Requirement::NotReported => "-".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_id: String,
    pub cells: Vec<Requirement>,
}

/// Required target data per model and exact-match target, most
/// data-efficient model (at the first target) first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub targets: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    fn sorted(targets: Vec<f64>, mut rows: Vec<ComparisonRow>) -> Self {
        rows.sort_by(|a, b| {
            let (ra, xa) = a.cells[0].sort_key();
            let (rb, xb) = b.cells[0].sort_key();
            ra.cmp(&rb)
                .then(xa.total_cmp(&xb))
                .then_with(|| a.model_id.cmp(&b.model_id))
        });
        Self { targets, rows }
    }

    pub fn row(&self, model_id: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model_id == model_id)
    }

    pub fn cell(&self, model_id: &str, target: f64) -> Option<Requirement> {
        let col = self.targets.iter().position(|&t| t == target)?;
        Some(self.row(model_id)?.cells[col])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for t in &self.targets {
            let _ = write!(out, ",em_{}", fmt_target(*t));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.model_id);
            for cell in &row.cells {
                out.push(',');
                out.push_str(&cell.csv_cell());
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let header: Vec<String> = std::iter::once("model".to_owned())
            .chain(self.targets.iter().map(|t| format!("{}% EM", fmt_target(*t))))
            .collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                std::iter::once(r.model_id.clone())
                    .chain(r.cells.iter().map(Requirement::text_cell))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                std::iter::once(&header)
                    .chain(&body)
                    .map(|row| row[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for line in std::iter::once(&header).chain(&body) {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, &w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn fmt_target(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{t:.0}")
    } else {
        format!("{t}")
    }
}

/// Compares fitted curves by the target data each needs per exact-match
/// target.
pub fn compare_models(
    curves: &[(String, CurveModel)],
    em_targets: &[f64],
) -> Result<ComparisonTable, AnalysisError> {
    if em_targets.is_empty() {
        return Err(AnalysisError::NoTargets);
    }
    if curves.len() < 2 {
        return Err(AnalysisError::TooFewModels(curves.len()));
    }
    let mut rows = Vec::with_capacity(curves.len());
    for (i, (model_id, model)) in curves.iter().enumerate() {
        if curves[..i].iter().any(|(id, _)| id == model_id) {
            return Err(AnalysisError::DuplicateModel(model_id.clone()));
        }
        if !model.is_well_formed() {
            return Err(AnalysisError::NotWellFormed {
                model: model_id.clone(),
            });
        }
        rows.push(ComparisonRow {
            model_id: model_id.clone(),
            cells: em_targets
                .iter()
                .map(|&y| Requirement::from_model(model, y))
                .collect(),
        });
    }
    Ok(ComparisonTable::sorted(em_targets.to_vec(), rows))
}

/// A reported (model, domain, exact match) → subset % requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    pub domain: String,
    pub model_id: String,
    pub exact_match: f64,
    pub subset_percent: f64,
}

pub fn parse_reference_results(text: &str) -> Result<Vec<ReferenceResult>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.starts_with("domain,")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let malformed = |message: String| AnalysisError::Malformed {
            line: line_no,
            message,
        };
        let [domain, model, em, pct] = cols.as_slice() else {
            return Err(malformed("expected domain,model,exact_match,subset_percent".into()));
        };
        out.push(ReferenceResult {
            domain: domain.to_string(),
            model_id: model.to_string(),
            exact_match: em.parse().map_err(|e| malformed(format!("exact_match: {e}")))?,
            subset_percent: pct.parse().map_err(|e| malformed(format!("subset_percent: {e}")))?,
        });
    }
    Ok(out)
}

pub fn load_reference_results(path: &Path) -> Result<Vec<ReferenceResult>, AnalysisError> {
    let text = fs::read_to_string(path).map_err(|source| AnalysisError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_reference_results(&text)
}

/// Reference requirements for the cross-model comparison. These come from
/// fine-tuning runs that cannot be repeated here; they exist to exercise
/// table formatting.
pub fn packaged_reference_results() -> Vec<ReferenceResult> {
    parse_reference_results(PACKAGED_REFERENCE).expect("packaged reference data is valid")
}

/// Lays out reference requirements for one domain in the same table shape
/// as [`compare_models`]. Targets appear in file order.
pub fn reference_table(results: &[ReferenceResult], domain: &str) -> ComparisonTable {
    let rows_in: Vec<&ReferenceResult> = results.iter().filter(|r| r.domain == domain).collect();
    let mut targets: Vec<f64> = Vec::new();
    let mut models: Vec<&str> = Vec::new();
    for r in &rows_in {
        if !targets.contains(&r.exact_match) {
            targets.push(r.exact_match);
        }
        if !models.contains(&r.model_id.as_str()) {
            models.push(&r.model_id);
        }
    }
    let rows = models
        .into_iter()
        .map(|model| ComparisonRow {
            model_id: model.to_owned(),
            cells: targets
                .iter()
                .map(|&t| {
                    rows_in
                        .iter()
                        .find(|r| r.model_id == model && r.exact_match == t)
                        .map_or(Requirement::NotReported, |r| {
                            if r.subset_percent > 100.0 {
                                Requirement::ExceedsFullData(r.subset_percent)
                            } else {
                                Requirement::Percent(r.subset_percent)
                            }
                        })
                })
                .collect(),
        })
        .collect();
    ComparisonTable::sorted(targets, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CorpusRow, Split};
    use crate::protocol::{ManifestSummary, Prediction, RunOutcome, RunResult};
    use crate::sampling::{Algorithm, SubsetSpec};
    use ComplexityClass::*;

    fn pt(k: f64, em: f64, seed: u64) -> EfficiencyPoint {
        EfficiencyPoint {
            seed,
            ..EfficiencyPoint::new(k, em)
        }
    }

    #[test]
    fn class_order_and_max_rule() {
        assert!(None < Closed && Closed < Semi && Semi < Open);
        assert_eq!(intent_complexity_from_slots(&[Closed, Open]), Open);
        assert_eq!(intent_complexity_from_slots(&[]), None);
        assert_eq!(intent_complexity_from_slots(&[Closed]), Closed);
        assert_eq!("semi-open".parse::<ComplexityClass>().unwrap(), Semi);
    }

    #[test]
    fn packaged_annotations_cover_five_domains() {
        let weather = packaged_annotations("weather").unwrap();
        assert_eq!(weather.classes.len(), 3);
        for intent in ["IN:GET_SUNRISE", "IN:GET_SUNSET", "IN:GET_WEATHER"] {
            assert_eq!(weather.get(intent), Some(Semi));
        }
        let messaging = packaged_annotations("messaging").unwrap();
        assert_eq!(messaging.get("IN:SEND_MESSAGE"), Some(Open));
        let sizes: Vec<usize> = packaged_annotation_domains()
            .map(|d| packaged_annotations(d).unwrap().classes.len())
            .collect();
        assert_eq!(sizes, vec![5, 14, 8, 10, 3]);
        assert!(packaged_annotations("alarm").is_none());
    }

    #[test]
    fn annotation_errors() {
        assert!(matches!(
            parse_annotations("intent,class\nIN:X,weird\n", "d"),
            Err(AnalysisError::UnknownClass(c)) if c == "weird"
        ));
        assert!(matches!(
            parse_annotations("IN:X,open\nIN:X,closed\n", "d"),
            Err(AnalysisError::DuplicateIntent(_))
        ));
        assert!(matches!(
            parse_annotations("SL:X,open\n", "d"),
            Err(AnalysisError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_annotations("IN:X open\n", "d"),
            Err(AnalysisError::Malformed { .. })
        ));
    }

    fn annotations(pairs: &[(&str, ComplexityClass)]) -> ComplexityAnnotations {
        ComplexityAnnotations {
            domain: "d".into(),
            classes: pairs.iter().map(|(i, c)| (i.to_string(), *c)).collect(),
        }
    }

    #[test]
    fn class_curves_average_intents() {
        let per_intent: BTreeMap<String, Vec<EfficiencyPoint>> = [
            ("IN:A".to_string(), vec![pt(1.0, 80.0, 0), pt(2.0, 60.0, 0)]),
            ("IN:B".to_string(), vec![pt(1.0, 90.0, 0), pt(2.0, 70.0, 0)]),
            ("IN:C".to_string(), vec![pt(1.0, 40.0, 0)]),
        ]
        .into();
        let ann = annotations(&[("IN:A", Semi), ("IN:B", Semi), ("IN:C", Open)]);
        let curves = per_class_curves(&per_intent, &ann).unwrap();
        assert_eq!(curves.len(), 4);
        assert_eq!(curves[&Semi][0].exact_match, 85.0);
        assert_eq!(curves[&Semi][1].exact_match, 65.0);
        assert_eq!(curves[&Open], vec![ClassPoint { subset_percent: 1.0, exact_match: 40.0, intents: 1 }]);
        assert!(curves[&None].is_empty());
        assert!(curves[&Closed].is_empty());

        let missing = annotations(&[("IN:A", Semi)]);
        assert!(matches!(
            per_class_curves(&per_intent, &missing),
            Err(AnalysisError::Unannotated(_))
        ));
    }

    #[test]
    fn seed_aggregate_stats() {
        let pts = vec![pt(12.0, 88.0, 0), pt(12.0, 89.0, 1), pt(12.0, 90.0, 2)];
        let agg = aggregate_seeds(&pts, &[]).unwrap();
        let s = &agg.per_subset[0];
        assert_eq!((s.mean, s.min, s.max, s.spread, s.seeds), (89.0, 88.0, 90.0, 2.0, 3));
        assert!(agg.seed_fits.is_empty());

        let same = vec![pt(12.0, 70.0, 0), pt(12.0, 70.0, 1), pt(12.0, 70.0, 2)];
        let s = &aggregate_seeds(&same, &[]).unwrap().per_subset[0];
        assert_eq!((s.min, s.mean, s.max), (70.0, 70.0, 70.0));

        assert!(matches!(aggregate_seeds(&[], &[]), Err(AnalysisError::Empty)));
        let mut mixed = pts.clone();
        mixed[1].model_id = "other".into();
        assert!(matches!(aggregate_seeds(&mixed, &[]), Err(AnalysisError::MixedCurves(_))));
    }

    #[test]
    fn seed_fits_and_query_spread() {
        let xs = [1.0, 2.0, 4.0, 7.0, 12.0, 21.0, 36.0, 60.0, 100.0];
        let mut pts = Vec::new();
        for (seed, c) in [(0u64, 97.0), (1, 98.0)] {
            for &x in &xs {
                pts.push(pt(x, -27.0 / f64::powf(x, 0.35) + c, seed));
            }
        }
        let agg = aggregate_seeds(&pts, &[90.0, 99.0]).unwrap();
        assert_eq!(agg.seed_fits.len(), 2);
        let q = &agg.queries[0];
        assert_eq!(q.required.len(), 2);
        assert!(q.spread().unwrap() > 0.0);
        assert!(q.required[&0] > q.required[&1]);
        assert!(agg.queries[1].required.is_empty());
        assert_eq!(agg.queries[1].spread(), Option::None);
    }

    #[test]
    fn comparison_orders_by_first_target() {
        let curves = vec![
            ("slow".to_string(), CurveModel::from_params(-27.26, 0.30, 97.79)),
            ("fast".to_string(), CurveModel::from_params(-27.26, 0.45, 97.79)),
        ];
        let table = compare_models(&curves, &[80.0, 90.0, 99.0]).unwrap();
        assert_eq!(table.rows[0].model_id, "fast");
        for col in 0..2 {
            let (Requirement::Percent(f), Requirement::Percent(s)) =
                (table.rows[0].cells[col], table.rows[1].cells[col])
            else {
                panic!("expected reachable targets");
            };
            assert!(f < s);
        }
        assert!(matches!(table.rows[0].cells[2], Requirement::Unreachable { .. }));
        assert!(matches!(table.rows[1].cells[2], Requirement::Unreachable { .. }));

        let reversed: Vec<_> = curves.iter().rev().cloned().collect();
        assert_eq!(compare_models(&reversed, &[80.0, 90.0, 99.0]).unwrap(), table);

        assert!(table.to_csv().starts_with("model,em_80,em_90,em_99\nfast,"));
        assert!(table.to_text().contains("unreachable (asymptote 97.79)"));
    }

    #[test]
    fn comparison_errors() {
        let m = CurveModel::from_params(-10.0, 0.5, 90.0);
        let two = vec![("a".to_string(), m.clone()), ("b".to_string(), m.clone())];
        assert!(matches!(compare_models(&two, &[]), Err(AnalysisError::NoTargets)));
        assert!(matches!(compare_models(&two[..1], &[80.0]), Err(AnalysisError::TooFewModels(1))));
        let dup = vec![("a".to_string(), m.clone()), ("a".to_string(), m.clone())];
        assert!(matches!(compare_models(&dup, &[80.0]), Err(AnalysisError::DuplicateModel(_))));
        let bad = vec![("a".to_string(), m), ("b".to_string(), CurveModel::from_params(5.0, 0.5, 90.0))];
        assert!(matches!(compare_models(&bad, &[80.0]), Err(AnalysisError::NotWellFormed { .. })));
    }

    #[test]
    fn packaged_reference_tables() {
        let refs = packaged_reference_results();
        let weather = reference_table(&refs, "weather");
        assert_eq!(weather.targets, vec![90.0]);
        assert_eq!(weather.rows[0].model_id, "roberta_span_pointer");
        assert_eq!(weather.cell("roberta_span_pointer", 90.0), Some(Requirement::Percent(30.67)));
        assert_eq!(weather.cell("bart_ar", 90.0), Some(Requirement::Percent(32.85)));
        assert_eq!(weather.cell("roberta_nar", 90.0), Some(Requirement::Percent(36.90)));

        let reminder = reference_table(&refs, "reminder");
        assert_eq!(reminder.targets, vec![70.0, 80.0]);
        assert_eq!(reminder.rows[0].model_id, "bart_ar");
        assert_eq!(reminder.cell("roberta_span_pointer", 80.0), Some(Requirement::Percent(33.47)));
        assert_eq!(reminder.cell("roberta_span_pointer", 70.0), Some(Requirement::NotReported));
        assert!(reminder.to_text().contains("33.47%"));
    }

    fn prediction_fixture() -> (CorpusTable, Ledger) {
        let mut rows = Vec::new();
        for (intent, n) in [("IN:GET_WEATHER", 10), ("IN:GET_SUNSET", 10), ("IN:GET_SUNRISE", 9)] {
            for i in 0..n {
                rows.push(CorpusRow {
                    domain: "weather".into(),
                    utterance: format!("u{i}"),
                    frame: parse_frame(&format!("[{intent} u{i} ]")).unwrap(),
                    split: Split::Test,
                });
            }
        }
        let table = CorpusTable::from_rows(rows);
        // GET_WEATHER all right; GET_SUNSET right on even rows only.
        let predictions = table
            .rows()
            .iter()
            .enumerate()
            .map(|(id, row)| Prediction {
                row_id: id,
                frame: if row.frame.root_label() == "IN:GET_SUNSET" && id % 2 == 1 {
                    "[IN:GET_SUNSET wrong ]".into()
                } else {
                    row.frame.to_canonical()
                },
            })
            .collect();
        let summary = ManifestSummary {
            run_id: "r".into(),
            model_id: "m".into(),
            target_domain: "weather".into(),
            subset: SubsetSpec {
                target_domain: "weather".into(),
                algorithm: Algorithm::Uniform,
                size_param: 12.0,
                seed: 0,
            },
            subset_percent: 12.0,
            subset_rows: 0,
            train_rows: 0,
            eval_rows: 0,
            test_rows: table.len(),
        };
        let mut ledger = Ledger::new();
        ledger
            .append(
                summary,
                RunOutcome::Ok {
                    result: RunResult {
                        run_id: "r".into(),
                        exact_match: 0.0,
                        seed: 0,
                        wall_time: 0.0,
                        predictions: Some(predictions),
                    },
                },
            )
            .unwrap();
        (table, ledger)
    }

    #[test]
    fn per_intent_breakdown() {
        let (table, ledger) = prediction_fixture();
        let per = per_intent_points(&ledger, &table, MIN_INTENT_OCCURRENCES).unwrap();
        assert_eq!(per.len(), 2, "9-row intent must be dropped");
        assert_eq!(per["IN:GET_WEATHER"][0].exact_match, 100.0);
        assert_eq!(per["IN:GET_SUNSET"][0].exact_match, 50.0);
        assert!(!per.contains_key("IN:GET_SUNRISE"));

        let all = per_intent_points(&ledger, &table, 1).unwrap();
        assert_eq!(all["IN:GET_SUNRISE"][0].exact_match, 100.0);
    }

    #[test]
    fn per_intent_requires_predictions() {
        let (table, ledger) = prediction_fixture();
        let mut entries = ledger.entries().to_vec();
        if let RunOutcome::Ok { result } = &mut entries[0].outcome {
            result.predictions.as_mut().unwrap().pop();
        }
        let mut short = Ledger::new();
        short.append(entries[0].manifest.clone(), entries[0].outcome.clone()).unwrap();
        assert!(matches!(
            per_intent_points(&short, &table, 10),
            Err(AnalysisError::MissingPrediction { .. })
        ));

        if let RunOutcome::Ok { result } = &mut entries[0].outcome {
            result.predictions = Option::None;
        }
        let mut bare = Ledger::new();
        bare.append(entries[0].manifest.clone(), entries[0].outcome.clone()).unwrap();
        assert!(matches!(
            per_intent_points(&bare, &table, 10),
            Err(AnalysisError::MissingPredictions(_))
        ));
    }
}
