//! Manifests, runners and the results ledger.
//!
//! A [`Manifest`] describes one fine-tuning run: every train row outside the
//! target domain plus one target subset, evaluated on the target domain's
//! test split. A [`Runner`] turns a manifest into a [`RunResult`]. Two
//! runners ship here: [`Simulator`], which draws exact match from a known
//! curve, and [`ExecRunner`], which hands the manifest to an external
//! command. [`run_protocol`] executes manifests (optionally in parallel) and
//! records every outcome, success or failure, in a [`Ledger`].

use std::collections::HashSet;
use std::fs;
use std::io;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::EfficiencyPoint;
use crate::dataset::{CorpusTable, DatasetError, Split};
use crate::frame::{FrameNode, Frame};
use crate::rng::{derive_seed, SplitMix64};
use crate::sampling::{self, Algorithm, SamplingError, Schedule, SubsetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub model_id: String,
    pub target_domain: String,
    pub subset: SubsetSpec,
    /// Target train rows drawn for this run.
    pub subset_rows: Vec<usize>,
    /// The x coordinate of this run: the nominal percentage for uniform
    /// subsets, the realized one for spis subsets.
    pub subset_percent: f64,
    /// Source train rows followed by `subset_rows`.
    pub train_rows: Vec<usize>,
    /// Source-domain eval rows.
    pub eval_rows: Vec<usize>,
    /// Target-domain test rows.
    pub test_rows: Vec<usize>,
}

/// The parts of a manifest kept in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub run_id: String,
    pub model_id: String,
    pub target_domain: String,
    pub subset: SubsetSpec,
    pub subset_percent: f64,
    pub subset_rows: usize,
    pub train_rows: usize,
    pub eval_rows: usize,
    pub test_rows: usize,
}

impl Manifest {
    pub fn summary(&self) -> ManifestSummary {
        ManifestSummary {
            run_id: self.run_id.clone(),
            model_id: self.model_id.clone(),
            target_domain: self.target_domain.clone(),
            subset: self.subset.clone(),
            subset_percent: self.subset_percent,
            subset_rows: self.subset_rows.len(),
            train_rows: self.train_rows.len(),
            eval_rows: self.eval_rows.len(),
            test_rows: self.test_rows.len(),
        }
    }

    /// Checks that train and test are disjoint and that only the subset
    /// contributes target-domain rows to training.
    pub fn check_disjoint(&self, table: &CorpusTable) -> Result<(), ProtocolError> {
        let test: HashSet<usize> = self.test_rows.iter().copied().collect();
        let subset: HashSet<usize> = self.subset_rows.iter().copied().collect();
        for &id in &self.train_rows {
            let row = table.row(id).ok_or(ProtocolError::UnknownRow(id))?;
            if test.contains(&id) {
                return Err(ProtocolError::Leak {
                    run_id: self.run_id.clone(),
                    row: id,
                });
            }
            if row.domain == self.target_domain && !subset.contains(&id) {
                return Err(ProtocolError::Leak {
                    run_id: self.run_id.clone(),
                    row: id,
                });
            }
        }
        Ok(())
    }
}

/// Per-example system output, for per-intent breakdowns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub row_id: usize,
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub exact_match: f64,
    pub seed: u64,
    /// Seconds.
    #[serde(default)]
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<Prediction>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunOutcome {
    Ok { result: RunResult },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub manifest: ManifestSummary,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

/// Append-only record of one protocol execution, one entry per run id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(
        &mut self,
        manifest: ManifestSummary,
        outcome: RunOutcome,
    ) -> Result<(), ProtocolError> {
        if self.entries.iter().any(|e| e.manifest.run_id == manifest.run_id) {
            return Err(ProtocolError::DuplicateRunId(manifest.run_id));
        }
        if let RunOutcome::Ok { result } = &outcome {
            if result.run_id != manifest.run_id {
                return Err(ProtocolError::ResultMismatch {
                    expected: manifest.run_id,
                    got: result.run_id.clone(),
                });
            }
            if !(0.0..=100.0).contains(&result.exact_match) {
                return Err(ProtocolError::ExactMatchOutOfRange(result.exact_match));
            }
        }
        self.entries.push(LedgerEntry { manifest, outcome });
        Ok(())
    }

    pub fn successes(&self) -> impl Iterator<Item = (&ManifestSummary, &RunResult)> {
        self.entries.iter().filter_map(|e| match &e.outcome {
            RunOutcome::Ok { result } => Some((&e.manifest, result)),
            RunOutcome::Failed { .. } => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = (&ManifestSummary, &str)> {
        self.entries.iter().filter_map(|e| match &e.outcome {
            RunOutcome::Failed { error } => Some((&e.manifest, error.as_str())),
            RunOutcome::Ok { .. } => None,
        })
    }

    pub fn failure_count(&self) -> usize {
        self.failures().count()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("ledger serializes");
        out.push('\n');
        out
    }

    /// Parses a ledger, re-checking its invariants.
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let raw: Ledger = serde_json::from_str(text)?;
        let mut ledger = Ledger::new();
        for entry in raw.entries {
            ledger.append(entry.manifest, entry.outcome)?;
        }
        Ok(ledger)
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("duplicate run id {0:?}")]
    DuplicateRunId(String),
    #[error("result for run {got:?} filed under manifest {expected:?}")]
    ResultMismatch { expected: String, got: String },
    #[error("exact match {0} outside [0, 100]")]
    ExactMatchOutOfRange(f64),
    #[error("row {0} is not in the corpus")]
    UnknownRow(usize),
    #[error("run {run_id:?} trains on held-out target row {row}")]
    Leak { run_id: String, row: usize },
    #[error("ledger is empty")]
    EmptyLedger,
    #[error("every run failed")]
    AllRunsFailed,
    #[error("ledger mixes curves: {0}")]
    MixedCurves(String),
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("malformed ledger: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write manifest: {0}")]
    Manifest(#[source] io::Error),
    #[error("cannot start {program:?}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: io::Error,
    },
    #[error("runner exited with {status}: {stderr}")]
    ExitStatus { status: String, stderr: String },
    #[error("runner output is not a run result: {0}")]
    InvalidOutput(String),
    #[error("runner panicked: {0}")]
    Panicked(String),
}

/// Builds one manifest per (schedule size, seed), seeds outermost.
pub fn build_manifests(
    table: &CorpusTable,
    target_domain: &str,
    schedule: &Schedule,
    algorithm: Algorithm,
    seeds: &[u64],
    model_id: &str,
) -> Result<Vec<Manifest>, ProtocolError> {
    let sizes: Vec<f64> = schedule.sizes.iter().map(|&k| f64::from(k)).collect();
    build_manifests_for_sizes(table, target_domain, &sizes, algorithm, seeds, model_id)
}

pub fn build_manifests_for_sizes(
    table: &CorpusTable,
    target_domain: &str,
    sizes: &[f64],
    algorithm: Algorithm,
    seeds: &[u64],
    model_id: &str,
) -> Result<Vec<Manifest>, ProtocolError> {
    let (source, _) = crate::dataset::partition(table, target_domain)?;
    let target = table.domain(target_domain)?;
    let source_train: Vec<usize> = source
        .iter()
        .copied()
        .filter(|&i| table.rows()[i].split == Split::Train)
        .collect();
    let source_eval: Vec<usize> = source
        .iter()
        .copied()
        .filter(|&i| table.rows()[i].split == Split::Eval)
        .collect();

    let mut manifests = Vec::with_capacity(sizes.len() * seeds.len());
    for &seed in seeds {
        for &size in sizes {
            let spec = SubsetSpec {
                target_domain: target_domain.to_owned(),
                algorithm,
                size_param: size,
                seed,
            };
            // Size 0 is the zero-shot run for either sampler.
            let subset_rows = if size == 0.0 {
                Vec::new()
            } else {
                sampling::sample(table, &spec)?.row_ids
            };
            let subset_percent = match algorithm {
                Algorithm::Uniform => size,
                Algorithm::Spis if target.train.is_empty() => 0.0,
                Algorithm::Spis => 100.0 * subset_rows.len() as f64 / target.train.len() as f64,
            };
            let mut train_rows = source_train.clone();
            train_rows.extend_from_slice(&subset_rows);
            manifests.push(Manifest {
                run_id: format!("{model_id}/{target_domain}/{algorithm}-{size}/seed-{seed}"),
                model_id: model_id.to_owned(),
                target_domain: target_domain.to_owned(),
                subset: spec,
                subset_rows,
                subset_percent,
                train_rows,
                eval_rows: source_eval.clone(),
                test_rows: target.test.clone(),
            });
        }
    }
    Ok(manifests)
}

/// Turns a manifest into an exact-match result.
pub trait Runner: Sync {
    fn run(&self, manifest: &Manifest) -> Result<RunResult, RunError>;
}

impl<F> Runner for F
where
    F: Fn(&Manifest) -> Result<RunResult, RunError> + Sync,
{
    fn run(&self, manifest: &Manifest) -> Result<RunResult, RunError> {
        self(manifest)
    }
}

/// Executes every manifest exactly once on up to `jobs` threads.
///
/// Runner errors and panics become failed entries; the other runs proceed.
/// Entries are appended by a single writer in manifest order, so the ledger
/// does not depend on scheduling.
pub fn run_protocol<R: Runner + ?Sized>(
    manifests: &[Manifest],
    runner: &R,
    jobs: usize,
) -> Result<Ledger, ProtocolError> {
    let mut seen = HashSet::new();
    for m in manifests {
        if !seen.insert(m.run_id.as_str()) {
            return Err(ProtocolError::DuplicateRunId(m.run_id.clone()));
        }
    }

    let mut outcomes: Vec<Option<RunOutcome>> = vec![None; manifests.len()];
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, manifests.len().max(1));
    let (tx, rx) = mpsc::channel::<(usize, RunOutcome)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(manifest) = manifests.get(i) else {
                    break;
                };
                let outcome = execute(runner, manifest);
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            outcomes[i] = Some(outcome);
        }
    });

    let mut ledger = Ledger::new();
    for (manifest, outcome) in manifests.iter().zip(outcomes) {
        let outcome = outcome.expect("every manifest reports back");
        match ledger.append(manifest.summary(), outcome) {
            Ok(()) => {}
            // A runner that returns a bad result fails only its own run.
            Err(e @ (ProtocolError::ResultMismatch { .. } | ProtocolError::ExactMatchOutOfRange(_))) => {
                ledger.append(
                    manifest.summary(),
                    RunOutcome::Failed {
                        error: e.to_string(),
                    },
                )?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ledger)
}

fn execute<R: Runner + ?Sized>(runner: &R, manifest: &Manifest) -> RunOutcome {
    let attempt = panic::catch_unwind(AssertUnwindSafe(|| runner.run(manifest)));
    let result = attempt.unwrap_or_else(|payload| {
        let message = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(RunError::Panicked(message))
    });
    match result {
        Ok(result) => RunOutcome::Ok { result },
        Err(e) => RunOutcome::Failed {
            error: e.to_string(),
        },
    }
}

/// Ground-truth curve of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Truth {
    pub fn value(&self, x: f64) -> f64 {
        self.a / x.powf(self.b) + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRunnerConfig {
    pub truth: Truth,
    /// Standard deviation of the additive exact-match noise.
    pub noise_sigma: f64,
    /// Exact match reported for the 0% subset, where the curve is undefined.
    pub em_at_zero: f64,
    pub seed: u64,
}

impl SimulatedRunnerConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(0.0..=100.0).contains(&self.em_at_zero) {
            return Err(ProtocolError::InvalidConfig(format!(
                "em_at_zero {} outside [0, 100]",
                self.em_at_zero
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "noise_sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Simulated exact match for one manifest.
///
/// `clamp(truth(k) + ε, 0, 100)` for `k > 0` and `clamp(em_at_zero + ε, 0,
/// 100)` for `k = 0`, with `ε ~ N(0, σ²)` drawn from a stream keyed by
/// (config seed, run seed, k) so results do not depend on execution order.
pub fn simulated_run(manifest: &Manifest, config: &SimulatedRunnerConfig) -> RunResult {
    let k = manifest.subset_percent;
    let mut rng = SplitMix64::new(derive_seed(&[
        config.seed,
        manifest.subset.seed,
        k.to_bits(),
    ]));
    let noise = if config.noise_sigma > 0.0 {
        config.noise_sigma * rng.next_gaussian()
    } else {
        0.0
    };
    let mean = if k > 0.0 {
        config.truth.value(k)
    } else {
        config.em_at_zero
    };
    RunResult {
        run_id: manifest.run_id.clone(),
        exact_match: (mean + noise).clamp(0.0, 100.0),
        seed: manifest.subset.seed,
        wall_time: 0.0,
        predictions: None,
    }
}

/// Runner backed by [`simulated_run`].
///
/// With a corpus attached it also emits per-example predictions: each test
/// row is predicted correctly with probability `EM / 100`, drawn per row
/// from a stream keyed by (config seed, run seed, k, row id). Wrong
/// predictions are the reference frame with an extra token. The reported
/// exact match stays the simulated curve value.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub config: SimulatedRunnerConfig,
    corpus: Option<&'a CorpusTable>,
}

impl<'a> Simulator<'a> {
    pub fn new(config: SimulatedRunnerConfig) -> Result<Self, ProtocolError> {
        config.validate()?;
        Ok(Self {
            config,
            corpus: None,
        })
    }

    pub fn with_predictions(
        config: SimulatedRunnerConfig,
        corpus: &'a CorpusTable,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        Ok(Self {
            config,
            corpus: Some(corpus),
        })
    }
}

impl Runner for Simulator<'_> {
    fn run(&self, manifest: &Manifest) -> Result<RunResult, RunError> {
        let mut result = simulated_run(manifest, &self.config);
        if let Some(corpus) = self.corpus {
            let p = result.exact_match / 100.0;
            let mut predictions = Vec::with_capacity(manifest.test_rows.len());
            for &id in &manifest.test_rows {
                let reference = &corpus
                    .row(id)
                    .ok_or_else(|| RunError::InvalidOutput(format!("unknown test row {id}")))?
                    .frame;
                let mut rng = SplitMix64::new(derive_seed(&[
                    self.config.seed,
                    manifest.subset.seed,
                    manifest.subset_percent.to_bits(),
                    id as u64,
                ]));
                let frame = if rng.next_f64() < p {
                    reference.to_canonical()
                } else {
                    corrupt(reference).to_canonical()
                };
                predictions.push(Prediction { row_id: id, frame });
            }
            result.predictions = Some(predictions);
        }
        Ok(result)
    }
}

fn corrupt(frame: &Frame) -> Frame {
    let mut root = frame.root().clone();
    if let FrameNode::Intent { children, .. } = &mut root {
        children.push(FrameNode::Token("<wrong>".into()));
    }
    Frame::new(root).expect("appending a token keeps the frame valid")
}

/// Runs an external command per manifest.
///
/// The manifest is written as JSON to a temporary file whose path is passed
/// as the last argument. The command must print a [`RunResult`] JSON object
/// to stdout and exit 0. A missing `wall_time` is filled with the measured
/// duration.
#[derive(Debug, Clone)]
pub struct ExecRunner {
    program: String,
    args: Vec<String>,
}

impl ExecRunner {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }

    /// Splits a command line on whitespace: program, then fixed arguments.
    pub fn from_command_line(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(Self::new(program, parts.collect()))
    }

    fn invoke(&self, manifest_path: &Path) -> Result<(Vec<u8>, f64), RunError> {
        let start = Instant::now();
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(manifest_path)
            .output()
            .map_err(|source| RunError::Spawn {
                program: self.program.clone(),
                source,
            })?;
        let elapsed = start.elapsed().as_secs_f64();
        if !output.status.success() {
            return Err(RunError::ExitStatus {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
            });
        }
        Ok((output.stdout, elapsed))
    }
}

#[derive(Deserialize)]
struct ExternalResult {
    run_id: String,
    exact_match: f64,
    seed: u64,
    wall_time: Option<f64>,
    #[serde(default)]
    predictions: Option<Vec<Prediction>>,
}

impl Runner for ExecRunner {
    fn run(&self, manifest: &Manifest) -> Result<RunResult, RunError> {
        let dir = tempfile::tempdir().map_err(RunError::Manifest)?;
        let path = dir.path().join("manifest.json");
        let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(RunError::Manifest)?;

        let (stdout, elapsed) = self.invoke(&path)?;
        let raw: ExternalResult = serde_json::from_slice(&stdout)
            .map_err(|e| RunError::InvalidOutput(e.to_string()))?;
        Ok(RunResult {
            run_id: raw.run_id,
            exact_match: raw.exact_match,
            seed: raw.seed,
            wall_time: raw.wall_time.unwrap_or(elapsed),
            predictions: raw.predictions,
        })
    }
}

/// Projects successful runs onto (subset %, exact match %) points.
///
/// All runs must share one (model, target domain) pair.
pub fn ledger_to_curve(ledger: &Ledger) -> Result<Vec<EfficiencyPoint>, ProtocolError> {
    let first = ledger.entries().first().ok_or(ProtocolError::EmptyLedger)?;
    let key = (&first.manifest.model_id, &first.manifest.target_domain);
    if let Some(other) = ledger
        .entries()
        .iter()
        .find(|e| (&e.manifest.model_id, &e.manifest.target_domain) != key)
    {
        return Err(ProtocolError::MixedCurves(format!(
            "{}/{} and {}/{}",
            key.0, key.1, other.manifest.model_id, other.manifest.target_domain
        )));
    }
    let points: Vec<EfficiencyPoint> = ledger
        .successes()
        .map(|(m, r)| EfficiencyPoint {
            subset_percent: m.subset_percent,
            exact_match: r.exact_match,
            seed: r.seed,
            model_id: m.model_id.clone(),
            domain: m.target_domain.clone(),
        })
        .collect();
    if points.is_empty() {
        return Err(ProtocolError::AllRunsFailed);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CorpusRow;
    use crate::frame::parse_frame;
    use crate::sampling::make_schedule;

    const CANON: Truth = Truth {
        a: -27.26,
        b: 0.35,
        c: 97.79,
    };

    fn config(sigma: f64) -> SimulatedRunnerConfig {
        SimulatedRunnerConfig {
            truth: CANON,
            noise_sigma: sigma,
            em_at_zero: 10.0,
            seed: 42,
        }
    }

    fn corpus() -> CorpusTable {
        let mut rows = Vec::new();
        let mut push = |domain: &str, intent: &str, split: Split, n: usize| {
            for i in 0..n {
                rows.push(CorpusRow {
                    domain: domain.into(),
                    utterance: format!("u{i}"),
                    frame: parse_frame(&format!("[{intent} u{i} ]")).unwrap(),
                    split,
                });
            }
        };
        push("alarm", "IN:CREATE_ALARM", Split::Train, 30);
        push("alarm", "IN:CREATE_ALARM", Split::Eval, 5);
        push("weather", "IN:GET_WEATHER", Split::Train, 200);
        push("weather", "IN:GET_WEATHER", Split::Test, 20);
        push("weather", "IN:GET_WEATHER", Split::Eval, 4);
        push("music", "IN:PLAY_MUSIC", Split::Train, 10);
        CorpusTable::from_rows(rows)
    }

    #[test]
    fn manifests_follow_the_schedule() {
        let table = corpus();
        let schedule = make_schedule(10).unwrap();
        let ms = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0], "m").unwrap();
        let ks: Vec<f64> = ms.iter().map(|m| m.subset_percent).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 4.0, 7.0, 12.0, 21.0, 36.0, 60.0, 100.0]);
        for m in &ms {
            m.check_disjoint(&table).unwrap();
            assert_eq!(m.test_rows.len(), 20);
            assert_eq!(m.train_rows.len(), 40 + m.subset_rows.len());
            assert_eq!(m.eval_rows.len(), 5);
            assert!(m.subset_rows.iter().all(|&i| table.rows()[i].domain == "weather"));
        }
        assert!(ms[0].subset_rows.is_empty());
        assert!(ms[0].train_rows.iter().all(|&i| table.rows()[i].domain != "weather"));
        assert_eq!(ms[5].subset_rows.len(), 24);

        let ms = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0, 1, 2], "m").unwrap();
        assert_eq!(ms.len(), 30);
        let ids: HashSet<_> = ms.iter().map(|m| &m.run_id).collect();
        assert_eq!(ids.len(), 30);
    }

    #[test]
    fn spis_manifests_use_realized_percent() {
        let table = corpus();
        let ms = build_manifests_for_sizes(&table, "weather", &[0.0, 1.0], Algorithm::Spis, &[3], "m").unwrap();
        assert_eq!(ms[0].subset_percent, 0.0);
        assert_eq!(ms[1].subset_rows.len(), 1);
        assert_eq!(ms[1].subset_percent, 0.5);
    }

    #[test]
    fn manifest_errors_propagate() {
        let table = corpus();
        let schedule = make_schedule(3).unwrap();
        assert!(matches!(
            build_manifests(&table, "nope", &schedule, Algorithm::Uniform, &[0], "m"),
            Err(ProtocolError::Dataset(DatasetError::UnknownDomain(_)))
        ));
    }

    #[test]
    fn leak_detection() {
        let table = corpus();
        let schedule = make_schedule(3).unwrap();
        let mut m = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0], "m")
            .unwrap()
            .remove(1);
        m.train_rows.push(m.test_rows[0]);
        assert!(matches!(m.check_disjoint(&table), Err(ProtocolError::Leak { .. })));
    }

    #[test]
    fn simulator_values() {
        let table = corpus();
        let schedule = make_schedule(10).unwrap();
        let ms = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0], "m").unwrap();
        let r = simulated_run(&ms[1], &config(0.0));
        assert!((r.exact_match - 70.53).abs() < 1e-12);
        let r = simulated_run(&ms[0], &config(0.0));
        assert_eq!(r.exact_match, 10.0);
        assert_eq!(r.wall_time, 0.0);
    }

    #[test]
    fn simulator_noise_stays_within_five_sigma() {
        let table = corpus();
        let ms = build_manifests_for_sizes(&table, "weather", &[12.0], Algorithm::Uniform, &[0], "m").unwrap();
        let truth = CANON.value(12.0);
        let mut within = 0;
        for seed in 0..10_000u64 {
            let cfg = SimulatedRunnerConfig { seed, ..config(0.5) };
            let r = simulated_run(&ms[0], &cfg);
            if (r.exact_match - truth).abs() <= 2.5 {
                within += 1;
            }
        }
        assert!(within >= 9_990, "{within}");
    }

    #[test]
    fn simulator_config_validation() {
        assert!(Simulator::new(SimulatedRunnerConfig { em_at_zero: 101.0, ..config(0.0) }).is_err());
        assert!(Simulator::new(SimulatedRunnerConfig { noise_sigma: -1.0, ..config(0.0) }).is_err());
    }

    #[test]
    fn protocol_is_complete_and_deterministic() {
        let table = corpus();
        let schedule = make_schedule(10).unwrap();
        let ms = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0], "m").unwrap();
        let sim = Simulator::new(config(0.5)).unwrap();
        let a = run_protocol(&ms, &sim, 1).unwrap();
        let b = run_protocol(&ms, &sim, 4).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.failure_count(), 0);
        assert_eq!(a.to_json(), b.to_json());
        let back = Ledger::from_json(&a.to_json()).unwrap();
        assert_eq!(back.to_json(), a.to_json());
    }

    #[test]
    fn failures_are_isolated() {
        let table = corpus();
        let schedule = make_schedule(10).unwrap();
        let ms = build_manifests(&table, "weather", &schedule, Algorithm::Uniform, &[0], "m").unwrap();
        let sim = Simulator::new(config(0.0)).unwrap();
        let flaky = |m: &Manifest| -> Result<RunResult, RunError> {
            if m.subset_percent == 7.0 {
                return Err(RunError::InvalidOutput("boom".into()));
            }
            if m.subset_percent == 12.0 {
                panic!("crashed");
            }
            sim.run(m)
        };
        let ledger = run_protocol(&ms, &flaky, 3).unwrap();
        assert_eq!(ledger.len(), 10);
        assert_eq!(ledger.failure_count(), 2);
        let points = ledger_to_curve(&ledger).unwrap();
        assert_eq!(points.len(), 8);
    }

    #[test]
    fn bad_results_fail_their_run() {
        let table = corpus();
        let ms = build_manifests_for_sizes(&table, "weather", &[1.0, 2.0], Algorithm::Uniform, &[0], "m").unwrap();
        let liar = |m: &Manifest| -> Result<RunResult, RunError> {
            Ok(RunResult {
                run_id: if m.subset_percent == 1.0 { "other".into() } else { m.run_id.clone() },
                exact_match: 50.0,
                seed: 0,
                wall_time: 0.0,
                predictions: None,
            })
        };
        let ledger = run_protocol(&ms, &liar, 1).unwrap();
        assert_eq!(ledger.failure_count(), 1);
    }

    #[test]
    fn ledger_rejects_duplicates_and_mismatches() {
        let table = corpus();
        let ms = build_manifests_for_sizes(&table, "weather", &[1.0], Algorithm::Uniform, &[0], "m").unwrap();
        let mut ledger = Ledger::new();
        let ok = RunOutcome::Ok {
            result: simulated_run(&ms[0], &config(0.0)),
        };
        ledger.append(ms[0].summary(), ok.clone()).unwrap();
        assert!(matches!(
            ledger.append(ms[0].summary(), ok),
            Err(ProtocolError::DuplicateRunId(_))
        ));
        let dup = [ms[0].clone(), ms[0].clone()];
        let sim = Simulator::new(config(0.0)).unwrap();
        assert!(matches!(run_protocol(&dup, &sim, 1), Err(ProtocolError::DuplicateRunId(_))));
    }

    #[test]
    fn curve_projection_errors() {
        assert!(matches!(ledger_to_curve(&Ledger::new()), Err(ProtocolError::EmptyLedger)));

        let table = corpus();
        let mut ms = build_manifests_for_sizes(&table, "weather", &[1.0], Algorithm::Uniform, &[0], "m").unwrap();
        ms.extend(build_manifests_for_sizes(&table, "alarm", &[1.0], Algorithm::Uniform, &[0], "m").unwrap());
        let sim = Simulator::new(config(0.0)).unwrap();
        let ledger = run_protocol(&ms, &sim, 1).unwrap();
        assert!(matches!(ledger_to_curve(&ledger), Err(ProtocolError::MixedCurves(_))));

        let failing = |_: &Manifest| -> Result<RunResult, RunError> { Err(RunError::InvalidOutput("x".into())) };
        let ledger = run_protocol(&ms[..1], &failing, 1).unwrap();
        assert!(matches!(ledger_to_curve(&ledger), Err(ProtocolError::AllRunsFailed)));
    }

    #[test]
    fn simulator_predictions_cover_test_rows() {
        let table = corpus();
        let ms = build_manifests_for_sizes(&table, "weather", &[100.0], Algorithm::Uniform, &[0], "m").unwrap();
        let cfg = SimulatedRunnerConfig {
            truth: Truth { a: -1.0, b: 1.0, c: 101.0 },
            ..config(0.0)
        };
        let sim = Simulator::with_predictions(cfg, &table).unwrap();
        let r = sim.run(&ms[0]).unwrap();
        let preds = r.predictions.unwrap();
        assert_eq!(preds.len(), 20);
        // EM is 100, so every prediction matches its reference.
        for p in preds {
            assert_eq!(p.frame, table.rows()[p.row_id].frame.to_canonical());
        }
    }

    #[test]
    fn run_result_json_shape() {
        let r = RunResult {
            run_id: "r".into(),
            exact_match: 50.0,
            seed: 1,
            wall_time: 2.5,
            predictions: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"run_id":"r","exact_match":50.0,"seed":1,"wall_time":2.5}"#
        );
    }
}
