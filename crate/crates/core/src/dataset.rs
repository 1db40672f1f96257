//! Corpus ingestion and per-domain bookkeeping.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{parse_frame, Frame, FrameError};

pub const TSV_HEADER: [&str; 3] = ["domain", "utterance", "semantic_parse"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        }
    }

    /// Infers a split from a `_train` / `_eval` / `_test` file-stem suffix.
    pub fn from_path(path: &Path) -> Option<Split> {
        let stem = path.file_stem()?.to_str()?;
        [Split::Train, Split::Eval, Split::Test]
            .into_iter()
            .find(|s| stem.ends_with(&format!("_{}", s.as_str())))
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "tsv" => Some(CorpusFormat::Tsv),
            "jsonl" | "json" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRow {
    pub domain: String,
    pub utterance: String,
    pub frame: Frame,
    pub split: Split,
}

/// Row positions of one domain, grouped by split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainIndex {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub test: Vec<usize>,
}

impl DomainIndex {
    pub fn split(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Eval => &self.eval,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<usize> {
        match split {
            Split::Train => &mut self.train,
            Split::Eval => &mut self.eval,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.eval.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Immutable table of corpus rows in file order, indexed by domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusTable {
    rows: Vec<CorpusRow>,
    index: BTreeMap<String, DomainIndex>,
}

impl CorpusTable {
    pub fn from_rows(rows: Vec<CorpusRow>) -> Self {
        let mut index: BTreeMap<String, DomainIndex> = BTreeMap::new();
        for (pos, row) in rows.iter().enumerate() {
            index
                .entry(row.domain.clone())
                .or_default()
                .split_mut(row.split)
                .push(pos);
        }
        Self { rows, index }
    }

    pub fn rows(&self) -> &[CorpusRow] {
        &self.rows
    }

    pub fn row(&self, id: usize) -> Option<&CorpusRow> {
        self.rows.get(id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn domain_count(&self) -> usize {
        self.index.len()
    }

    pub fn domain(&self, domain: &str) -> Result<&DomainIndex, DatasetError> {
        self.index
            .get(domain)
            .ok_or_else(|| DatasetError::UnknownDomain(domain.to_owned()))
    }

    /// Row positions with the given split across every domain except `exclude`.
    pub fn rows_outside(&self, exclude: &str, split: Split) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split && r.domain != exclude)
            .map(|(i, _)| i)
            .collect()
    }

    /// Writes the table as TSV with an explicit split column.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}\tsplit", TSV_HEADER.join("\t"))?;
        for row in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                row.domain,
                row.utterance,
                row.frame.to_canonical(),
                row.split
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainStats {
    pub domain: String,
    pub train: usize,
    pub eval: usize,
    pub test: usize,
    /// Root-intent histogram over the train split.
    pub intents: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: {source}")]
    Frame {
        line: usize,
        #[source]
        source: FrameError,
    },
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("table has no domain besides the target {0:?}")]
    NoSourceDomains(String),
}

#[derive(Deserialize)]
struct JsonRow {
    domain: String,
    utterance: String,
    semantic_parse: String,
    #[serde(default)]
    split: Option<Split>,
}

/// Loads a corpus file, parsing every frame eagerly.
///
/// Rows without an explicit split take it from a `_train` / `_eval` / `_test`
/// file-name suffix, defaulting to train.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<CorpusTable, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let default_split = Split::from_path(path).unwrap_or(Split::Train);
    let rows = match format {
        CorpusFormat::Tsv => parse_tsv(&text, default_split)?,
        CorpusFormat::Jsonl => parse_jsonl(&text, default_split)?,
    };
    Ok(CorpusTable::from_rows(rows))
}

/// Loads several files (e.g. separate `_train` / `_eval` / `_test` files)
/// into one table, rows concatenated in argument order.
pub fn load_corpus_files(paths: &[PathBuf]) -> Result<CorpusTable, DatasetError> {
    let mut rows = Vec::new();
    for path in paths {
        let format = CorpusFormat::from_path(path).unwrap_or(CorpusFormat::Tsv);
        rows.extend(load_corpus(path, format)?.rows);
    }
    Ok(CorpusTable::from_rows(rows))
}

fn make_row(
    line: usize,
    domain: &str,
    utterance: &str,
    parse: &str,
    split: Split,
) -> Result<CorpusRow, DatasetError> {
    if domain.is_empty() {
        return Err(DatasetError::MalformedRow {
            line,
            message: "empty domain".into(),
        });
    }
    let frame = parse_frame(parse).map_err(|source| DatasetError::Frame { line, source })?;
    Ok(CorpusRow {
        domain: domain.to_owned(),
        utterance: utterance.to_owned(),
        frame,
        split,
    })
}

fn parse_tsv(text: &str, default_split: Split) -> Result<Vec<CorpusRow>, DatasetError> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').split('\t').collect(),
        None => return Ok(Vec::new()),
    };
    let has_split = match header.as_slice() {
        [a, b, c] if [*a, *b, *c] == TSV_HEADER => false,
        [a, b, c, "split"] if [*a, *b, *c] == TSV_HEADER => true,
        _ => {
            return Err(DatasetError::MalformedRow {
                line: 1,
                message: format!(
                    "expected header \"{}[\\tsplit]\"",
                    TSV_HEADER.join("\\t")
                ),
            })
        }
    };
    let width = if has_split { 4 } else { 3 };

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != width {
            return Err(DatasetError::MalformedRow {
                line: line_no,
                message: format!("expected {width} tab-separated columns, found {}", cols.len()),
            });
        }
        let split = if has_split {
            cols[3]
                .parse()
                .map_err(|message| DatasetError::MalformedRow { line: line_no, message })?
        } else {
            default_split
        };
        rows.push(make_row(line_no, cols[0], cols[1], cols[2], split)?);
    }
    Ok(rows)
}

fn parse_jsonl(text: &str, default_split: Split) -> Result<Vec<CorpusRow>, DatasetError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRow = serde_json::from_str(line).map_err(|e| DatasetError::MalformedRow {
            line: line_no,
            message: e.to_string(),
        })?;
        let split = raw.split.unwrap_or(default_split);
        rows.push(make_row(line_no, &raw.domain, &raw.utterance, &raw.semantic_parse, split)?);
    }
    Ok(rows)
}

pub fn domain_stats(table: &CorpusTable, domain: &str) -> Result<DomainStats, DatasetError> {
    let index = table.domain(domain)?;
    let mut intents = BTreeMap::new();
    for &id in &index.train {
        *intents
            .entry(table.rows[id].frame.root_label().to_owned())
            .or_insert(0) += 1;
    }
    Ok(DomainStats {
        domain: domain.to_owned(),
        train: index.train.len(),
        eval: index.eval.len(),
        test: index.test.len(),
        intents,
    })
}

/// Splits row positions into (source, target) for a target domain.
pub fn partition(
    table: &CorpusTable,
    target_domain: &str,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    table.domain(target_domain)?;
    if table.domain_count() < 2 {
        return Err(DatasetError::NoSourceDomains(target_domain.to_owned()));
    }
    Ok((0..table.len()).partition(|&i| table.rows[i].domain != target_domain))
}
