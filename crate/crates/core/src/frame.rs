//! TOP-style bracketed semantic frames.
//!
//! A frame is a tree of intent (`IN:`) and slot (`SL:`) nodes whose leaves
//! are utterance tokens, written as `[IN:GET_WEATHER what s the
//! [SL:LOCATION boston ] forecast ]`. The canonical form separates every
//! token and bracket with a single space and performs no case folding, so
//! exact match reduces to structural equality of parsed trees.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const INTENT_PREFIX: &str = "IN:";
pub const SLOT_PREFIX: &str = "SL:";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FrameNode {
    Intent { label: String, children: Vec<FrameNode> },
    Slot { label: String, children: Vec<FrameNode> },
    Token(String),
}

impl FrameNode {
    pub fn label(&self) -> Option<&str> {
        match self {
            FrameNode::Intent { label, .. } | FrameNode::Slot { label, .. } => Some(label),
            FrameNode::Token(_) => None,
        }
    }

    pub fn children(&self) -> &[FrameNode] {
        match self {
            FrameNode::Intent { children, .. } | FrameNode::Slot { children, .. } => children,
            FrameNode::Token(_) => &[],
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            FrameNode::Token(text) => out.push_str(text),
            FrameNode::Intent { label, children } | FrameNode::Slot { label, children } => {
                out.push('[');
                out.push_str(label);
                for child in children {
                    out.push(' ');
                    child.write_canonical(out);
                }
                out.push_str(" ]");
            }
        }
    }
}

/// A parsed frame. The root is always an intent node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    root: FrameNode,
}

impl Frame {
    /// Wraps a root node, checking every tree invariant.
    pub fn new(root: FrameNode) -> Result<Self, FrameError> {
        if !matches!(root, FrameNode::Intent { .. }) {
            return Err(FrameError::RootNotIntent { offset: 0 });
        }
        validate(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &FrameNode {
        &self.root
    }

    pub fn root_label(&self) -> &str {
        self.root.label().expect("root is an intent")
    }

    /// Canonical single-space serialization.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.root.write_canonical(&mut out);
        out
    }

    /// Counts of every intent and slot label in the tree.
    pub fn ontology_labels(&self) -> LabelMultiset {
        let mut labels = LabelMultiset::default();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if let Some(label) = node.label() {
                labels.add(label, 1);
            }
            stack.extend(node.children());
        }
        labels
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

impl FromStr for Frame {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_frame(s)
    }
}

/// Occurrence counts of ontology labels. Stored counts are always >= 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMultiset {
    counts: BTreeMap<String, usize>,
}

impl LabelMultiset {
    pub fn add(&mut self, label: &str, count: usize) {
        if count == 0 {
            return;
        }
        *self.counts.entry(label.to_owned()).or_insert(0) += count;
    }

    pub fn merge(&mut self, other: &LabelMultiset) {
        for (label, &count) in &other.counts {
            self.add(label, count);
        }
    }

    pub fn get(&self, label: &str) -> usize {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn into_map(self) -> BTreeMap<String, usize> {
        self.counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("empty frame text")]
    Empty,
    #[error("expected '[' at byte {offset}")]
    ExpectedOpen { offset: usize },
    #[error("unclosed '[' opened at byte {offset}")]
    Unclosed { offset: usize },
    #[error("unexpected ']' at byte {offset}")]
    UnexpectedClose { offset: usize },
    #[error("root node at byte {offset} is not an intent")]
    RootNotIntent { offset: usize },
    #[error("empty label at byte {offset}")]
    EmptyLabel { offset: usize },
    #[error("invalid label {label:?} at byte {offset}")]
    InvalidLabel { label: String, offset: usize },
    #[error("{child} node cannot appear directly inside {parent} node (byte {offset})")]
    MisplacedNode {
        parent: &'static str,
        child: &'static str,
        offset: usize,
    },
    #[error("trailing input at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("invalid token {token:?}")]
    InvalidToken { token: String },
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_uppercase() || c == '_' || c == ':'
}

fn check_label(label: &str, offset: usize) -> Result<(), FrameError> {
    let body = label
        .strip_prefix(INTENT_PREFIX)
        .or_else(|| label.strip_prefix(SLOT_PREFIX));
    match body {
        Some(body) if !body.is_empty() && body.chars().all(is_label_char) => Ok(()),
        _ => Err(FrameError::InvalidLabel {
            label: label.to_owned(),
            offset,
        }),
    }
}

fn kind_name(node: &FrameNode) -> &'static str {
    match node {
        FrameNode::Intent { .. } => "intent",
        FrameNode::Slot { .. } => "slot",
        FrameNode::Token(_) => "token",
    }
}

fn validate(node: &FrameNode) -> Result<(), FrameError> {
    match node {
        FrameNode::Token(text) => {
            if text.is_empty() || text.contains(|c: char| c.is_whitespace() || c == '[' || c == ']')
            {
                return Err(FrameError::InvalidToken { token: text.clone() });
            }
        }
        FrameNode::Intent { label, children } | FrameNode::Slot { label, children } => {
            let is_intent = matches!(node, FrameNode::Intent { .. });
            let expected = if is_intent { INTENT_PREFIX } else { SLOT_PREFIX };
            if !label.starts_with(expected) {
                return Err(FrameError::InvalidLabel {
                    label: label.clone(),
                    offset: 0,
                });
            }
            check_label(label, 0)?;
            for child in children {
                let misplaced = match child {
                    FrameNode::Intent { .. } => is_intent,
                    FrameNode::Slot { .. } => !is_intent,
                    FrameNode::Token(_) => false,
                };
                if misplaced {
                    return Err(FrameError::MisplacedNode {
                        parent: kind_name(node),
                        child: kind_name(child),
                        offset: 0,
                    });
                }
                validate(child)?;
            }
        }
    }
    Ok(())
}

/// Parses a bracketed frame. Fails fast on the first malformation, reporting
/// its byte offset.
pub fn parse_frame(text: &str) -> Result<Frame, FrameError> {
    let mut parser = Parser { text, pos: 0 };
    parser.skip_ws();
    if parser.pos == text.len() {
        return Err(FrameError::Empty);
    }
    if parser.peek() != Some('[') {
        return Err(FrameError::ExpectedOpen { offset: parser.pos });
    }
    let start = parser.pos;
    let root = parser.node(None)?;
    if !matches!(root, FrameNode::Intent { .. }) {
        return Err(FrameError::RootNotIntent { offset: start });
    }
    parser.skip_ws();
    if parser.pos != text.len() {
        return Err(FrameError::TrailingInput { offset: parser.pos });
    }
    Ok(Frame { root })
}

/// Canonical serialization; `parse_frame(&serialize_frame(f)) == f`.
pub fn serialize_frame(frame: &Frame) -> String {
    frame.to_canonical()
}

/// Percentage of positions whose frames are identical.
///
/// Parsed frames are equal exactly when their canonical serializations are,
/// so the comparison is structural.
pub fn exact_match(system: &[Frame], reference: &[Frame]) -> Result<f64, ExactMatchError> {
    if system.is_empty() || reference.is_empty() {
        return Err(ExactMatchError::Empty);
    }
    if system.len() != reference.len() {
        return Err(ExactMatchError::LengthMismatch {
            system: system.len(),
            reference: reference.len(),
        });
    }
    let hits = system.iter().zip(reference).filter(|(s, r)| s == r).count();
    Ok(100.0 * hits as f64 / reference.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactMatchError {
    #[error("exact match needs at least one frame")]
    Empty,
    #[error("system has {system} frames but reference has {reference}")]
    LengthMismatch { system: usize, reference: usize },
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn take_run(&mut self) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '[' || c == ']' {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    /// Parses `[LABEL child* ]` with the cursor on `[`. `parent_is_intent` is
    /// `None` at the root.
    fn node(&mut self, parent_is_intent: Option<bool>) -> Result<FrameNode, FrameError> {
        let open = self.pos;
        self.pos += 1;
        let label_offset = self.pos;
        let label = self.take_run().to_owned();
        if label.is_empty() {
            return Err(FrameError::EmptyLabel { offset: label_offset });
        }
        let is_intent = if label.starts_with(INTENT_PREFIX) {
            true
        } else if label.starts_with(SLOT_PREFIX) {
            if parent_is_intent.is_none() {
                return Err(FrameError::RootNotIntent { offset: open });
            }
            false
        } else {
            return Err(FrameError::InvalidLabel {
                label,
                offset: label_offset,
            });
        };
        check_label(&label, label_offset)?;
        if parent_is_intent == Some(is_intent) {
            let kind = if is_intent { "intent" } else { "slot" };
            return Err(FrameError::MisplacedNode {
                parent: kind,
                child: kind,
                offset: open,
            });
        }

        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(FrameError::Unclosed { offset: open }),
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                Some('[') => children.push(self.node(Some(is_intent))?),
                Some(_) => children.push(FrameNode::Token(self.take_run().to_owned())),
            }
        }
        Ok(if is_intent {
            FrameNode::Intent { label, children }
        } else {
            FrameNode::Slot { label, children }
        })
    }
}
