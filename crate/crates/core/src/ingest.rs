//! Transcript ingestion.
//!
//! Input is JSON-lines, one object per (talk, language):
//!
//! ```text
//! {"talk_id": "t1", "lang": "en", "domains": ["science"],
//!  "segments": [{"start_ms": 0, "end_ms": 1200, "text": "Hello."}]}
//! ```
//!
//! Segment text is NFC-normalised and trimmed; nothing else is touched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_ms: i64,
    pub end_ms: i64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Talk {
    pub talk_id: String,
    pub lang: String,
    #[serde(default)]
    pub domains: Vec<String>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NegativeStart,
    EmptyInterval,
    EmptyText,
    Ordering,
    Overlap,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::NegativeStart => "start_ms must be >= 0",
            Rule::EmptyInterval => "end_ms must be greater than start_ms",
            Rule::EmptyText => "text is empty after trimming",
            Rule::Ordering => "segments not sorted by start_ms",
            Rule::Overlap => "segment overlaps an earlier segment",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub segment: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "segment {}: {}", self.segment, self.rule)
    }
}

pub type ValidationReport = Vec<Violation>;

/// Checks every [`Talk`] invariant. `overlap_slack_ms` is how far a segment
/// may start before the end of an earlier one.
pub fn validate_talk(talk: &Talk, overlap_slack_ms: i64) -> ValidationReport {
    let mut report = Vec::new();
    let mut max_start = i64::MIN;
    let mut max_end = i64::MIN;

    for (i, seg) in talk.segments.iter().enumerate() {
        if seg.start_ms < 0 {
            report.push(Violation {
                segment: i,
                rule: Rule::NegativeStart,
            });
        }
        if seg.end_ms <= seg.start_ms {
            report.push(Violation {
                segment: i,
                rule: Rule::EmptyInterval,
            });
        }
        if seg.text.trim().is_empty() {
            report.push(Violation {
                segment: i,
                rule: Rule::EmptyText,
            });
        }
        if i > 0 {
            if seg.start_ms < max_start {
                report.push(Violation {
                    segment: i,
                    rule: Rule::Ordering,
                });
            } else if max_end.min(seg.end_ms) - seg.start_ms > overlap_slack_ms {
                report.push(Violation {
                    segment: i,
                    rule: Rule::Overlap,
                });
            }
        }
        max_start = max_start.max(seg.start_ms);
        max_end = max_end.max(seg.end_ms);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub mode: ParseMode,
    pub overlap_slack_ms: i64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            mode: ParseMode::Lenient,
            overlap_slack_ms: 0,
        }
    }
}

/// A record that did not make it into the [`TalkSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRecord {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TalkSet {
    talks: BTreeMap<(String, String), Talk>,
}

impl TalkSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a talk; returns it back if `(talk_id, lang)` is already present.
    pub fn insert(&mut self, talk: Talk) -> std::result::Result<(), Talk> {
        let key = (talk.talk_id.clone(), talk.lang.clone());
        if self.talks.contains_key(&key) {
            return Err(talk);
        }
        self.talks.insert(key, talk);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.talks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.talks.is_empty()
    }

    pub fn get(&self, talk_id: &str, lang: &str) -> Option<&Talk> {
        self.talks.get(&(talk_id.to_string(), lang.to_string()))
    }

    /// Talks in canonical `(talk_id, lang)` order.
    pub fn iter(&self) -> impl Iterator<Item = &Talk> {
        self.talks.values()
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.talks.keys().map(|(_, l)| l.as_str()).collect()
    }

    pub fn talk_ids(&self) -> BTreeSet<&str> {
        self.talks.keys().map(|(t, _)| t.as_str()).collect()
    }

    /// All language versions of each talk, keyed by talk id.
    pub fn by_talk(&self) -> BTreeMap<&str, Vec<&Talk>> {
        let mut grouped: BTreeMap<&str, Vec<&Talk>> = BTreeMap::new();
        for talk in self.talks.values() {
            grouped.entry(talk.talk_id.as_str()).or_default().push(talk);
        }
        grouped
    }

    /// Union of domain labels per talk id across its language versions.
    pub fn domain_index(&self) -> DomainIndex {
        let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for talk in self.talks.values() {
            index
                .entry(talk.talk_id.clone())
                .or_default()
                .extend(talk.domains.iter().cloned());
        }
        DomainIndex(index)
    }

    /// Writes the set back out as JSON-lines in canonical order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for talk in self.iter() {
            serde_json::to_writer(&mut out, talk)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Domain labels attached to each talk id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainIndex(pub BTreeMap<String, BTreeSet<String>>);

impl DomainIndex {
    pub fn labels(&self, talk_id: &str) -> Option<&BTreeSet<String>> {
        self.0.get(talk_id)
    }

    /// Every label observed on any talk.
    pub fn all_labels(&self) -> BTreeSet<String> {
        self.0.values().flatten().cloned().collect()
    }
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub talks: TalkSet,
    pub rejected: Vec<RejectedRecord>,
}

fn normalize(talk: &mut Talk) {
    for seg in &mut talk.segments {
        let nfc: String = seg.text.nfc().collect();
        seg.text = nfc.trim().to_string();
    }
}

/// Parses a JSON-lines transcript stream.
///
/// In lenient mode malformed or invalid records are listed in
/// [`ParseOutcome::rejected`] and skipped; in strict mode the first one is
/// returned as an error. Blank lines are ignored.
pub fn parse_transcripts<R: BufRead>(input: R, opts: &IngestOptions) -> Result<ParseOutcome> {
    let mut outcome = ParseOutcome::default();

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }

        let reason = match serde_json::from_str::<Talk>(&line) {
            Err(e) => Some(format!("malformed record: {e}")),
            Ok(mut talk) => {
                normalize(&mut talk);
                let violations = validate_talk(&talk, opts.overlap_slack_ms);
                if !violations.is_empty() {
                    let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                    Some(format!("talk {} [{}]: {}", talk.talk_id, talk.lang, listed.join("; ")))
                } else if talk.talk_id.is_empty() || talk.lang.is_empty() {
                    Some("talk_id and lang must be non-empty".to_string())
                } else {
                    match outcome.talks.insert(talk) {
                        Ok(()) => None,
                        Err(dup) => Some(format!("duplicate record for talk {} [{}]", dup.talk_id, dup.lang)),
                    }
                }
            }
        };

        if let Some(reason) = reason {
            if opts.mode == ParseMode::Strict {
                return Err(Error::Parse {
                    line: line_no,
                    message: reason,
                });
            }
            log::warn!("line {line_no}: {reason}");
            outcome.rejected.push(RejectedRecord { line: line_no, reason });
        }
    }
    Ok(outcome)
}
