//! Timestamp-based multi-way alignment.
//!
//! Segments of one talk are grouped across languages by interval overlap.
//! The anchor language is the one with the most remaining segments (ties go
//! to the smallest code). Each anchor segment, in time order, takes from every
//! other language the unused segment with the highest IoU that clears the
//! threshold (ties: earlier start). Segments no anchor claimed are then
//! aligned among themselves by repeating the pass with a new anchor language,
//! so a cue without a counterpart ends up in a lower-degree tuple rather than
//! disappearing.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Talk, TalkSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl TimeInterval {
    pub fn new(start_ms: i64, end_ms: i64) -> Self {
        TimeInterval { start_ms, end_ms }
    }

    pub fn len(&self) -> i64 {
        self.end_ms - self.start_ms
    }

    pub fn is_empty(&self) -> bool {
        self.end_ms <= self.start_ms
    }
}

/// Intersection over union of two intervals, in milliseconds.
pub fn interval_iou(a: TimeInterval, b: TimeInterval) -> f64 {
    let inter = (a.end_ms.min(b.end_ms) - a.start_ms.max(b.start_ms)).max(0);
    let union = a.len() + b.len() - inter;
    if union <= 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignPolicy {
    pub iou_threshold: f64,
    pub exact_match_fast_path: bool,
    pub min_degree: usize,
}

impl Default for AlignPolicy {
    fn default() -> Self {
        AlignPolicy {
            iou_threshold: 0.9,
            exact_match_fast_path: true,
            min_degree: 1,
        }
    }
}

impl AlignPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must be in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        if self.min_degree < 1 {
            return Err(Error::Config("min_degree must be at least 1".into()));
        }
        Ok(())
    }
}

/// One utterance realised in several languages of the same talk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedTuple {
    pub talk_id: String,
    pub anchor: TimeInterval,
    pub members: BTreeMap<String, String>,
}

impl AlignedTuple {
    pub fn degree(&self) -> usize {
        self.members.len()
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn has(&self, lang: &str) -> bool {
        self.members.contains_key(lang)
    }

    /// Canonical corpus order: talk, then anchor position.
    pub fn sort_key(&self) -> (&str, i64, i64) {
        (&self.talk_id, self.anchor.start_ms, self.anchor.end_ms)
    }
}

pub fn sort_canonical(corpus: &mut [AlignedTuple]) {
    corpus.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.members.cmp(&b.members)));
}

struct Lane<'a> {
    lang: &'a str,
    intervals: Vec<TimeInterval>,
    texts: Vec<&'a str>,
    used: Vec<bool>,
}

impl Lane<'_> {
    fn remaining(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }
}

/// Aligns all language versions of a single talk.
pub fn align_talk(talks: &[&Talk], policy: &AlignPolicy) -> Result<Vec<AlignedTuple>> {
    policy.validate()?;
    let Some(first) = talks.first() else {
        return Ok(Vec::new());
    };
    let talk_id = first.talk_id.as_str();
    if let Some(other) = talks.iter().find(|t| t.talk_id != talk_id) {
        return Err(Error::Contract(format!(
            "align_talk called with mixed talk ids {talk_id:?} and {:?}",
            other.talk_id
        )));
    }
    let mut seen = BTreeSet::new();
    for t in talks {
        if !seen.insert(t.lang.as_str()) {
            return Err(Error::Contract(format!(
                "talk {talk_id} has two records for language {}",
                t.lang
            )));
        }
    }

    let mut lanes: Vec<Lane> = talks
        .iter()
        .map(|t| Lane {
            lang: &t.lang,
            intervals: t
                .segments
                .iter()
                .map(|s| TimeInterval::new(s.start_ms, s.end_ms))
                .collect(),
            texts: t.segments.iter().map(|s| s.text.as_str()).collect(),
            used: vec![false; t.segments.len()],
        })
        .collect();
    lanes.sort_by(|a, b| a.lang.cmp(b.lang));

    let mut tuples = Vec::new();
    let mut round = 0;
    // most remaining segments, then smallest code (lanes are sorted by code)
    while let Some(anchor_idx) = lanes
        .iter()
        .enumerate()
        .filter(|(_, l)| l.remaining() > 0)
        .max_by(|(ia, a), (ib, b)| a.remaining().cmp(&b.remaining()).then(ib.cmp(ia)))
        .map(|(i, _)| i)
    {
        let fast: Vec<bool> = lanes
            .iter()
            .map(|l| round == 0 && policy.exact_match_fast_path && l.intervals == lanes[anchor_idx].intervals)
            .collect();

        for a in 0..lanes[anchor_idx].intervals.len() {
            if lanes[anchor_idx].used[a] {
                continue;
            }
            let anchor = lanes[anchor_idx].intervals[a];
            lanes[anchor_idx].used[a] = true;
            let mut members = BTreeMap::new();
            members.insert(
                lanes[anchor_idx].lang.to_string(),
                lanes[anchor_idx].texts[a].to_string(),
            );

            for (li, lane) in lanes.iter_mut().enumerate() {
                if li == anchor_idx {
                    continue;
                }
                let pick = if fast[li] {
                    (!lane.used[a]).then_some(a)
                } else {
                    best_match(lane, anchor, policy.iou_threshold)
                };
                if let Some(s) = pick {
                    lane.used[s] = true;
                    members.insert(lane.lang.to_string(), lane.texts[s].to_string());
                }
            }

            tuples.push(AlignedTuple {
                talk_id: talk_id.to_string(),
                anchor,
                members,
            });
        }
        if round == 0 {
            let leftover: usize = lanes.iter().map(Lane::remaining).sum();
            if leftover > 0 {
                log::debug!("talk {talk_id}: {leftover} cues unmatched by the primary anchor");
            }
        }
        round += 1;
    }

    tuples.retain(|t| t.degree() >= policy.min_degree);
    sort_canonical(&mut tuples);
    Ok(tuples)
}

fn best_match(lane: &Lane, anchor: TimeInterval, threshold: f64) -> Option<usize> {
    // intervals are sorted by start, so only a window around the anchor can overlap
    let lo = lane.intervals.partition_point(|iv| iv.end_ms <= anchor.start_ms);
    let mut best: Option<(usize, f64)> = None;
    for s in lo..lane.intervals.len() {
        let iv = lane.intervals[s];
        if iv.start_ms >= anchor.end_ms {
            break;
        }
        if lane.used[s] {
            continue;
        }
        let iou = interval_iou(anchor, iv);
        if iou < threshold {
            continue;
        }
        // strict > keeps the earlier start on ties
        if best.is_none_or(|(_, b)| iou > b) {
            best = Some((s, iou));
        }
    }
    best.map(|(s, _)| s)
}

/// Aligns every talk in the set, in parallel, merged in talk-id order.
pub fn align_talkset(talks: &TalkSet, policy: &AlignPolicy) -> Result<Vec<AlignedTuple>> {
    policy.validate()?;
    let grouped: Vec<(&str, Vec<&Talk>)> = talks.by_talk().into_iter().collect();
    let per_talk: Vec<Vec<AlignedTuple>> = grouped
        .par_iter()
        .map(|(_, group)| align_talk(group, policy))
        .collect::<Result<_>>()?;
    Ok(per_talk.into_iter().flatten().collect())
}

pub fn write_corpus<W: Write>(corpus: &[AlignedTuple], mut out: W) -> Result<()> {
    for tuple in corpus {
        serde_json::to_writer(&mut out, tuple)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<AlignedTuple>> {
    let mut corpus = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tuple: AlignedTuple = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if tuple.members.is_empty() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "aligned tuple has no members".into(),
            });
        }
        corpus.push(tuple);
    }
    Ok(corpus)
}
