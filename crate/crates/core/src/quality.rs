//! Bitext extraction, external quality-score joining and threshold filtering.
//!
//! Scores come from an outside quality-estimation model via a CSV file:
//!
//! ```text
//! talk_id,src_lang,tgt_lang,index,score
//! t1,en,fr,0,71.5
//! ```
//!
//! `index` is the pair's ordinal among that talk's pairs for the language
//! pair, counted in anchor order before any sampling, so it stays stable
//! whatever the sample cap.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::align::{AlignedTuple, TimeInterval};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitextPair {
    pub talk_id: String,
    pub index: u64,
    pub anchor: TimeInterval,
    pub src_lang: String,
    pub tgt_lang: String,
    pub src_text: String,
    pub tgt_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BitextPair {
    pub fn key(&self) -> PairKey {
        PairKey {
            talk_id: self.talk_id.clone(),
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
            index: self.index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub talk_id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityPolicy {
    pub sample_cap: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl QualityPolicy {
    pub fn new(seed: u64) -> Self {
        QualityPolicy {
            sample_cap: 10_000,
            threshold: 60.0,
            seed,
        }
    }
}

/// Orders a language pair canonically (smaller code first).
pub fn canonical_pair<'a>(a: &'a str, b: &'a str) -> Result<(&'a str, &'a str)> {
    match a.cmp(b) {
        std::cmp::Ordering::Less => Ok((a, b)),
        std::cmp::Ordering::Greater => Ok((b, a)),
        std::cmp::Ordering::Equal => Err(Error::Domain(format!(
            "bitext needs two different languages, got {a} twice"
        ))),
    }
}

/// One pair per tuple holding both languages; at most `sample_cap` of them,
/// chosen uniformly with the policy seed. Output is in corpus order.
pub fn extract_bitext(corpus: &[AlignedTuple], pair: (&str, &str), policy: &QualityPolicy) -> Result<Vec<BitextPair>> {
    let (src, tgt) = canonical_pair(pair.0, pair.1)?;
    if policy.sample_cap < 1 {
        return Err(Error::Config("sample_cap must be at least 1".into()));
    }

    let mut tuples: Vec<&AlignedTuple> = corpus.iter().filter(|t| t.has(src) && t.has(tgt)).collect();
    tuples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut ordinal: BTreeMap<&str, u64> = BTreeMap::new();
    let mut pairs: Vec<BitextPair> = tuples
        .into_iter()
        .map(|t| {
            let idx = ordinal.entry(t.talk_id.as_str()).or_default();
            let pair = BitextPair {
                talk_id: t.talk_id.clone(),
                index: *idx,
                anchor: t.anchor,
                src_lang: src.to_string(),
                tgt_lang: tgt.to_string(),
                src_text: t.members[src].clone(),
                tgt_text: t.members[tgt].clone(),
                score: None,
            };
            *idx += 1;
            pair
        })
        .collect();

    if pairs.len() > policy.sample_cap {
        let mut rng = SeededRng::new(policy.seed);
        let mut keep = rng.choose_indices(pairs.len(), policy.sample_cap);
        keep.sort_unstable();
        let mut keep = keep.into_iter().peekable();
        let mut i = 0;
        pairs.retain(|_| {
            let hit = keep.peek() == Some(&i);
            if hit {
                keep.next();
            }
            i += 1;
            hit
        });
    }
    Ok(pairs)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    talk_id: String,
    src_lang: String,
    tgt_lang: String,
    index: u64,
    score: f64,
}

/// Result of joining a score file onto extracted pairs.
#[derive(Debug, Clone, Default)]
pub struct ScoreJoin {
    pub pairs: Vec<BitextPair>,
    /// Pairs that found no score row.
    pub unscored: Vec<PairKey>,
    /// Score rows whose key matches no pair.
    pub unknown_keys: Vec<PairKey>,
}

pub fn read_scores<R: Read>(scores: R) -> Result<BTreeMap<PairKey, f64>> {
    let mut reader = csv::Reader::from_reader(scores);
    let mut table = BTreeMap::new();
    for (i, row) in reader.deserialize::<ScoreRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !(0.0..=100.0).contains(&row.score) {
            return Err(Error::Parse {
                line,
                message: format!("score {} outside [0, 100]", row.score),
            });
        }
        let key = PairKey {
            talk_id: row.talk_id,
            src_lang: row.src_lang,
            tgt_lang: row.tgt_lang,
            index: row.index,
        };
        if table.contains_key(&key) {
            return Err(Error::DuplicateKey(format!(
                "score file line {line}: {} {}-{} #{}",
                key.talk_id, key.src_lang, key.tgt_lang, key.index
            )));
        }
        table.insert(key, row.score);
    }
    Ok(table)
}

pub fn attach_scores<R: Read>(pairs: Vec<BitextPair>, scores: R) -> Result<ScoreJoin> {
    let mut table = read_scores(scores)?;
    let mut join = ScoreJoin::default();
    for mut pair in pairs {
        match table.remove(&pair.key()) {
            Some(score) => pair.score = Some(score),
            None => join.unscored.push(pair.key()),
        }
        join.pairs.push(pair);
    }
    join.unknown_keys = table.into_keys().collect();
    for key in join.unscored.iter().chain(&join.unknown_keys) {
        log::warn!(
            "unmatched score key {} {}-{} #{}",
            key.talk_id,
            key.src_lang,
            key.tgt_lang,
            key.index
        );
    }
    Ok(join)
}

/// Keeps pairs scoring strictly above `threshold`.
pub fn filter_by_threshold(pairs: &[BitextPair], threshold: f64) -> Result<Vec<BitextPair>> {
    let mut kept = Vec::new();
    for pair in pairs {
        let score = pair.score.ok_or_else(|| {
            Error::Contract(format!(
                "pair {} {}-{} #{} has no score",
                pair.talk_id, pair.src_lang, pair.tgt_lang, pair.index
            ))
        })?;
        if score > threshold {
            kept.push(pair.clone());
        }
    }
    Ok(kept)
}

fn tsv_field(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

/// `src_text<TAB>tgt_text` per line. Tabs and newlines inside text become spaces;
/// the metadata file keeps the exact text.
pub fn write_tsv<W: Write>(pairs: &[BitextPair], mut out: W) -> Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}", tsv_field(&p.src_text), tsv_field(&p.tgt_text))?;
    }
    Ok(())
}

pub fn write_meta<W: Write>(pairs: &[BitextPair], mut out: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_meta<R: BufRead>(input: R) -> Result<Vec<BitextPair>> {
    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: BitextPair = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(pair.key()) {
            return Err(Error::DuplicateKey(format!("bitext metadata line {}", i + 1)));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}
