//! Corpus statistics: parallelism spans per language, tuple/subset
//! combinatorics and talks per domain.

use std::collections::BTreeMap;
use std::io::Write;

use crate::align::AlignedTuple;
use crate::error::{Error, Result};
use crate::ingest::TalkSet;

/// Degree bands used for the per-language span chart. Ranges are inclusive.
/// Degrees above 50 fall into a trailing open band so counts are never lost.
pub const DEGREE_BUCKETS: [(usize, usize); 7] = [
    (1, 1),
    (2, 10),
    (11, 20),
    (21, 30),
    (31, 40),
    (41, 50),
    (51, usize::MAX),
];

pub fn bucket_label(bucket: usize) -> String {
    match DEGREE_BUCKETS[bucket] {
        (lo, hi) if lo == hi => lo.to_string(),
        (lo, usize::MAX) => format!("{lo}+"),
        (lo, hi) => format!("{lo}-{hi}"),
    }
}

pub fn bucket_of(degree: usize) -> usize {
    DEGREE_BUCKETS
        .iter()
        .position(|&(lo, hi)| (lo..=hi).contains(&degree))
        .expect("degree >= 1")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageSpan {
    pub sentences: u64,
    pub buckets: [u64; DEGREE_BUCKETS.len()],
    /// Exact count per tuple degree, so other bandings can be derived.
    pub by_degree: BTreeMap<usize, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelismHistogram {
    pub languages: BTreeMap<String, LanguageSpan>,
}

pub fn parallelism_histogram(corpus: &[AlignedTuple]) -> ParallelismHistogram {
    let mut hist = ParallelismHistogram::default();
    for tuple in corpus {
        let degree = tuple.degree();
        let bucket = bucket_of(degree);
        for lang in tuple.members.keys() {
            let span = hist.languages.entry(lang.clone()).or_default();
            span.sentences += 1;
            span.buckets[bucket] += 1;
            *span.by_degree.entry(degree).or_default() += 1;
        }
    }
    hist
}

/// Distribution of tuple sizes across the whole corpus.
pub fn tuple_size_distribution(corpus: &[AlignedTuple]) -> BTreeMap<usize, u64> {
    let mut dist = BTreeMap::new();
    for t in corpus {
        *dist.entry(t.degree()).or_default() += 1;
    }
    dist
}

fn check_degree(n: u32) -> Result<()> {
    if !(1..=64).contains(&n) {
        return Err(Error::Domain(format!("degree must be in 1..=64, got {n}")));
    }
    Ok(())
}

/// Non-empty language subsets contained in one tuple of degree `n`: 2^n - 1.
pub fn subset_tuple_count(n: u32) -> Result<u128> {
    check_degree(n)?;
    Ok((1u128 << n) - 1)
}

/// Sentences across all those subsets: n * 2^(n-1).
pub fn subset_sentence_count(n: u32) -> Result<u128> {
    check_degree(n)?;
    Ok(u128::from(n) << (n - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinatoricsReport {
    pub degree: u32,
    pub subset_tuples: u128,
    pub subset_sentences: u128,
}

pub fn combinatorics(n: u32) -> Result<CombinatoricsReport> {
    Ok(CombinatoricsReport {
        degree: n,
        subset_tuples: subset_tuple_count(n)?,
        subset_sentences: subset_sentence_count(n)?,
    })
}

/// Talks per domain label. A talk counts once per label even if several
/// of its language versions carry it.
pub fn domain_histogram(talks: &TalkSet) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for labels in talks.domain_index().0.values() {
        for label in labels {
            *counts.entry(label.clone()).or_default() += 1;
        }
    }
    counts
}

/// Everything the `stats` command reports.
#[derive(Debug, Clone, Default)]
pub struct StatsReport {
    pub tuples: u64,
    pub sentences: u64,
    pub max_degree: usize,
    pub parallelism: ParallelismHistogram,
    pub tuple_sizes: BTreeMap<usize, u64>,
    pub domains: BTreeMap<String, u64>,
}

impl StatsReport {
    pub fn build(corpus: &[AlignedTuple], talks: Option<&TalkSet>) -> Self {
        StatsReport {
            tuples: corpus.len() as u64,
            sentences: corpus.iter().map(|t| t.degree() as u64).sum(),
            max_degree: corpus.iter().map(AlignedTuple::degree).max().unwrap_or(0),
            parallelism: parallelism_histogram(corpus),
            tuple_sizes: tuple_size_distribution(corpus),
            domains: talks.map(domain_histogram).unwrap_or_default(),
        }
    }

    /// Key-value text report, one `key = value` per line, keys dotted:
    ///
    /// ```text
    /// corpus.tuples = 120
    /// lang.en.sentences = 100
    /// lang.en.bucket.2-10 = 40
    /// tuple_size.3 = 12
    /// domain.science = 2
    /// ```
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "corpus.tuples = {}", self.tuples)?;
        writeln!(out, "corpus.sentences = {}", self.sentences)?;
        writeln!(out, "corpus.languages = {}", self.parallelism.languages.len())?;
        writeln!(out, "corpus.max_degree = {}", self.max_degree)?;
        for (lang, span) in &self.parallelism.languages {
            writeln!(out, "lang.{lang}.sentences = {}", span.sentences)?;
            for (b, count) in span.buckets.iter().enumerate() {
                writeln!(out, "lang.{lang}.bucket.{} = {count}", bucket_label(b))?;
            }
        }
        for (degree, count) in &self.tuple_sizes {
            writeln!(out, "tuple_size.{degree} = {count}")?;
        }
        if self.max_degree > 0 {
            let c = combinatorics(self.max_degree.min(64) as u32)?;
            writeln!(out, "max_tuple.subset_tuples = {}", c.subset_tuples)?;
            writeln!(out, "max_tuple.subset_sentences = {}", c.subset_sentences)?;
        }
        for (domain, count) in &self.domains {
            writeln!(out, "domain.{domain} = {count}")?;
        }
        Ok(())
    }

    /// CSV with header `lang,bucket,count` for plotting.
    pub fn write_parallelism_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lang", "bucket", "count"])?;
        for (lang, span) in &self.parallelism.languages {
            for (b, count) in span.buckets.iter().enumerate() {
                w.write_record([lang.as_str(), &bucket_label(b), &count.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with header `domain,talks`.
    pub fn write_domain_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["domain", "talks"])?;
        for (domain, count) in &self.domains {
            w.write_record([domain.as_str(), &count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
