//! Token-budgeted pretraining datasets drawn from an aligned corpus.
//!
//! Each example is one tuple restricted to a language subset and serialised
//! as `"<lang>: <text>"` lines in ascending language order. Eligible tuples are
//! visited in a seeded random order and examples are appended until the
//! running token total reaches the budget; the example that crosses the
//! budget is kept, so the overshoot is bounded by one example.
//!
//! Token counts cover the member sentences only, not the `lang: ` prefixes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{AlignedTuple, TimeInterval};
use crate::error::{Error, Result};
use crate::ingest::DomainIndex;
use crate::rng::{derive_seed, SeededRng};

pub const PIVOT_LANGUAGE: &str = "en";

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{00A1}' | '\u{00AB}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
            | '\u{060C}' | '\u{061B}' | '\u{061F}' | '\u{06D4}'
            | '\u{0964}' | '\u{0965}'
            | '\u{2010}'..='\u{205E}'
            | '\u{3001}'..='\u{3003}' | '\u{3008}'..='\u{3011}'
            | '\u{FF01}'..='\u{FF0F}' | '\u{FF1A}'..='\u{FF20}'
            | '\u{FF3B}'..='\u{FF40}' | '\u{FF5B}'..='\u{FF65}')
}

/// Built-in token rule: maximal runs of non-whitespace, with every
/// punctuation character split off as its own token.
pub fn count_tokens(text: &str) -> u64 {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            in_word = false;
        } else if is_punctuation(c) {
            count += 1;
            in_word = false;
        } else if !in_word {
            count += 1;
            in_word = true;
        }
    }
    count
}

/// Token counts computed elsewhere (e.g. by a model tokenizer), keyed by
/// talk, anchor start and language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrecountedTokens {
    counts: BTreeMap<(String, i64, String), u64>,
}

#[derive(Deserialize)]
struct PrecountedRow {
    talk_id: String,
    start_ms: i64,
    lang: String,
    tokens: u64,
}

impl PrecountedTokens {
    pub fn insert(&mut self, talk_id: &str, start_ms: i64, lang: &str, tokens: u64) {
        self.counts
            .insert((talk_id.to_string(), start_ms, lang.to_string()), tokens);
    }

    pub fn get(&self, talk_id: &str, start_ms: i64, lang: &str) -> Option<u64> {
        self.counts
            .get(&(talk_id.to_string(), start_ms, lang.to_string()))
            .copied()
    }

    /// JSON-lines `{"talk_id", "start_ms", "lang", "tokens"}`.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut table = PrecountedTokens::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: PrecountedRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            table.insert(&row.talk_id, row.start_ms, &row.lang, row.tokens);
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Tokenizer<'a> {
    Builtin,
    Precounted(&'a PrecountedTokens),
}

impl<'a> Tokenizer<'a> {
    pub fn from_id(id: &str, table: Option<&'a PrecountedTokens>) -> Result<Self> {
        match (id, table) {
            ("builtin", _) => Ok(Tokenizer::Builtin),
            ("precounted", Some(t)) => Ok(Tokenizer::Precounted(t)),
            ("precounted", None) => Err(Error::Config(
                "tokenizer \"precounted\" needs a token-count table".into(),
            )),
            (other, _) => Err(Error::Config(format!("unknown tokenizer policy {other:?}"))),
        }
    }

    fn count_member(&self, tuple: &AlignedTuple, lang: &str) -> Result<u64> {
        match self {
            Tokenizer::Builtin => Ok(count_tokens(&tuple.members[lang])),
            Tokenizer::Precounted(table) => table.get(&tuple.talk_id, tuple.anchor.start_ms, lang).ok_or_else(|| {
                Error::Contract(format!(
                    "no precounted tokens for {} @{} [{lang}]",
                    tuple.talk_id, tuple.anchor.start_ms
                ))
            }),
        }
    }
}

/// `"<lang>: <text>\n"` per language, ascending code order.
pub fn serialize_example<S: AsRef<str>>(tuple: &AlignedTuple, langs: &[S]) -> Result<String> {
    if langs.is_empty() {
        return Err(Error::Contract("example needs at least one language".into()));
    }
    let sorted: BTreeSet<&str> = langs.iter().map(AsRef::as_ref).collect();
    let mut out = String::new();
    for lang in sorted {
        let text = tuple.members.get(lang).ok_or_else(|| {
            Error::Contract(format!(
                "language {lang} not in tuple {} @{}",
                tuple.talk_id, tuple.anchor.start_ms
            ))
        })?;
        out.push_str(lang);
        out.push_str(": ");
        out.push_str(text);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnglishPolicy {
    Require,
    Forbid,
    #[default]
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub token_budget: u64,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub language_set: Option<BTreeSet<String>>,
    #[serde(default)]
    pub include_english: EnglishPolicy,
    #[serde(default)]
    pub domains: Option<BTreeSet<String>>,
    pub seed: u64,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    /// Start another pass over the pool when it runs out before the budget.
    #[serde(default)]
    pub allow_repeat: bool,
}

fn default_tokenizer() -> String {
    "builtin".to_string()
}

impl SampleSpec {
    pub fn new(token_budget: u64, seed: u64) -> Self {
        SampleSpec {
            token_budget,
            degree: None,
            language_set: None,
            include_english: EnglishPolicy::Free,
            domains: None,
            seed,
            tokenizer: default_tokenizer(),
            allow_repeat: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.token_budget < 1 {
            return Err(Error::Config("token_budget must be at least 1".into()));
        }
        if self.degree == Some(0) {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        if self.include_english == EnglishPolicy::Require {
            if let Some(set) = &self.language_set {
                if !set.contains(PIVOT_LANGUAGE) {
                    return Err(Error::Config(format!(
                        "include_english=require but language_set lacks {PIVOT_LANGUAGE:?}"
                    )));
                }
            }
            if self.degree == Some(1) {
                log::debug!("degree 1 with include_english=require yields English-only examples");
            }
        }
        Ok(())
    }
}

/// Extra inputs some specs need: domain labels and external token counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleContext<'a> {
    pub domains: Option<&'a DomainIndex>,
    pub token_counts: Option<&'a PrecountedTokens>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub talk_id: String,
    pub anchor: TimeInterval,
    pub languages: Vec<String>,
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainDataset {
    pub spec: SampleSpec,
    pub examples: Vec<String>,
    pub manifest: Vec<ManifestEntry>,
    pub total_tokens: u64,
    /// Tokens missing from the budget when the eligible pool ran out.
    pub shortfall: Option<u64>,
}

impl PretrainDataset {
    /// Example blocks separated by a blank line.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, example) in self.examples.iter().enumerate() {
            if i > 0 {
                out.write_all(b"\n")?;
            }
            out.write_all(example.as_bytes())?;
        }
        Ok(())
    }

    /// First line `{"spec": ..., "total_tokens": ..., "examples": ...}`, then one
    /// entry per example.
    pub fn write_manifest<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "spec": self.spec,
            "examples": self.examples.len(),
            "total_tokens": self.total_tokens,
            "shortfall": self.shortfall,
        });
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for entry in &self.manifest {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Tuples whose talk carries at least one of `domains`.
pub fn filter_by_domain(corpus: &[AlignedTuple], domains: &BTreeSet<String>, index: &DomainIndex) -> Vec<AlignedTuple> {
    corpus
        .iter()
        .filter(|t| {
            index
                .labels(&t.talk_id)
                .is_some_and(|labels| !labels.is_disjoint(domains))
        })
        .cloned()
        .collect()
}

struct Candidate<'a> {
    tuple: &'a AlignedTuple,
    pool: Vec<&'a str>,
}

fn eligible<'a>(corpus: &'a [AlignedTuple], spec: &SampleSpec, ctx: &SampleContext) -> Result<Vec<Candidate<'a>>> {
    if corpus.is_empty() {
        return Err(Error::infeasible("corpus", "corpus is empty"));
    }

    let mut tuples: Vec<&AlignedTuple> = corpus.iter().collect();
    if let Some(domains) = &spec.domains {
        let index = ctx
            .domains
            .ok_or_else(|| Error::Config("domain filter requested without talk domain labels".into()))?;
        tuples.retain(|t| {
            index
                .labels(&t.talk_id)
                .is_some_and(|labels| !labels.is_disjoint(domains))
        });
        if tuples.is_empty() {
            return Err(Error::infeasible(
                "domains",
                format!("no tuple comes from a talk labelled {domains:?}"),
            ));
        }
    }

    let mut candidates: Vec<Candidate> = tuples
        .into_iter()
        .map(|t| Candidate {
            tuple: t,
            pool: t
                .languages()
                .filter(|l| spec.language_set.as_ref().is_none_or(|s| s.contains(*l)))
                .collect(),
        })
        .filter(|c| !c.pool.is_empty())
        .collect();
    if candidates.is_empty() {
        return Err(Error::infeasible(
            "language_set",
            "no tuple contains a language from the language set",
        ));
    }

    match spec.include_english {
        EnglishPolicy::Free => {}
        EnglishPolicy::Require => {
            candidates.retain(|c| c.pool.contains(&PIVOT_LANGUAGE));
        }
        EnglishPolicy::Forbid => {
            for c in &mut candidates {
                c.pool.retain(|l| *l != PIVOT_LANGUAGE);
            }
            candidates.retain(|c| !c.pool.is_empty());
        }
    }
    if candidates.is_empty() {
        return Err(Error::infeasible(
            "include_english",
            format!("no tuple satisfies include_english={:?}", spec.include_english),
        ));
    }

    if let Some(d) = spec.degree {
        candidates.retain(|c| c.pool.len() >= d);
        if candidates.is_empty() {
            return Err(Error::infeasible(
                "degree",
                format!("no tuple has {d} languages in the allowed pool"),
            ));
        }
    }
    Ok(candidates)
}

fn draw_languages<'a>(c: &Candidate<'a>, spec: &SampleSpec, rng: &mut SeededRng) -> Vec<&'a str> {
    let Some(d) = spec.degree else {
        return c.pool.clone();
    };
    let mut chosen = Vec::with_capacity(d);
    let others: Vec<&str> = if spec.include_english == EnglishPolicy::Require {
        chosen.push(PIVOT_LANGUAGE);
        c.pool.iter().copied().filter(|l| *l != PIVOT_LANGUAGE).collect()
    } else {
        c.pool.clone()
    };
    let need = d - chosen.len();
    for i in rng.choose_indices(others.len(), need) {
        chosen.push(others[i]);
    }
    chosen.sort_unstable();
    chosen
}

pub fn sample_pretrain(corpus: &[AlignedTuple], spec: &SampleSpec, ctx: &SampleContext) -> Result<PretrainDataset> {
    spec.validate()?;
    let tokenizer = Tokenizer::from_id(&spec.tokenizer, ctx.token_counts)?;
    let candidates = eligible(corpus, spec, ctx)?;

    let mut rng = SeededRng::new(spec.seed);
    let mut dataset = PretrainDataset {
        spec: spec.clone(),
        examples: Vec::new(),
        manifest: Vec::new(),
        total_tokens: 0,
        shortfall: None,
    };

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    'passes: loop {
        rng.shuffle(&mut order);
        let before = dataset.total_tokens;
        for &i in &order {
            let c = &candidates[i];
            let langs = draw_languages(c, spec, &mut rng);
            let mut tokens = 0;
            for lang in &langs {
                tokens += tokenizer.count_member(c.tuple, lang)?;
            }
            dataset.examples.push(serialize_example(c.tuple, &langs)?);
            dataset.manifest.push(ManifestEntry {
                talk_id: c.tuple.talk_id.clone(),
                anchor: c.tuple.anchor,
                languages: langs.iter().map(|l| l.to_string()).collect(),
                token_count: tokens,
            });
            dataset.total_tokens += tokens;
            if dataset.total_tokens >= spec.token_budget {
                break 'passes;
            }
        }
        if !spec.allow_repeat || dataset.total_tokens == before {
            let missing = spec.token_budget - dataset.total_tokens;
            log::warn!(
                "eligible pool exhausted {missing} tokens short of the {} token budget",
                spec.token_budget
            );
            dataset.shortfall = Some(missing);
            break;
        }
    }
    Ok(dataset)
}

/// One dataset per budget; dataset `i` uses seed `derive_seed(base.seed, i)`.
pub fn size_sweep(
    corpus: &[AlignedTuple],
    budgets: &[u64],
    base: &SampleSpec,
    ctx: &SampleContext,
) -> Result<Vec<PretrainDataset>> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("budgets must be ascending, got {budgets:?}")));
    }
    budgets
        .iter()
        .enumerate()
        .map(|(i, &budget)| {
            let spec = SampleSpec {
                token_budget: budget,
                seed: derive_seed(base.seed, i as u64),
                ..base.clone()
            };
            sample_pretrain(corpus, &spec, ctx)
        })
        .collect()
}

/// A named language group shipped as a JSON file `{"name", "languages"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePreset {
    pub name: String,
    pub languages: Vec<String>,
}

impl LanguagePreset {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let preset: LanguagePreset = serde_json::from_str(&text)?;
        if preset.languages.is_empty() {
            return Err(Error::Config(format!("preset {} lists no languages", preset.name)));
        }
        Ok(preset)
    }

    pub fn language_set(&self) -> BTreeSet<String> {
        self.languages.iter().cloned().collect()
    }
}
