//! Instruction-tuning examples for four objectives: machine translation (MT),
//! cross-lingual text similarity (CLTS), multilingual text classification
//! (MTC) and cross-lingual paraphrasing (CLP).
//!
//! Prompts follow fixed templates; `templates/*.txt` holds the skeleton of
//! each one. A sentence line is always `"{lang} Sentence: {text}.\n"`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::align::{AlignedTuple, TimeInterval};
use crate::error::{Error, Result};
use crate::ingest::DomainIndex;
use crate::rng::{derive_seed, SeededRng};

const CLTS_HEADER: &str = "Given the sentences below in different languages, rate how similar their meanings are on a scale of 0 to 1, where 0 means completely dissimilar and 1 means identical meanings.\n";

/// Slot names used by the templates; none may survive instantiation.
pub const SLOT_NAMES: &[&str] = &[
    "src_lang",
    "tgt_lang",
    "src_txt",
    "tgt_txt",
    "lang",
    "txt",
    "sim_score",
    "domain_list",
    "target_domain",
    "src_lang_1",
    "src_lang_2",
    "src_lang_m",
    "tgt_lang_1",
    "tgt_lang_2",
    "tgt_lang_n",
    "src_txt_1",
    "src_txt_2",
    "src_txt_m",
    "tgt_txt_1",
    "tgt_txt_2",
    "tgt_txt_n",
    "lang_1",
    "lang_2",
    "lang_m",
    "txt_1",
    "txt_2",
    "txt_m",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "MT")]
    Mt,
    #[serde(rename = "CLTS")]
    Clts,
    #[serde(rename = "MTC")]
    Mtc,
    #[serde(rename = "CLP")]
    Clp,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Mt, Task::Clts, Task::Mtc, Task::Clp];

    pub fn name(self) -> &'static str {
        match self {
            Task::Mt => "MT",
            Task::Clts => "CLTS",
            Task::Mtc => "MTC",
            Task::Clp => "CLP",
        }
    }

    pub fn parse(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a CLTS negative's swapped-in sentence came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub lang: String,
    pub talk_id: String,
    pub anchor: TimeInterval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub talk_id: String,
    pub anchor: TimeInterval,
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced: Option<Replacement>,
}

impl Provenance {
    fn of(tuple: &AlignedTuple, languages: &[&str]) -> Self {
        Provenance {
            talk_id: tuple.talk_id.clone(),
            anchor: tuple.anchor,
            languages: languages.iter().map(|l| l.to_string()).collect(),
            replaced: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructExample {
    pub task: Task,
    pub prompt: String,
    pub completion: String,
    pub provenance: Provenance,
}

fn sentence_line(out: &mut String, lang: &str, text: &str) {
    out.push_str(lang);
    out.push_str(" Sentence: ");
    out.push_str(text);
    out.push_str(".\n");
}

/// Up to `max` member languages, drawn seeded, returned sorted.
fn pick_languages<'a>(tuple: &'a AlignedTuple, max: Option<usize>, rng: &mut SeededRng) -> Vec<&'a str> {
    let all: Vec<&str> = tuple.languages().collect();
    let mut picked: Vec<&str> = match max {
        Some(k) if k < all.len() => rng.choose_indices(all.len(), k).into_iter().map(|i| all[i]).collect(),
        _ => all,
    };
    picked.sort_unstable();
    picked
}

pub fn gen_mt(tuple: &AlignedTuple, sources: usize, targets: usize, rng: &mut SeededRng) -> Result<InstructExample> {
    if sources < 1 || targets < 1 {
        return Err(Error::Config(
            "MT needs at least one source and one target language".into(),
        ));
    }
    if tuple.degree() < sources + targets {
        return Err(Error::infeasible(
            "MT",
            format!("tuple has {} languages, need {}", tuple.degree(), sources + targets),
        ));
    }
    let all: Vec<&str> = tuple.languages().collect();
    let drawn: Vec<&str> = rng
        .choose_indices(all.len(), sources + targets)
        .into_iter()
        .map(|i| all[i])
        .collect();
    let mut src = drawn[..sources].to_vec();
    let mut tgt = drawn[sources..].to_vec();
    src.sort_unstable();
    tgt.sort_unstable();

    let mut prompt = format!(
        "Translate the following {} sentence to {}.\n",
        src.join(", "),
        tgt.join(", ")
    );
    for lang in &src {
        sentence_line(&mut prompt, lang, &tuple.members[*lang]);
    }
    prompt.push_str("Translation:\n");
    let mut completion = String::new();
    for lang in &tgt {
        sentence_line(&mut completion, lang, &tuple.members[*lang]);
    }

    let mut langs = src;
    langs.extend(tgt);
    Ok(InstructExample {
        task: Task::Mt,
        prompt,
        completion,
        provenance: Provenance::of(tuple, &langs),
    })
}

pub fn gen_clp(tuple: &AlignedTuple, rng: &mut SeededRng) -> Result<InstructExample> {
    if tuple.degree() < 2 {
        return Err(Error::infeasible("CLP", "tuple has a single language"));
    }
    let all: Vec<&str> = tuple.languages().collect();
    let drawn = rng.choose_indices(all.len(), 2);
    let (src, tgt) = (all[drawn[0]], all[drawn[1]]);

    let mut prompt = format!("Paraphrase the following {src} sentence in {tgt}.\n");
    sentence_line(&mut prompt, src, &tuple.members[src]);
    prompt.push_str("Paraphrasing:\n");
    let completion = format!("{tgt} Sentence: {}.", tuple.members[tgt]);
    Ok(InstructExample {
        task: Task::Clp,
        prompt,
        completion,
        provenance: Provenance::of(tuple, &[src, tgt]),
    })
}

fn clts_example(lines: &[(&str, &str)], similar: bool, provenance: Provenance) -> InstructExample {
    let mut prompt = CLTS_HEADER.to_string();
    for (lang, text) in lines {
        sentence_line(&mut prompt, lang, text);
    }
    let score = if similar { "1.0" } else { "0.0" };
    InstructExample {
        task: Task::Clts,
        prompt,
        completion: format!("Similarity: {score}."),
        provenance,
    }
}

pub fn clts_positive(tuple: &AlignedTuple, max_langs: Option<usize>, rng: &mut SeededRng) -> Result<InstructExample> {
    if tuple.degree() < 2 {
        return Err(Error::infeasible("CLTS", "tuple has a single language"));
    }
    let langs = pick_languages(tuple, max_langs, rng);
    let lines: Vec<(&str, &str)> = langs.iter().map(|l| (*l, tuple.members[*l].as_str())).collect();
    Ok(clts_example(&lines, true, Provenance::of(tuple, &langs)))
}

/// Positive from `corpus[base]` with one sentence swapped for the same
/// language's sentence from another tuple. `None` if no swap is possible.
pub fn clts_negative(
    corpus: &[AlignedTuple],
    base: usize,
    max_langs: Option<usize>,
    rng: &mut SeededRng,
) -> Result<Option<InstructExample>> {
    let tuple = &corpus[base];
    if tuple.degree() < 2 {
        return Err(Error::infeasible("CLTS", "tuple has a single language"));
    }
    let langs = pick_languages(tuple, max_langs, rng);
    let start = rng.below(langs.len());
    for offset in 0..langs.len() {
        let slot = (start + offset) % langs.len();
        let lang = langs[slot];
        let original = tuple.members[lang].as_str();
        let donors: Vec<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(j, t)| *j != base && t.members.get(lang).is_some_and(|s| s != original))
            .map(|(j, _)| j)
            .collect();
        if donors.is_empty() {
            continue;
        }
        let donor = &corpus[donors[rng.below(donors.len())]];
        let lines: Vec<(&str, &str)> = langs
            .iter()
            .map(|l| {
                let text = if *l == lang {
                    &donor.members[lang]
                } else {
                    &tuple.members[*l]
                };
                (*l, text.as_str())
            })
            .collect();
        let mut provenance = Provenance::of(tuple, &langs);
        provenance.replaced = Some(Replacement {
            lang: lang.to_string(),
            talk_id: donor.talk_id.clone(),
            anchor: donor.anchor,
        });
        return Ok(Some(clts_example(&lines, false, provenance)));
    }
    Ok(None)
}

#[derive(Debug, Clone, Default)]
pub struct GenReport {
    pub examples: Vec<InstructExample>,
    /// Tuples or negatives that could not be generated, with the reason.
    pub skipped: Vec<String>,
}

/// One positive per multi-language tuple, followed by its share of
/// negatives so the negative:positive ratio tracks `negative_ratio`.
pub fn gen_clts(
    corpus: &[AlignedTuple],
    negative_ratio: f64,
    max_langs: Option<usize>,
    rng: &mut SeededRng,
) -> Result<GenReport> {
    if !(negative_ratio >= 0.0 && negative_ratio.is_finite()) {
        return Err(Error::Config(format!(
            "negative_ratio must be >= 0, got {negative_ratio}"
        )));
    }
    let mut report = GenReport::default();
    if corpus.len() < 2 && negative_ratio > 0.0 {
        log::warn!("CLTS: fewer than two tuples, generating positives only");
        report.skipped.push("corpus too small for negatives".into());
    }
    let mut positives = 0usize;
    for (i, tuple) in corpus.iter().enumerate() {
        if tuple.degree() < 2 {
            report
                .skipped
                .push(format!("{} @{}: single language", tuple.talk_id, tuple.anchor.start_ms));
            continue;
        }
        report.examples.push(clts_positive(tuple, max_langs, rng)?);
        let due = ((positives + 1) as f64 * negative_ratio).floor() - (positives as f64 * negative_ratio).floor();
        positives += 1;
        if corpus.len() < 2 {
            continue;
        }
        for _ in 0..due as usize {
            match clts_negative(corpus, i, max_langs, rng)? {
                Some(ex) => report.examples.push(ex),
                None => report.skipped.push(format!(
                    "{} @{}: no replacement sentence available",
                    tuple.talk_id, tuple.anchor.start_ms
                )),
            }
        }
    }
    Ok(report)
}

pub fn gen_mtc(
    tuple: &AlignedTuple,
    labels: &BTreeSet<String>,
    domain_pool: &BTreeSet<String>,
    k_choices: usize,
    max_langs: Option<usize>,
    rng: &mut SeededRng,
) -> Result<InstructExample> {
    if k_choices < 1 || k_choices > domain_pool.len() {
        return Err(Error::Config(format!(
            "k_choices={k_choices} needs 1..={} domain labels",
            domain_pool.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::infeasible(
            "MTC",
            format!("talk {} has no domain label", tuple.talk_id),
        ));
    }
    let own: Vec<&String> = labels.iter().collect();
    let target = own[rng.below(own.len())];
    let distractors: Vec<&String> = domain_pool.iter().filter(|d| *d != target).collect();
    let mut choices: Vec<&str> = rng
        .choose_indices(distractors.len(), k_choices - 1)
        .into_iter()
        .map(|i| distractors[i].as_str())
        .collect();
    choices.push(target);
    rng.shuffle(&mut choices);

    let langs = pick_languages(tuple, max_langs, rng);
    let mut prompt = format!(
        "Classify the following sentence in {} into one of the following categories: {}.\n",
        langs.join(", "),
        choices.join(", ")
    );
    for lang in &langs {
        sentence_line(&mut prompt, lang, &tuple.members[*lang]);
    }
    Ok(InstructExample {
        task: Task::Mtc,
        prompt,
        completion: format!("Categories: {target}."),
        provenance: Provenance::of(tuple, &langs),
    })
}

/// Knobs shared by the generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    pub mt_sources: usize,
    pub mt_targets: usize,
    pub k_choices: usize,
    pub negative_ratio: f64,
    /// Cap on languages listed in CLTS / MTC prompts; all members when unset.
    pub max_langs: Option<usize>,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            mt_sources: 1,
            mt_targets: 1,
            k_choices: 5,
            negative_ratio: 1.0,
            max_langs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub tasks: Vec<Task>,
    /// Per-task weights aligned with `tasks`; uniform when unset.
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
    pub example_budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub options: GenOptions,
}

impl MixSpec {
    fn weights(&self) -> Result<Vec<f64>> {
        if self.tasks.is_empty() {
            return Err(Error::Config("MixSpec.tasks is empty".into()));
        }
        match &self.ratios {
            None => Ok(vec![1.0; self.tasks.len()]),
            Some(r) if r.len() != self.tasks.len() => Err(Error::Config(format!(
                "{} ratios for {} tasks",
                r.len(),
                self.tasks.len()
            ))),
            Some(r) if r.iter().any(|w| !(*w > 0.0 && w.is_finite())) => {
                Err(Error::Config("task ratios must be positive".into()))
            }
            Some(r) => Ok(r.clone()),
        }
    }
}

/// Draws `example_budget` examples, each with its own seed
/// `derive_seed(seed, index)`: the task by weight, then a feasible tuple
/// uniformly, then the task's own seeded choices.
pub fn mix_tasks(
    corpus: &[AlignedTuple],
    domains: Option<&DomainIndex>,
    spec: &MixSpec,
) -> Result<Vec<InstructExample>> {
    let weights = spec.weights()?;
    let opts = &spec.options;
    let pool = domains.map(DomainIndex::all_labels).unwrap_or_default();

    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(spec.tasks.len());
    for task in &spec.tasks {
        let idx: Vec<usize> = match task {
            Task::Mt => {
                if opts.mt_sources < 1 || opts.mt_targets < 1 {
                    return Err(Error::Config("MT needs mt_sources and mt_targets >= 1".into()));
                }
                let need = opts.mt_sources + opts.mt_targets;
                (0..corpus.len()).filter(|&i| corpus[i].degree() >= need).collect()
            }
            Task::Clp | Task::Clts => (0..corpus.len()).filter(|&i| corpus[i].degree() >= 2).collect(),
            Task::Mtc => {
                if opts.k_choices < 1 || opts.k_choices > pool.len() {
                    return Err(Error::Config(format!(
                        "MTC: k_choices={} but only {} domain labels observed",
                        opts.k_choices,
                        pool.len()
                    )));
                }
                let index = domains.expect("non-empty pool implies an index");
                (0..corpus.len())
                    .filter(|&i| index.labels(&corpus[i].talk_id).is_some_and(|l| !l.is_empty()))
                    .collect()
            }
        };
        if idx.is_empty() {
            return Err(Error::infeasible(
                task.name(),
                "no tuple in the corpus supports this task",
            ));
        }
        candidates.push(idx);
    }
    if spec.tasks.contains(&Task::Clts) && corpus.len() < 2 && opts.negative_ratio > 0.0 {
        log::warn!("CLTS: fewer than two tuples, generating positives only");
    }

    let p_negative = opts.negative_ratio / (1.0 + opts.negative_ratio);
    let mut out = Vec::with_capacity(spec.example_budget);
    for i in 0..spec.example_budget {
        let mut rng = SeededRng::new(derive_seed(spec.seed, i as u64));
        let slot = rng.weighted(&weights);
        let pick = candidates[slot][rng.below(candidates[slot].len())];
        let tuple = &corpus[pick];
        let example = match spec.tasks[slot] {
            Task::Mt => gen_mt(tuple, opts.mt_sources, opts.mt_targets, &mut rng)?,
            Task::Clp => gen_clp(tuple, &mut rng)?,
            Task::Clts => {
                let negative = rng.unit() < p_negative;
                let neg = if negative {
                    clts_negative(corpus, pick, opts.max_langs, &mut rng)?
                } else {
                    None
                };
                match neg {
                    Some(ex) => ex,
                    None => clts_positive(tuple, opts.max_langs, &mut rng)?,
                }
            }
            Task::Mtc => {
                let labels = domains
                    .and_then(|d| d.labels(&tuple.talk_id))
                    .expect("candidate filtered on labels");
                gen_mtc(tuple, labels, &pool, opts.k_choices, opts.max_langs, &mut rng)?
            }
        };
        out.push(example);
    }
    Ok(out)
}

/// JSON-lines `{"task", "prompt", "completion", "provenance"}`.
pub fn write_jsonl<W: Write>(examples: &[InstructExample], mut out: W) -> Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut out, ex)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(talk: &str, start: i64, members: &[(&str, &str)]) -> AlignedTuple {
        AlignedTuple {
            talk_id: talk.into(),
            anchor: TimeInterval::new(start, start + 10),
            members: members.iter().map(|(l, t)| (l.to_string(), t.to_string())).collect(),
        }
    }

    fn labels(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mt_single_pair() {
        let t = tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]);
        let mut rng = SeededRng::new(0);
        // draw until en is the source
        let ex = (0..)
            .map(|_| gen_mt(&t, 1, 1, &mut rng).unwrap())
            .find(|e| e.prompt.starts_with("Translate the following en"))
            .unwrap();
        assert_eq!(
            ex.prompt,
            "Translate the following en sentence to fr.\nen Sentence: Hi.\nTranslation:\n"
        );
        assert_eq!(ex.completion, "fr Sentence: Salut.\n");
    }

    #[test]
    fn mt_two_sources() {
        let t = tuple("t", 0, &[("de", "Hallo"), ("en", "Hi"), ("fr", "Salut")]);
        let ex = gen_mt(&t, 2, 1, &mut SeededRng::new(4)).unwrap();
        let (head, _) = ex.prompt.split_once("Translation:\n").unwrap();
        assert_eq!(head.matches(" Sentence: ").count(), 2);
        assert_eq!(ex.completion.matches(" Sentence: ").count(), 1);
        assert!(ex.prompt.ends_with("Translation:\n"));
    }

    #[test]
    fn mt_needs_enough_languages() {
        let t = tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]);
        assert!(matches!(
            gen_mt(&t, 2, 1, &mut SeededRng::new(0)),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn clp_uses_both_languages_of_a_pair() {
        let t = tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]);
        let ex = gen_clp(&t, &mut SeededRng::new(1)).unwrap();
        let mut langs = ex.provenance.languages.clone();
        langs.sort();
        assert_eq!(langs, vec!["en", "fr"]);
        assert!(ex.prompt.ends_with("Paraphrasing:\n"));
        assert!(!ex.prompt.contains('{'));
        assert!(!ex.completion.ends_with('\n'));
        assert!(gen_clp(&tuple("t", 0, &[("en", "Hi")]), &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn clp_is_seeded() {
        let t = tuple("t", 0, &[("a", "1"), ("b", "2"), ("c", "3"), ("d", "4"), ("e", "5")]);
        let a = gen_clp(&t, &mut SeededRng::new(77)).unwrap();
        let b = gen_clp(&t, &mut SeededRng::new(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clts_counts() {
        let one = vec![tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")])];
        let r = gen_clts(&one, 0.0, None, &mut SeededRng::new(0)).unwrap();
        assert_eq!(r.examples.len(), 1);
        assert_eq!(r.examples[0].completion, "Similarity: 1.0.");

        let two = vec![
            tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]),
            tuple("t", 10, &[("en", "Bye"), ("fr", "Au revoir")]),
        ];
        let r = gen_clts(&two, 1.0, None, &mut SeededRng::new(0)).unwrap();
        let pos = r.examples.iter().filter(|e| e.completion == "Similarity: 1.0.").count();
        let neg = r.examples.iter().filter(|e| e.completion == "Similarity: 0.0.").count();
        assert_eq!((pos, neg), (2, 2));
        for e in r.examples.iter().filter(|e| e.provenance.replaced.is_some()) {
            let rep = e.provenance.replaced.as_ref().unwrap();
            let base = two.iter().find(|t| t.anchor == e.provenance.anchor).unwrap();
            assert!(!e
                .prompt
                .contains(&format!("{} Sentence: {}.", rep.lang, base.members[&rep.lang])));
        }
    }

    #[test]
    fn clts_single_tuple_warns() {
        let one = vec![tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")])];
        let r = gen_clts(&one, 1.0, None, &mut SeededRng::new(0)).unwrap();
        assert_eq!(r.examples.len(), 1);
        assert!(!r.skipped.is_empty());
    }

    #[test]
    fn mtc_whole_pool_when_k_equals_pool() {
        let t = tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]);
        let pool = labels(&["art", "business", "education", "health", "science"]);
        let ex = gen_mtc(&t, &labels(&["science"]), &pool, 5, None, &mut SeededRng::new(3)).unwrap();
        let list = ex
            .prompt
            .split("categories: ")
            .nth(1)
            .unwrap()
            .split(".\n")
            .next()
            .unwrap();
        let listed: BTreeSet<String> = list.split(", ").map(String::from).collect();
        assert_eq!(listed, pool);
        assert_eq!(ex.completion, "Categories: science.");
        assert!(matches!(
            gen_mtc(&t, &labels(&["science"]), &pool, 6, None, &mut SeededRng::new(3)),
            Err(Error::Config(_))
        ));
        assert!(gen_mtc(&t, &labels(&[]), &pool, 3, None, &mut SeededRng::new(3)).is_err());
    }

    #[test]
    fn mtc_true_label_always_listed() {
        let t = tuple("t", 0, &[("en", "Hi")]);
        let pool: BTreeSet<String> = (0..20).map(|i| format!("d{i:02}")).collect();
        let own = labels(&["d03", "d17"]);
        for seed in 0..1000 {
            let ex = gen_mtc(&t, &own, &pool, 5, None, &mut SeededRng::new(seed)).unwrap();
            let target = ex.completion.trim_start_matches("Categories: ").trim_end_matches('.');
            let list = ex
                .prompt
                .split("categories: ")
                .nth(1)
                .unwrap()
                .split(".\n")
                .next()
                .unwrap();
            let listed: Vec<&str> = list.split(", ").collect();
            assert_eq!(listed.len(), 5);
            assert!(listed.contains(&target));
            assert!(own.contains(target));
        }
    }

    #[test]
    fn mix_budget_and_balance() {
        let corpus: Vec<_> = (0..20)
            .map(|i| tuple("t", i * 10, &[("en", "a"), ("fr", "b"), ("es", "c")]))
            .collect();
        let spec = MixSpec {
            tasks: vec![Task::Mt],
            ratios: None,
            example_budget: 10,
            seed: 1,
            options: GenOptions::default(),
        };
        let out = mix_tasks(&corpus, None, &spec).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|e| e.task == Task::Mt));

        let spec = MixSpec {
            tasks: vec![Task::Mt, Task::Clp],
            example_budget: 1000,
            ..spec
        };
        let out = mix_tasks(&corpus, None, &spec).unwrap();
        let mt = out.iter().filter(|e| e.task == Task::Mt).count();
        assert!((450..=550).contains(&mt), "MT count {mt}");
        // interleaved, not blocked
        assert!(out[..50].iter().any(|e| e.task == Task::Clp));

        let spec = MixSpec {
            example_budget: 0,
            ..spec
        };
        assert!(mix_tasks(&corpus, None, &spec).unwrap().is_empty());
    }

    #[test]
    fn mix_names_infeasible_task() {
        let corpus = vec![tuple("t", 0, &[("en", "a")])];
        let spec = MixSpec {
            tasks: vec![Task::Clp],
            ratios: None,
            example_budget: 3,
            seed: 1,
            options: GenOptions::default(),
        };
        match mix_tasks(&corpus, None, &spec) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, "CLP"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_shape() {
        let t = tuple("t", 0, &[("en", "Hi"), ("fr", "Salut")]);
        let ex = gen_clp(&t, &mut SeededRng::new(0)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&[ex], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["task"], "CLP");
        assert!(v["provenance"]["talk_id"].is_string());
        assert!(v["provenance"].get("replaced").is_none());
    }
}
