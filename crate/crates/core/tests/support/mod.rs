//! Brute-force oracles and random fixtures shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use weave::instruct::{InstructExample, Task};
use weave::rng::SeededRng;
use weave::{AlignedTuple, Segment, Talk, TimeInterval};

// ---------------------------------------------------------------- matrices

pub fn random_matrix(rng: &mut SeededRng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| 2.0 * rng.unit() - 1.0)
}

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal(rng: &mut SeededRng, d: usize) -> DMatrix<f64> {
    random_matrix(rng, d, d).qr().q()
}

/// Invertible and reasonably conditioned: diagonally dominant.
pub fn random_invertible(rng: &mut SeededRng, d: usize) -> DMatrix<f64> {
    random_matrix(rng, d, d) + DMatrix::identity(d, d) * (d as f64 + 1.0)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

pub fn cosine_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (xr, yr) = (rows(x), rows(y));
    xr.iter().zip(&yr).map(|(a, b)| cos(a, b)).sum::<f64>() / xr.len() as f64
}

/// HSIC form: tr(KHLH) / sqrt(tr(KHKH) tr(LHLH)) with K = XXᵀ, L = YYᵀ and
/// the explicit centring matrix H = I - 11ᵀ/n.
pub fn cka_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let k = x * x.transpose();
    let l = y * y.transpose();
    let hsic = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a * &h * b * &h).trace();
    hsic(&k, &l) / (hsic(&k, &k) * hsic(&l, &l)).sqrt()
}

/// Ranks every candidate by explicit sort on (-similarity, index).
pub fn retrieval_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize) -> f64 {
    let (xr, yr) = (rows(x), rows(y));
    let one_way = |q: &[Vec<f64>], c: &[Vec<f64>]| {
        let n = q.len();
        let mut hits = 0;
        for (i, qi) in q.iter().enumerate() {
            let mut ranked: Vec<(f64, usize)> = c.iter().enumerate().map(|(j, cj)| (cos(qi, cj), j)).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            if ranked[..k].iter().any(|&(_, j)| j == i) {
                hits += 1;
            }
        }
        hits as f64 / n as f64
    };
    0.5 * (one_way(&xr, &yr) + one_way(&yr, &xr))
}

fn centred(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - m.column(j).sum() / n)
}

/// Projection on the leading eigenvectors of XcᵀXc covering `keep` of the
/// eigenvalue mass; equals U_k Σ_k up to column signs.
fn eigen_reduce(m: &DMatrix<f64>, keep: f64) -> DMatrix<f64> {
    let xc = centred(m);
    let eig = (xc.transpose() * &xc).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    order.retain(|&i| eig.eigenvalues[i] > top * 1e-12);
    let total: f64 = order.iter().map(|&i| eig.eigenvalues[i]).sum();
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        kept.push(i);
        acc += eig.eigenvalues[i];
        if acc >= keep * total {
            break;
        }
    }
    let v = DMatrix::from_fn(m.ncols(), kept.len(), |r, c| eig.eigenvectors[(r, kept[c])]);
    xc * v
}

/// CCA through the generalised eigenproblem: with Σaa = LLᵀ, the squared
/// canonical correlations are the eigenvalues of L⁻¹ Σab Σbb⁻¹ Σba L⁻ᵀ.
pub fn svcca_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, keep: f64) -> f64 {
    let a = eigen_reduce(x, keep);
    let b = eigen_reduce(y, keep);
    let saa = a.transpose() * &a;
    let sbb = b.transpose() * &b;
    let sab = a.transpose() * &b;
    let l = saa.cholesky().expect("Σaa positive definite").l();
    let l_inv = l.try_inverse().expect("invertible factor");
    let sbb_inv = sbb.try_inverse().expect("Σbb invertible");
    let m = &l_inv * &sab * sbb_inv * sab.transpose() * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut rho: Vec<f64> = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt().min(1.0))
        .collect();
    rho.sort_by(|p, q| q.total_cmp(p));
    rho.truncate(a.ncols().min(b.ncols()));
    rho.iter().sum::<f64>() / rho.len() as f64
}

// ---------------------------------------------------------------- corpora

pub fn lang_codes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("l{i:02}")).collect()
}

/// `count` tuples over `langs`, each with a random non-empty member set and
/// sentences of 1..=12 words.
pub fn random_corpus(rng: &mut SeededRng, count: usize, langs: &[String], talks: usize) -> Vec<AlignedTuple> {
    (0..count)
        .map(|i| {
            let degree = 1 + rng.below(langs.len());
            let members = rng
                .choose_indices(langs.len(), degree)
                .into_iter()
                .map(|l| {
                    let words = 1 + rng.below(12);
                    let mut text = format!("s{i}");
                    for w in 1..words {
                        text.push_str(&format!(" w{w}"));
                    }
                    (langs[l].clone(), text)
                })
                .collect();
            AlignedTuple {
                talk_id: format!("t{}", i % talks.max(1)),
                anchor: TimeInterval::new(i as i64 * 1000, i as i64 * 1000 + 900),
                members,
            }
        })
        .collect()
}

/// One talk in every language of `langs`, so every tuple has full degree.
pub fn full_degree_corpus(count: usize, langs: &[String]) -> Vec<AlignedTuple> {
    (0..count)
        .map(|i| AlignedTuple {
            talk_id: format!("t{}", i / 50),
            anchor: TimeInterval::new(i as i64 * 1000, i as i64 * 1000 + 900),
            members: langs
                .iter()
                .map(|l| (l.clone(), format!("sentence {i} in {l} with a few words")))
                .collect(),
        })
        .collect()
}

/// A talk in several languages sharing a jittered base timeline, with the
/// expected grouping: for every base segment, the languages that carry it.
pub struct TimelineFixture {
    pub talks: Vec<Talk>,
    pub expected: BTreeSet<BTreeMap<String, String>>,
}

pub fn timeline_fixture(rng: &mut SeededRng, n_langs: usize, n_segments: usize) -> TimelineFixture {
    let mut base = Vec::new();
    let mut t = 0i64;
    for _ in 0..n_segments {
        t += 100 + rng.below(400) as i64;
        let len = 1000 + rng.below(3000) as i64;
        base.push((t, t + len));
        t += len;
    }
    let langs = lang_codes(n_langs);
    let mut talks = Vec::new();
    let mut groups: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); n_segments];
    for lang in &langs {
        let mut segments = Vec::new();
        for (s, &(start, end)) in base.iter().enumerate() {
            if rng.unit() < 0.25 {
                continue;
            }
            let jitter = |rng: &mut SeededRng| rng.below(41) as i64 - 20;
            let text = format!("{lang} segment {s}");
            segments.push(Segment {
                start_ms: start + jitter(rng),
                end_ms: end + jitter(rng),
                text: text.clone(),
            });
            groups[s].insert(lang.clone(), text);
        }
        talks.push(Talk {
            talk_id: "talk".into(),
            lang: lang.clone(),
            domains: vec![],
            segments,
        });
    }
    TimelineFixture {
        talks,
        expected: groups.into_iter().filter(|g| !g.is_empty()).collect(),
    }
}

// ---------------------------------------------------------------- templates

/// Rewrites a generated example back into its template skeleton by putting
/// slot names where the concrete languages, texts and labels were.
pub fn reduce_to_skeleton(ex: &InstructExample, corpus: &[AlignedTuple], domain_pool: &BTreeSet<String>) -> String {
    let find = |talk_id: &str, anchor: TimeInterval| {
        corpus
            .iter()
            .find(|t| t.talk_id == talk_id && t.anchor == anchor)
            .expect("provenance points into the corpus")
    };
    let tuple = find(&ex.provenance.talk_id, ex.provenance.anchor);
    let mut text = format!("{}{}", ex.prompt, ex.completion);
    let langs = &ex.provenance.languages;
    let mut slots: Vec<(String, String)> = Vec::new();
    let mut put = |value: &str, slot: String| slots.push((value.to_string(), format!("{{{slot}}}")));
    match ex.task {
        Task::Mt => {
            let half = langs.len() / 2;
            for (i, l) in langs[..half].iter().enumerate() {
                put(&tuple.members[l], format!("src_txt_{}", i + 1));
                put(l, format!("src_lang_{}", i + 1));
            }
            for (i, l) in langs[half..].iter().enumerate() {
                put(&tuple.members[l], format!("tgt_txt_{}", i + 1));
                put(l, format!("tgt_lang_{}", i + 1));
            }
        }
        Task::Clp => {
            put(&tuple.members[&langs[0]], "src_txt".into());
            put(&tuple.members[&langs[1]], "tgt_txt".into());
            put(&langs[0], "src_lang".into());
            put(&langs[1], "tgt_lang".into());
        }
        Task::Clts | Task::Mtc => {
            for (i, l) in langs.iter().enumerate() {
                let shown = match &ex.provenance.replaced {
                    Some(r) if &r.lang == l => &find(&r.talk_id, r.anchor).members[l],
                    _ => &tuple.members[l],
                };
                put(shown, format!("txt_{}", i + 1));
                put(l, format!("lang_{}", i + 1));
            }
        }
    }
    if ex.task == Task::Clts {
        let score = if ex.completion.contains("1.0") { "1.0" } else { "0.0" };
        text = text.replacen(&format!("Similarity: {score}."), "Similarity: {sim_score}.", 1);
    }
    if ex.task == Task::Mtc {
        let target = ex
            .completion
            .strip_prefix("Categories: ")
            .and_then(|s| s.strip_suffix('.'))
            .expect("MTC completion shape");
        let head = "into one of the following categories: ";
        let from = text.find(head).expect("MTC header") + head.len();
        let to = from + text[from..].find(".\n").expect("end of header");
        let list: Vec<&str> = text[from..to].split(", ").collect();
        assert!(list.contains(&target), "target missing from choices");
        assert!(list.iter().all(|d| domain_pool.contains(*d)), "choice outside the pool");
        let unique: BTreeSet<&str> = list.iter().copied().collect();
        assert_eq!(unique.len(), list.len(), "duplicate choice");
        text.replace_range(from..to, "{domain_list}");
        text = text.replacen(&format!("Categories: {target}."), "Categories: {target_domain}.", 1);
    }
    // longest values first so no value is rewritten inside another
    slots.sort_by_key(|s| std::cmp::Reverse(s.0.len()));
    for (value, slot) in slots {
        text = text.replace(&value, &slot);
    }
    text
}

/// Tuple whose codes and texts cannot collide with template wording.
pub fn golden_tuple(n_langs: usize) -> AlignedTuple {
    let codes = ["xqa", "xqb", "xqc", "xqd"];
    let texts = ["TEXTALPHA", "TEXTBRAVO", "TEXTCHARLIE", "TEXTDELTA"];
    AlignedTuple {
        talk_id: "golden".into(),
        anchor: TimeInterval::new(0, 1000),
        members: (0..n_langs)
            .map(|i| (codes[i].to_string(), texts[i].to_string()))
            .collect(),
    }
}

pub fn leaked_slot(ex: &InstructExample) -> Option<&'static str> {
    weave::instruct::SLOT_NAMES
        .iter()
        .find(|s| {
            let needle = format!("{{{s}}}");
            ex.prompt.contains(&needle) || ex.completion.contains(&needle)
        })
        .copied()
}
