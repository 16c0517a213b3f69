mod support;

use proptest::prelude::*;
use weave::rng::SeededRng;
use weave::stats::{self, bucket_of, parallelism_histogram, tuple_size_distribution, DEGREE_BUCKETS};

use support::*;

fn brute_force(n: u32) -> (u128, u128) {
    let mut tuples = 0u128;
    let mut sentences = 0u128;
    for mask in 1u64..(1u64 << n) {
        tuples += 1;
        sentences += u128::from(mask.count_ones());
    }
    (tuples, sentences)
}

#[test]
fn six_way_counts() {
    assert_eq!(stats::subset_tuple_count(6).unwrap(), 63);
    assert_eq!(stats::subset_sentence_count(6).unwrap(), 192);
}

#[test]
fn counts_match_enumeration() {
    for n in 1..=20 {
        let (t, s) = brute_force(n);
        assert_eq!(stats::subset_tuple_count(n).unwrap(), t, "n={n}");
        assert_eq!(stats::subset_sentence_count(n).unwrap(), s, "n={n}");
    }
}

#[test]
fn counts_out_of_domain() {
    assert!(stats::subset_tuple_count(0).is_err());
    assert!(stats::subset_sentence_count(65).is_err());
    assert_eq!(stats::subset_tuple_count(64).unwrap(), u128::from(u64::MAX));
}

#[test]
fn buckets_cover_every_degree_once() {
    for degree in 1..=200 {
        let b = bucket_of(degree);
        let (lo, hi) = DEGREE_BUCKETS[b];
        assert!(lo <= degree && degree <= hi);
    }
}

#[test]
fn mass_conservation_on_ten_thousand_tuples() {
    let mut rng = SeededRng::new(2024);
    let langs = lang_codes(60);
    let corpus = random_corpus(&mut rng, 10_000, &langs, 40);
    let hist = parallelism_histogram(&corpus);
    let total: u64 = corpus.iter().map(|t| t.degree() as u64).sum();
    assert_eq!(hist.languages.values().map(|s| s.sentences).sum::<u64>(), total);
    for span in hist.languages.values() {
        assert_eq!(span.buckets.iter().sum::<u64>(), span.sentences);
        assert_eq!(span.by_degree.values().sum::<u64>(), span.sentences);
    }
    let sizes = tuple_size_distribution(&corpus);
    assert_eq!(sizes.values().sum::<u64>(), corpus.len() as u64);
    assert_eq!(sizes.iter().map(|(k, c)| *k as u64 * c).sum::<u64>(), total);
}

proptest! {
    #[test]
    fn mass_conservation(seed: u64, count in 0usize..300, n_langs in 1usize..70) {
        let mut rng = SeededRng::new(seed);
        let corpus = random_corpus(&mut rng, count, &lang_codes(n_langs), 7);
        let hist = parallelism_histogram(&corpus);
        let total: u64 = corpus.iter().map(|t| t.degree() as u64).sum();
        prop_assert_eq!(hist.languages.values().map(|s| s.sentences).sum::<u64>(), total);
        for span in hist.languages.values() {
            prop_assert_eq!(span.buckets.iter().sum::<u64>(), span.sentences);
            for (degree, c) in &span.by_degree {
                prop_assert!(*c <= span.buckets[bucket_of(*degree)]);
            }
        }
    }
}
