mod common;

use common::Rng;
use proptest::prelude::*;
use vocab_lab::overlap::{
    complementary_size, compute_overlap, compute_triple_overlap, overlap_from_sizes,
    triple_from_counts,
};
use vocab_lab::vocab::extract_vocab;
use vocab_lab::TokenizedCorpus;

#[test]
fn published_pairwise_sizes() {
    let sv = overlap_from_sizes(31_421, 31_383, 58_918).unwrap();
    assert_eq!(
        (sv.overlap_count, sv.overlap_pct_display.as_str()),
        (3_886, "6.6")
    );
    let fi = overlap_from_sizes(31_421, 31_671, 60_577).unwrap();
    assert_eq!(
        (fi.overlap_count, fi.overlap_pct_display.as_str()),
        (2_515, "4.2")
    );
    let disjoint = overlap_from_sizes(31_421, 31_383, 62_802).unwrap();
    assert_eq!(
        (
            disjoint.overlap_count,
            disjoint.overlap_pct_display.as_str()
        ),
        (2, "0.003")
    );
}

#[test]
fn published_overlap_of_overlaps() {
    let t = triple_from_counts(3_886, 2_515, 2_072).unwrap();
    assert_eq!((t.unique_ab, t.unique_ac), (1_814, 443));
    assert_eq!(
        (t.share_ab_display.as_str(), t.share_ac_display.as_str()),
        ("53", "82")
    );
}

#[test]
fn published_complementary_targets() {
    assert_eq!(complementary_size(58_918, 31_421).unwrap(), 27_497);
    assert_eq!(complementary_size(60_577, 31_421).unwrap(), 29_156);
    assert!(complementary_size(31_421, 31_421).is_err());
}

fn random_corpus(rng: &mut Rng, lang: &str, pool: &[String]) -> TokenizedCorpus {
    let lines = (0..rng.range(1, 40))
        .map(|_| {
            (0..rng.range(0, 12))
                .map(|_| rng.pick(pool).clone())
                .collect()
        })
        .collect();
    TokenizedCorpus::new(lang, lines)
}

#[test]
fn inclusion_exclusion_on_random_pairs() {
    let mut rng = Rng::new(41);
    for case in 0..100 {
        let shared = rng.range(0, 30);
        let pool_a: Vec<String> = (0..rng.range(1, 60)).map(|i| format!("t{i}")).collect();
        let pool_b: Vec<String> = (0..rng.range(1, 60))
            .map(|i| {
                if i < shared {
                    format!("t{i}")
                } else {
                    format!("u{i}")
                }
            })
            .chain(["</s>".to_owned()])
            .collect();
        let a = random_corpus(&mut rng, "a", &pool_a);
        let b = random_corpus(&mut rng, "b", &pool_b);
        let va = extract_vocab(&[&a]).unwrap();
        let vb = extract_vocab(&[&b]).unwrap();
        let vj = extract_vocab(&[&a, &b]).unwrap();
        let report = compute_overlap(&va, &vb, Some(&vj)).unwrap();
        assert_eq!(
            vj.len(),
            va.len() + vb.len() - report.counts.overlap_count,
            "case {case}"
        );
    }
}

#[test]
fn triple_overlap_is_nested() {
    let mut rng = Rng::new(9);
    let pool: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    for _ in 0..20 {
        let v: Vec<_> = (0..3)
            .map(|k| {
                let c = random_corpus(&mut rng, &k.to_string(), &pool);
                extract_vocab(&[&c]).unwrap()
            })
            .collect();
        let t = compute_triple_overlap(&v[0], &v[1], &v[2]);
        assert!(t
            .oo
            .iter()
            .all(|x| t.o_ab.contains(x) && t.o_ac.contains(x)));
        assert_eq!(t.counts.unique_ab + t.counts.oo_count, t.o_ab.len());
    }
}

proptest! {
    #[test]
    fn sizes_round_trip(a in 1usize..100_000, b in 1usize..100_000, frac in 0.0f64..=1.0) {
        let o = (frac * a.min(b) as f64) as usize;
        let c = overlap_from_sizes(a, b, a + b - o).unwrap();
        prop_assert_eq!(c.overlap_count, o);
        prop_assert!(c.overlap_pct >= 0.0 && c.overlap_pct <= 100.0);
    }

    #[test]
    fn impossible_sizes_are_rejected(a in 1usize..1000, b in 1usize..1000, extra in 1usize..10) {
        prop_assert!(overlap_from_sizes(a, b, a + b + extra).is_err());
        prop_assert!(overlap_from_sizes(a, b, a.max(b) - 1).is_err());
    }
}
