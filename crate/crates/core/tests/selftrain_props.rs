use mbrforge::selftrain::*;
use proptest::prelude::*;
use std::collections::HashSet;

fn line() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z]{1,4}", 0..8).prop_map(|w| w.join(" "))
}

fn lines(n: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(line(), n)
}

fn filter() -> impl Strategy<Value = FilterConfig> {
    (1.0f64..4.0, 0usize..3, 3usize..8, any::<bool>()).prop_map(|(r, min, max, dedup)| FilterConfig {
        max_length_ratio: r,
        min_tokens: min,
        max_tokens: max,
        dedup,
    })
}

fn ntok(s: &str) -> usize {
    s.split_whitespace().count()
}

proptest! {
    #[test]
    fn st_output_is_a_filtered_subsequence((src, hyp) in (1usize..30).prop_flat_map(|n| (lines(n), lines(n))), f in filter()) {
        let c = build_st_corpus(&src, &hyp, &f).unwrap();
        // subsequence of the input pairs, in order
        let mut it = src.iter().zip(&hyp);
        for p in &c.pairs {
            prop_assert!(it.any(|(s, t)| *s == p.source && *t == p.target));
            prop_assert_eq!(p.provenance, Provenance::SelfTrain);
            let (s, t) = (ntok(&p.source), ntok(&p.target));
            prop_assert!(s > 0 && t > 0);
            prop_assert!(s >= f.min_tokens && t >= f.min_tokens && s <= f.max_tokens && t <= f.max_tokens);
            prop_assert!((s as f64 / t as f64).max(t as f64 / s as f64) <= f.max_length_ratio);
        }
        if f.dedup {
            let unique: HashSet<_> = c.pairs.iter().map(|p| (&p.source, &p.target)).collect();
            prop_assert_eq!(unique.len(), c.len());
        }
        // idempotent
        prop_assert_eq!(f.apply(c.clone()), c);
    }

    #[test]
    fn bt_tags_after_filtering((tgt, back) in (1usize..30).prop_flat_map(|n| (lines(n), lines(n))), f in filter()) {
        let untagged = build_bt_corpus(&tgt, &back, None, &f).unwrap();
        let tagged = build_bt_corpus(&tgt, &back, Some(DEFAULT_BT_TAG), &f).unwrap();
        prop_assert_eq!(untagged.len(), tagged.len());
        for (u, t) in untagged.pairs.iter().zip(&tagged.pairs) {
            prop_assert_eq!(&t.source, &format!("<BT> {}", u.source));
            prop_assert_eq!(&t.target, &u.target);
            prop_assert_eq!(t.provenance, Provenance::BackTranslate);
        }
    }

    #[test]
    fn merge_shuffle_is_a_seeded_permutation(a in lines(6), b in lines(4), seed in any::<u64>()) {
        let ca = build_st_corpus(&a, &a, &FilterConfig::permissive()).unwrap();
        let cb = build_bt_corpus(&b, &b, Some("<BT>"), &FilterConfig::permissive()).unwrap();
        let plain = merge_corpora(vec![ca.clone(), cb.clone()], None);
        prop_assert_eq!(plain.len(), ca.len() + cb.len());
        let x = merge_corpora(vec![ca.clone(), cb.clone()], Some(seed));
        let y = merge_corpora(vec![ca, cb], Some(seed));
        prop_assert_eq!(&x, &y);
        let mut sorted_x = x.pairs.iter().map(|p| format!("{:?}", p)).collect::<Vec<_>>();
        let mut sorted_p = plain.pairs.iter().map(|p| format!("{:?}", p)).collect::<Vec<_>>();
        sorted_x.sort();
        sorted_p.sort();
        prop_assert_eq!(sorted_x, sorted_p);
    }

    #[test]
    fn corpus_files_round_trip(src in lines(10), hyp in lines(10), with_meta in any::<bool>()) {
        let c = build_st_corpus(&src, &hyp, &FilterConfig::permissive()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("train");
        c.write(&prefix, with_meta).unwrap();
        let back = ParallelCorpus::read(&prefix).unwrap();
        prop_assert_eq!(back.sources().collect::<Vec<_>>(), c.sources().collect::<Vec<_>>());
        prop_assert_eq!(back.targets().collect::<Vec<_>>(), c.targets().collect::<Vec<_>>());
        let expected = if with_meta { Provenance::SelfTrain } else { Provenance::Genuine };
        prop_assert!(back.pairs.iter().all(|p| p.provenance == expected));
    }
}

#[test]
fn misaligned_inputs_are_rejected() {
    let err = build_st_corpus(&["a", "b"], &["x"], &FilterConfig::default()).unwrap_err();
    assert!(err.to_string().contains("sources has 2 lines"), "{err}");
    assert!(build_bt_corpus(&["a"], &["x", "y"], None, &FilterConfig::default()).is_err());
    assert!(build_bt_corpus(&["a"], &["x"], Some("two words"), &FilterConfig::default()).is_err());
    let bad = FilterConfig {
        min_tokens: 5,
        max_tokens: 2,
        ..FilterConfig::default()
    };
    assert!(build_st_corpus(&["a"], &["x"], &bad).is_err());
}

#[test]
fn default_filter_drops_long_ratio() {
    let c = build_st_corpus(
        &["a", "a b c d", "a b"],
        &["x y z w", "x", "x y"],
        &FilterConfig::default(),
    )
    .unwrap();
    assert_eq!(c.sources().collect::<Vec<_>>(), ["a b"]);
}
