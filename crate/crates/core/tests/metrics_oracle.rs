mod common;

use common::*;
use mbrforge::metrics::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seq(words: &[String]) -> TokenSequence {
    TokenSequence::new(words.to_vec()).unwrap()
}

#[test]
fn sentence_bleu_matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for smoothing in [Smoothing::None, Smoothing::AddK(0.1)] {
        for _ in 0..400 {
            let h = random_words(&mut rng, 6);
            let r = random_words(&mut rng, 6);
            let cfg = BleuConfig {
                max_order: 4,
                smoothing,
            };
            let got = sentence_bleu(&seq(&h), &[seq(&r)], &cfg).unwrap().value;
            let k = match smoothing {
                Smoothing::AddK(k) => Some(k),
                Smoothing::None => None,
            };
            let want = oracle_sentence_bleu(&h, std::slice::from_ref(&r), 4, k);
            assert!((got - want).abs() < 1e-9, "{h:?} vs {r:?}: {got} != {want}");
        }
    }
}

#[test]
fn multi_reference_bleu_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let h = random_words(&mut rng, 8);
        let refs: Vec<Vec<String>> = (0..3).map(|_| random_words(&mut rng, 8)).collect();
        let ref_seqs: Vec<TokenSequence> = refs.iter().map(|r| seq(r)).collect();
        let cfg = BleuConfig {
            max_order: 3,
            smoothing: Smoothing::None,
        };
        let got = sentence_bleu(&seq(&h), &ref_seqs, &cfg).unwrap().value;
        let want = oracle_sentence_bleu(&h, &refs, 3, None);
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn corpus_bleu_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let hyps: Vec<Vec<String>> = (0..5).map(|_| random_words(&mut rng, 6)).collect();
        let refs: Vec<Vec<String>> = (0..5).map(|_| random_words(&mut rng, 6)).collect();
        let h: Vec<TokenSequence> = hyps.iter().map(|x| seq(x)).collect();
        let r: Vec<Vec<TokenSequence>> = refs.iter().map(|x| vec![seq(x)]).collect();
        let got = corpus_bleu(&h, &r, &BleuConfig::default()).unwrap().value;
        let want = oracle_corpus_bleu(&hyps, &refs, 4);
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn chrf_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..500 {
        let h = random_chars(&mut rng, 20);
        let r = random_chars(&mut rng, 20);
        let got = sentence_chrf(&h, &r, &ChrfConfig::default()).unwrap().value;
        let want = oracle_sentence_chrf(&h, &r);
        assert!((got - want).abs() < 1e-9, "{h:?} vs {r:?}");
    }
    let v = sentence_chrf("cab", "cat", &ChrfConfig::default()).unwrap().value;
    assert!(v > 0.0 && v < 100.0);
    assert!((v - oracle_sentence_chrf("cab", "cat")).abs() < 1e-9);
}

#[test]
fn corpus_chrf_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let hyps: Vec<String> = (0..5).map(|_| random_chars(&mut rng, 15)).collect();
        let refs: Vec<String> = (0..5).map(|_| random_chars(&mut rng, 15)).collect();
        let got = corpus_chrf(&hyps, &refs, &ChrfConfig::default()).unwrap().value;
        assert!((got - oracle_corpus_chrf(&hyps, &refs)).abs() < 1e-9);
    }
}

#[test]
fn corpus_reductions() {
    let h = "the cat sat on the mat";
    let r = "the cat is on the mat";
    let cfg = ChrfConfig::default();
    assert_eq!(
        corpus_chrf(&[h], &[r], &cfg).unwrap(),
        sentence_chrf(h, r, &cfg).unwrap()
    );
    assert_eq!(corpus_chrf(&[h, r], &[h, r], &cfg).unwrap().value, 100.0);
    let t = |s: &str| tokenize(s, TokenScheme::PunctuationSplit);
    assert_eq!(
        corpus_bleu(&[t(h), t(r)], &[vec![t(h)], vec![t(r)]], &BleuConfig::default())
            .unwrap()
            .value,
        100.0
    );
}

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(VOCAB).prop_map(str::to_string), 0..=8)
}

proptest! {
    #[test]
    fn identity_scores_100(w in words(), s in "[a-z ]{0,20}") {
        prop_assume!(!w.is_empty());
        let t = seq(&w);
        prop_assert_eq!(sentence_bleu(&t, std::slice::from_ref(&t), &BleuConfig::default()).unwrap().value, 100.0);
        prop_assume!(!s.trim().is_empty());
        prop_assert_eq!(sentence_chrf(&s, &s, &ChrfConfig::default()).unwrap().value, 100.0);
    }

    #[test]
    fn scores_in_range(h in words(), r in words(), hs in "[abc ]{0,20}", rs in "[abc ]{0,20}") {
        for smoothing in [Smoothing::None, Smoothing::AddK(0.1)] {
            let v = sentence_bleu(&seq(&h), &[seq(&r)], &BleuConfig { max_order: 4, smoothing }).unwrap();
            prop_assert!((0.0..=100.0).contains(&v.value));
            if !h.is_empty() {
                let bp = v.brevity_penalty.unwrap();
                prop_assert!(bp > 0.0 && bp <= 1.0);
                if h.len() >= r.len() {
                    prop_assert_eq!(bp, 1.0);
                }
            }
        }
        let c = sentence_chrf(&hs, &rs, &ChrfConfig::default()).unwrap().value;
        prop_assert!((0.0..=100.0).contains(&c));
    }

    #[test]
    fn bleu_oracle_small(h in words(), r in words()) {
        let got = sentence_bleu(&seq(&h), &[seq(&r)], &BleuConfig::default()).unwrap().value;
        prop_assert!((got - oracle_sentence_bleu(&h, std::slice::from_ref(&r), 4, None)).abs() < 1e-9);
    }

    #[test]
    fn chrf_oracle_small(h in "[ab c]{0,20}", r in "[ab c]{0,20}") {
        let got = sentence_chrf(&h, &r, &ChrfConfig::default()).unwrap().value;
        prop_assert!((got - oracle_sentence_chrf(&h, &r)).abs() < 1e-9);
    }

    #[test]
    fn corpus_scores_ignore_joint_reordering(
        pairs in prop::collection::vec(("[abc ]{0,10}", "[abc ]{0,10}"), 1..6),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let split = |p: &[(String, String)]| -> (Vec<String>, Vec<String>) { p.iter().cloned().unzip() };
        let (h1, r1) = split(&pairs);
        let (h2, r2) = split(&shuffled);
        let cfg = ChrfConfig::default();
        prop_assert_eq!(corpus_chrf(&h1, &r1, &cfg).unwrap().value, corpus_chrf(&h2, &r2, &cfg).unwrap().value);
        let toks = |v: &[String]| v.iter().map(|s| tokenize(s, TokenScheme::Whitespace)).collect::<Vec<_>>();
        let refs = |v: &[String]| v.iter().map(|s| vec![tokenize(s, TokenScheme::Whitespace)]).collect::<Vec<_>>();
        let b = BleuConfig::default();
        prop_assert_eq!(
            corpus_bleu(&toks(&h1), &refs(&r1), &b).unwrap().value,
            corpus_bleu(&toks(&h2), &refs(&r2), &b).unwrap().value
        );
    }

    #[test]
    fn extra_reference_ngrams_never_lose_matches(h in words(), r in words(), extra in words()) {
        let ng = |w: &[String]| WordNGrams::new(&seq(w), 4);
        let base = BleuStats::between(&ng(&h), &[&ng(&r)]);
        let mut grown_ref = r.clone();
        grown_ref.extend(extra);
        let grown = BleuStats::between(&ng(&h), &[&ng(&grown_ref)]);
        for n in 0..4 {
            prop_assert!(grown.matches[n] >= base.matches[n]);
        }
    }

    #[test]
    fn tokenizer_is_deterministic_and_non_empty(text in "\\PC{0,30}") {
        for scheme in [TokenScheme::Whitespace, TokenScheme::PunctuationSplit] {
            let a = tokenize(&text, scheme);
            prop_assert_eq!(&a, &tokenize(&text, scheme));
            prop_assert!(a.tokens().iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        }
    }
}
