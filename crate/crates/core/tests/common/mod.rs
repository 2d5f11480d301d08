//! Test-only oracles and fixtures. Nothing here calls into the code paths it
//! is used to check: n-grams are enumerated into plain lists and counted by
//! linear scans, matrices are multiplied with triple loops.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;

pub const VOCAB: &[&str] = &["a", "b", "c", "the", "cat", "sat", "on", "mat"];

pub fn random_words<R: Rng>(rng: &mut R, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
        .collect()
}

pub fn random_chars<R: Rng>(rng: &mut R, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', ' ', 'ä'];
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn grams<T: Clone>(units: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    if units.len() >= n {
        for start in 0..=units.len() - n {
            out.push(units[start..start + n].to_vec());
        }
    }
    out
}

fn count<T: PartialEq>(list: &[Vec<T>], gram: &[T]) -> usize {
    list.iter().filter(|g| g.as_slice() == gram).count()
}

fn distinct<T: PartialEq + Clone>(list: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// (matches, totals, hyp_len, ref_len) by brute force.
pub struct OracleBleuCounts {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

pub fn oracle_bleu_counts(hyp: &[String], refs: &[Vec<String>], max_order: usize) -> OracleBleuCounts {
    let mut matches = Vec::new();
    let mut totals = Vec::new();
    for n in 1..=max_order {
        let h = grams(hyp, n);
        let rs: Vec<Vec<Vec<String>>> = refs.iter().map(|r| grams(r, n)).collect();
        let mut m = 0;
        for g in distinct(&h) {
            let max_ref = rs.iter().map(|r| count(r, &g)).max().unwrap_or(0);
            m += count(&h, &g).min(max_ref);
        }
        matches.push(m);
        totals.push(h.len());
    }
    let mut best: Option<usize> = None;
    for r in refs {
        let d = (r.len() as i64 - hyp.len() as i64).abs();
        best = match best {
            None => Some(r.len()),
            Some(b) => {
                let db = (b as i64 - hyp.len() as i64).abs();
                if d < db || (d == db && r.len() < b) {
                    Some(r.len())
                } else {
                    Some(b)
                }
            }
        };
    }
    OracleBleuCounts {
        matches,
        totals,
        hyp_len: hyp.len(),
        ref_len: best.unwrap_or(0),
    }
}

/// BLEU from brute-force counts. `add_k` smooths orders above 1.
pub fn oracle_bleu_value(c: &OracleBleuCounts, add_k: Option<f64>) -> f64 {
    if c.hyp_len == 0 {
        return if c.ref_len == 0 { 100.0 } else { 0.0 };
    }
    let mut logs = Vec::new();
    for n in 0..c.totals.len() {
        if c.totals[n] == 0 {
            continue;
        }
        let p = match add_k {
            Some(k) if n > 0 => (c.matches[n] as f64 + k) / (c.totals[n] as f64 + k),
            _ => c.matches[n] as f64 / c.totals[n] as f64,
        };
        if p == 0.0 {
            return 0.0;
        }
        logs.push(p.ln());
    }
    let bp = if c.hyp_len >= c.ref_len {
        1.0
    } else {
        (1.0 - c.ref_len as f64 / c.hyp_len as f64).exp()
    };
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    100.0 * bp * mean.exp()
}

pub fn oracle_sentence_bleu(hyp: &[String], refs: &[Vec<String>], max_order: usize, add_k: Option<f64>) -> f64 {
    oracle_bleu_value(&oracle_bleu_counts(hyp, refs, max_order), add_k)
}

pub fn oracle_corpus_bleu(hyps: &[Vec<String>], refs: &[Vec<String>], max_order: usize) -> f64 {
    let mut total = OracleBleuCounts {
        matches: vec![0; max_order],
        totals: vec![0; max_order],
        hyp_len: 0,
        ref_len: 0,
    };
    for (h, r) in hyps.iter().zip(refs) {
        let c = oracle_bleu_counts(h, std::slice::from_ref(r), max_order);
        for n in 0..max_order {
            total.matches[n] += c.matches[n];
            total.totals[n] += c.totals[n];
        }
        total.hyp_len += c.hyp_len;
        total.ref_len += c.ref_len;
    }
    oracle_bleu_value(&total, None)
}

/// Per order: (hyp n-grams, ref n-grams, clipped matches).
pub fn oracle_chrf_counts(hyp: &str, reference: &str, char_order: usize) -> Vec<[usize; 3]> {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    (1..=char_order)
        .map(|n| {
            let hg = grams(&h, n);
            let rg = grams(&r, n);
            let m = distinct(&hg).iter().map(|g| count(&hg, g).min(count(&rg, g))).sum();
            [hg.len(), rg.len(), m]
        })
        .collect()
}

pub fn oracle_chrf_value(counts: &[[usize; 3]], beta: f64) -> f64 {
    let beta2 = beta * beta;
    let mut sum = 0.0;
    let mut used = 0;
    for &[ht, rt, m] in counts {
        if ht == 0 && rt == 0 {
            continue;
        }
        used += 1;
        if m > 0 {
            let p = m as f64 / ht as f64;
            let r = m as f64 / rt as f64;
            sum += (1.0 + beta2) * p * r / (beta2 * p + r);
        }
    }
    if used == 0 {
        100.0
    } else {
        100.0 * sum / used as f64
    }
}

pub fn oracle_sentence_chrf(hyp: &str, reference: &str) -> f64 {
    oracle_chrf_value(&oracle_chrf_counts(hyp, reference, 6), 2.0)
}

pub fn oracle_corpus_chrf(hyps: &[String], refs: &[String]) -> f64 {
    let mut total = vec![[0usize; 3]; 6];
    for (h, r) in hyps.iter().zip(refs) {
        for (t, c) in total.iter_mut().zip(oracle_chrf_counts(h, r, 6)) {
            for k in 0..3 {
                t[k] += c[k];
            }
        }
    }
    oracle_chrf_value(&total, 2.0)
}

/// Recomputes every pairwise utility and returns (argmax, row means).
pub fn oracle_mbr(cands: &[String], include_self: bool, utility: impl Fn(&str, &str) -> f64) -> (usize, Vec<f64>) {
    let n = cands.len();
    let mut means = Vec::new();
    for c in 0..n {
        let mut sum = 0.0;
        let mut k = 0;
        for r in 0..n {
            if !include_self && r == c {
                continue;
            }
            sum += utility(&cands[c], &cands[r]);
            k += 1;
        }
        means.push(sum / k as f64);
    }
    let mut best = 0;
    for i in 1..n {
        if means[i] > means[best] {
            best = i;
        }
    }
    (best, means)
}

pub fn oracle_matmul(b: &[f32], a: &[f32], d: usize, r: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * k];
    for i in 0..d {
        for j in 0..k {
            for s in 0..r {
                out[i * k + j] += b[i * r + s] as f64 * a[s * k + j] as f64;
            }
        }
    }
    out
}

/// ½(Σ p ln(p/q) + Σ q ln(q/p)) with 0·ln(0/x) = 0.
pub fn oracle_symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    let kl = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * (a / b).ln() })
            .sum()
    };
    0.5 * (kl(p, q) + kl(q, p))
}

pub fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Writes an executable `sh` script and returns its path.
pub fn write_script(dir: &Path, name: &str, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Replies 0.5 to every request.
pub const ECHO_SCORER: &str = r#"while IFS= read -r line; do
  [ -z "$line" ] && continue
  echo 0.5
done"#;

/// Replies with the mt field parsed as a number.
pub const ORDER_SCORER: &str = r#"TAB=$(printf '\t')
while IFS= read -r line; do
  [ -z "$line" ] && continue
  mt=${line#*"$TAB"}
  printf '%s\n' "${mt%%"$TAB"*}"
done"#;

/// Replies with 0.1 x the number of space-separated tokens in mt.
pub const TOKEN_COUNT_SCORER: &str = r#"TAB=$(printf '\t')
set -f
while IFS= read -r line; do
  [ -z "$line" ] && continue
  mt=${line#*"$TAB"}
  IFS=' '
  set -- ${mt%%"$TAB"*}
  unset IFS
  awk -v n=$# 'BEGIN { printf "%.1f\n", n * 0.1 }'
done"#;

/// Replies with the number of TAB-separated fields on the request line.
pub const FIELD_COUNT_SCORER: &str = r#"TAB=$(printf '\t')
while IFS= read -r line; do
  [ -z "$line" ] && continue
  n=1
  rest=$line
  while :; do
    case $rest in
      *"$TAB"*) rest=${rest#*"$TAB"}; n=$((n + 1)) ;;
      *) break ;;
    esac
  done
  echo $n
done"#;

pub const GARBAGE_SCORER: &str = r#"while IFS= read -r line; do
  [ -z "$line" ] && continue
  echo abc
done"#;

pub fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Placeholder document `<srcN>`/`<mtN>`/`<refN>` with one language pair per turn.
pub fn placeholder_doc(pairs: &[(&str, &str)]) -> mbrforge::promptgen::ChatDocument {
    use mbrforge::promptgen::{ChatDocument, ChatTurn, Speaker};
    let turns = pairs
        .iter()
        .enumerate()
        .map(|(i, (s, t))| ChatTurn {
            speaker: if i % 2 == 0 { Speaker::Customer } else { Speaker::Agent },
            src_lang: s.to_string(),
            tgt_lang: t.to_string(),
            source: format!("<src{}>", i + 1),
            mt: format!("<mt{}>", i + 1),
            reference: Some(format!("<ref{}>", i + 1)),
        })
        .collect();
    ChatDocument::new("table", turns).unwrap()
}

pub const EN_DE: (&str, &str) = ("English", "German");
pub const DE_EN: (&str, &str) = ("German", "English");

pub fn mbrforge() -> std::process::Command {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_mbrforge"));
    cmd.env_remove("MBRFORGE_WORKERS");
    cmd
}

/// Writes a 20-line source file and three candidate files, runs `mbr` then
/// `build-st`, and returns (exit codes, selected lines, corpus src, corpus tgt).
pub fn pipeline_smoke(dir: &Path, workers: usize) -> (Vec<i32>, String, String, String) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let src: Vec<String> = (0..20).map(|i| format!("source sentence {i}")).collect();
    std::fs::write(dir.join("src.txt"), src.join("\n") + "\n").unwrap();
    let mut cands = Vec::new();
    for s in 0..3 {
        let lines: Vec<String> = (0..20)
            .map(|_| {
                let w = random_words(&mut rng, 8);
                if w.is_empty() {
                    "the cat".to_string()
                } else {
                    w.join(" ")
                }
            })
            .collect();
        let path = dir.join(format!("cand{s}.txt"));
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        cands.push(path);
    }
    let out = dir.join(format!("mbr.w{workers}.txt"));
    let prefix = dir.join(format!("st.w{workers}"));
    let mut mbr = mbrforge();
    mbr.args(["--workers", &workers.to_string(), "mbr", "--utility", "chrf", "--src"])
        .arg(dir.join("src.txt"))
        .arg("--out")
        .arg(&out);
    for c in &cands {
        mbr.arg("--cand").arg(c);
    }
    let code_mbr = mbr.status().unwrap().code().unwrap_or(-1);
    let code_st = mbrforge()
        .args(["build-st", "--src"])
        .arg(dir.join("src.txt"))
        .arg("--hyp")
        .arg(&out)
        .arg("--out-prefix")
        .arg(&prefix)
        .status()
        .unwrap()
        .code()
        .unwrap_or(-1);
    let read = |p: PathBuf| std::fs::read_to_string(p).unwrap_or_default();
    let prefixed = |ext: &str| read(PathBuf::from(format!("{}.{ext}", prefix.display())));
    let (s, t) = (prefixed("src"), prefixed("tgt"));
    (vec![code_mbr, code_st], read(out), s, t)
}
