use std::collections::HashMap;

use crate::text::{normalize, tokenize};

pub const BLEU_SMOOTHING: &str =
    "BLEU-4 with add-one smoothing of zero n-gram matches for n >= 2; scores are comparable only within this harness";

const MAX_N: usize = 4;

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn tokens(s: &str) -> Vec<String> {
    tokenize(&normalize(s))
}

/// Sentence BLEU-4 after case folding and punctuation-aware tokenization.
pub fn bleu4(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokens(candidate);
    if cand.is_empty() || references.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokens(r)).collect();
    let mut log_sum = 0.0;
    for n in 1..=MAX_N {
        let counts = ngrams(&cand, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &refs {
            for (g, c) in ngrams(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let matched: usize = counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = cand.len().saturating_sub(n - 1);
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let c = cand.len() as f64;
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(cand.len()), len))
        .unwrap_or(0) as f64;
    let bp = (1.0 - r / c).min(0.0).exp();
    bp * (log_sum / MAX_N as f64).exp()
}

/// Mean of sentence scores; 0 for an empty corpus.
pub fn corpus_bleu<'a>(pairs: impl IntoIterator<Item = (&'a str, Vec<&'a str>)>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (cand, refs) in pairs {
        sum += bleu4(cand, &refs);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sentences_score_one() {
        let s = "the red jacket on the left costs fifty nine dollars today";
        assert!((bleu4(s, &[s]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        assert_eq!(bleu4("", &["a b"]), 0.0);
        assert_eq!(bleu4("  ", &["a b"]), 0.0);
    }

    #[test]
    fn no_unigram_overlap_scores_zero() {
        assert_eq!(bleu4("a b c d", &["w x y z"]), 0.0);
    }
}
