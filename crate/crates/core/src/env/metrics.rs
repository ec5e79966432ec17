//! Answer metrics for the QA world.

use std::collections::HashMap;

/// Lowercase, turn punctuation into whitespace, drop the articles
/// `a`/`an`/`the`, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

/// Token-level F1 between a predicted and a gold answer. Zero when either
/// side has no tokens after normalization.
pub fn f1_score(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Exact match after normalization.
pub fn exact_match(prediction: &str, gold: &str) -> bool {
    let p = normalize_answer(prediction);
    !p.is_empty() && p == normalize_answer(gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent reimplementation: sort both token lists and merge.
    fn f1_by_sorted_merge(prediction: &str, gold: &str) -> f64 {
        let tokenize = |s: &str| -> Vec<String> {
            let mut cur = String::new();
            let mut toks = Vec::new();
            for ch in s.chars().flat_map(char::to_lowercase) {
                if ch.is_whitespace() || ch.is_ascii_punctuation() {
                    if !cur.is_empty() {
                        toks.push(std::mem::take(&mut cur));
                    }
                } else {
                    cur.push(ch);
                }
            }
            if !cur.is_empty() {
                toks.push(cur);
            }
            toks.retain(|t| t != "a" && t != "an" && t != "the");
            toks.sort();
            toks
        };
        let (p, g) = (tokenize(prediction), tokenize(gold));
        if p.is_empty() || g.is_empty() {
            return 0.0;
        }
        let (mut i, mut j, mut common) = (0, 0, 0usize);
        while i < p.len() && j < g.len() {
            match p[i].cmp(&g[j]) {
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        if common == 0 {
            return 0.0;
        }
        let (pr, rc) = (common as f64 / p.len() as f64, common as f64 / g.len() as f64);
        2.0 * pr * rc / (pr + rc)
    }

    #[test]
    fn identity() {
        assert_eq!(f1_score("yes", "yes"), 1.0);
    }

    #[test]
    fn partial_overlap_hand_computed() {
        // tokens: 300 | major | label | songs ; P = 1/4, R = 1
        let expected = 2.0 * 0.25 * 1.0 / 1.25;
        assert!((f1_score("300 major-label songs", "300") - expected).abs() < 1e-12);
        assert!((f1_by_sorted_merge("300 major-label songs", "300") - 0.4).abs() < 1e-12);
        assert!((f1_score("300 major-label songs", "300") - 0.4).abs() < 1e-9);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        assert_eq!(f1_score("", "300"), 0.0);
        assert_eq!(f1_score("the", "a"), 0.0);
    }

    #[test]
    fn articles_and_case_ignored() {
        assert_eq!(f1_score("The Beatles", "beatles"), 1.0);
        assert!(exact_match("Arthur's Magazine", "arthur s magazine"));
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in "[a-d ,.]{0,16}", b in "[a-d ,.]{0,16}") {
            let ab = f1_score(&a, &b);
            let ba = f1_score(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn agrees_with_sorted_merge(a in "[a-e -]{0,20}", b in "[a-e -]{0,20}") {
            prop_assert!((f1_score(&a, &b) - f1_by_sorted_merge(&a, &b)).abs() < 1e-12);
        }
    }
}
