//! Ranking metrics, win/tie/loss counts and the paired randomization test.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const DEFAULT_CUTOFF: usize = 20;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

/// Precision and recall of the top `k` items. Precision always divides by
/// `k`, so a list shorter than `k` counts its missing ranks as misses.
/// Returns `Ok(None)` when `relevant` is empty.
pub fn precision_recall_at_k<T: Ord>(ranking: &[T], relevant: &BTreeSet<T>, k: usize) -> Result<Option<(f64, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("cutoff k must be at least 1".into()));
    }
    if relevant.is_empty() {
        return Ok(None);
    }
    let hits = ranking.iter().take(k).filter(|x| relevant.contains(x)).count() as f64;
    Ok(Some((hits / k as f64, hits / relevant.len() as f64)))
}

fn gain(grade: i32) -> f64 {
    // negative grades (e.g. spam) count as non-relevant
    libm::exp2(f64::from(grade.max(0))) - 1.0
}

/// NDCG@k with gain `2^g - 1` and discount `log2(r + 1)`. The ideal ranking
/// sorts every judged grade. Unjudged documents have grade 0. `None` when no
/// document has a positive grade.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], grades: &BTreeMap<String, i32>, k: usize) -> Option<f64> {
    let mut ideal: Vec<i32> = grades.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let discount = |r: usize| 1.0 / libm::log2(r as f64 + 1.0);
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &g)| gain(g) * discount(i + 1)).sum();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(grades.get(d.as_ref()).copied().unwrap_or(0)) * discount(i + 1))
        .sum();
    Some(dcg / idcg)
}

/// Expected reciprocal rank at `k` with `R = (2^g - 1) / 2^g_max`.
pub fn err_at_k<S: AsRef<str>>(ranking: &[S], grades: &BTreeMap<String, i32>, k: usize, g_max: i32) -> f64 {
    let g_max = g_max.max(1);
    let denom = libm::exp2(f64::from(g_max));
    let mut remaining = 1.0;
    let mut err = 0.0;
    for (i, d) in ranking.iter().take(k).enumerate() {
        let g = grades.get(d.as_ref()).copied().unwrap_or(0).min(g_max);
        let r = gain(g) / denom;
        err += remaining * r / (i + 1) as f64;
        remaining *= 1.0 - r;
    }
    err
}

/// Ids `d0, d1, …` and their grade map for grades listed in ranked order.
pub fn grades_in_order(grades: &[i32]) -> (Vec<String>, BTreeMap<String, i32>) {
    let ids: Vec<String> = (0..grades.len()).map(|i| format!("d{i}")).collect();
    let map = ids.iter().cloned().zip(grades.iter().copied()).collect();
    (ids, map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WinTieLoss {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

/// Per-unit comparison of `a` against `b`.
pub fn win_tie_loss<K: Ord + core::fmt::Debug>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>, tol: f64) -> Result<WinTieLoss> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::UnitMismatch(format!("{} vs {} units", a.len(), b.len())));
    }
    let mut out = WinTieLoss::default();
    for (x, y) in a.values().zip(b.values()) {
        let d = x - y;
        if d > tol {
            out.wins += 1;
        } else if d < -tol {
            out.losses += 1;
        } else {
            out.ties += 1;
        }
    }
    Ok(out)
}

/// Two-sided paired sign-flip randomization test on the mean difference.
///
/// With `2^n ≤ permutations` every sign assignment is enumerated and
/// `p = #{|Σ±d| ≥ |Σd|} / 2^n`. Otherwise `permutations` random assignments
/// are drawn and `p = (b + 1) / (permutations + 1)`.
pub fn permutation_test(diffs: &[f64], permutations: usize, seed: u64) -> f64 {
    let n = diffs.len();
    if n == 0 {
        return 1.0;
    }
    let observed = diffs.iter().sum::<f64>().abs();
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum();
    let threshold = observed - 1e-12 * scale.max(1e-300);

    if n < 63 && (1u64 << n) <= permutations as u64 {
        let total = 1u64 << n;
        let mut extreme = 0u64;
        for mask in 0..total {
            let s: f64 = diffs
                .iter()
                .enumerate()
                .map(|(i, &d)| if mask >> i & 1 == 1 { -d } else { d })
                .sum();
            if s.abs() >= threshold {
                extreme += 1;
            }
        }
        return extreme as f64 / total as f64;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    let mut bits = 0u64;
    let mut left = 0;
    for _ in 0..permutations {
        let mut s = 0.0;
        for &d in diffs {
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            s += if bits & 1 == 1 { -d } else { d };
            bits >>= 1;
            left -= 1;
        }
        if s.abs() >= threshold {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (permutations + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn precision_recall_examples() {
        let ranking = ["A", "B", "C", "D", "E"];
        let rel: BTreeSet<&str> = ["A", "C", "F"].into();
        let (p1, r1) = precision_recall_at_k(&ranking, &rel, 1).unwrap().unwrap();
        assert_eq!((p1, r1), (1.0, 1.0 / 3.0));
        let (p5, r5) = precision_recall_at_k(&ranking, &rel, 5).unwrap().unwrap();
        assert_eq!((p5, r5), (0.4, 2.0 / 3.0));

        let (p, r) = precision_recall_at_k(&["A"], &["A"].into(), 5).unwrap().unwrap();
        assert_eq!((p, r), (0.2, 1.0));
        let (p, r) = precision_recall_at_k(&["B"], &["A"].into(), 1).unwrap().unwrap();
        assert_eq!((p, r), (0.0, 0.0));
        assert_eq!(precision_recall_at_k(&["B"], &BTreeSet::new(), 1).unwrap(), None);
        assert!(precision_recall_at_k(&["B"], &["B"].into(), 0).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let (ids, g) = grades_in_order(&[2, 0, 1]);
        let v = ndcg_at_k(&ids, &g, 3).unwrap();
        // DCG = 3 + 1/2 = 3.5; IDCG = 3 + 1/log2(3)
        let idcg = 3.0 + 1.0 / libm::log2(3.0);
        assert!((v - 3.5 / idcg).abs() < 1e-15);
        assert!((v - 0.96394).abs() < 1e-5);

        let (ids, g) = grades_in_order(&[2, 1, 0]);
        assert_eq!(ndcg_at_k(&ids, &g, 20), Some(1.0));

        let mut g: BTreeMap<String, i32> = BTreeMap::new();
        g.insert("x".into(), 0);
        g.insert("elsewhere".into(), 2);
        assert_eq!(ndcg_at_k(&["x", "unjudged"], &g, 20), Some(0.0));
        let none: BTreeMap<String, i32> = [("x".into(), 0)].into();
        assert_eq!(ndcg_at_k(&["x"], &none, 20), None);
    }

    #[test]
    fn err_examples() {
        let (ids, g) = grades_in_order(&[1]);
        assert_eq!(err_at_k(&ids, &g, 20, 1), 0.5);
        let (ids, g) = grades_in_order(&[1, 1]);
        assert_eq!(err_at_k(&ids, &g, 20, 1), 0.625);
        let (ids, g) = grades_in_order(&[0, 0, 0]);
        assert_eq!(err_at_k(&ids, &g, 20, 2), 0.0);
    }

    #[test]
    fn wtl_examples() {
        let a: BTreeMap<&str, f64> = [("x", 1.0), ("y", 2.0), ("z", 3.0)].into();
        assert_eq!(win_tie_loss(&a, &a, 1e-9).unwrap(), WinTieLoss { wins: 0, ties: 3, losses: 0 });
        let b: BTreeMap<&str, f64> = a.iter().map(|(k, v)| (*k, v - 1.0)).collect();
        assert_eq!(win_tie_loss(&a, &b, 1e-9).unwrap(), WinTieLoss { wins: 3, ties: 0, losses: 0 });
        let c: BTreeMap<&str, f64> = [("x", 0.0), ("y", 2.0), ("z", 4.0)].into();
        assert_eq!(win_tie_loss(&a, &c, 1e-9).unwrap(), WinTieLoss { wins: 1, ties: 1, losses: 1 });
        let d: BTreeMap<&str, f64> = [("x", 0.0)].into();
        assert!(win_tie_loss(&a, &d, 1e-9).is_err());
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permutation_test(&[0.0; 8], 10_000, 1), 1.0);
        assert_eq!(permutation_test(&[0.0; 40], 10_000, 1), 1.0);
        assert_eq!(permutation_test(&[1.0; 10], 10_000, 1), 2.0 / 1024.0);
        let diffs = vec![0.3, -0.1, 0.25, 0.4, 0.05, 0.2, -0.05, 0.3, 0.1, 0.15, 0.2, 0.3, 0.1, 0.35, 0.2];
        let neg: Vec<f64> = diffs.iter().map(|d| -d).collect();
        assert_eq!(permutation_test(&diffs, 1000, 9), permutation_test(&neg, 1000, 9));
        assert!(permutation_test(&diffs, 1000, 9) < 0.05);
    }

    proptest::proptest! {
        #[test]
        fn metrics_stay_in_unit_interval(grades in proptest::collection::vec(-1i32..4, 1..30)) {
            let (ids, g) = grades_in_order(&grades);
            if let Some(v) = ndcg_at_k(&ids, &g, 20) {
                proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            let e = err_at_k(&ids, &g, 20, 3);
            proptest::prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn prepending_top_document_never_hurts(grades in proptest::collection::vec(0i32..4, 1..25)) {
            let (ids, mut g) = grades_in_order(&grades);
            let mut with_top = vec![String::from("top")];
            with_top.extend(ids.iter().cloned());
            g.insert("top".into(), 3);
            let before_n = ndcg_at_k(&ids, &g, 20).unwrap();
            let after_n = ndcg_at_k(&with_top, &g, 20).unwrap();
            proptest::prop_assert!(after_n >= before_n - 1e-12);
            let before_e = err_at_k(&ids, &g, 20, 3);
            let after_e = err_at_k(&with_top, &g, 20, 3);
            proptest::prop_assert!(after_e >= before_e - 1e-12);
        }
    }
}
