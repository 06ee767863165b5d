use std::collections::{BTreeMap, HashMap};

use super::EvalError;

/// A labeling of items into clusters. Labels are dense, `0..n_labels`, in
/// order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    ids: Vec<String>,
    labels: Vec<usize>,
    n_labels: usize,
}

impl Partition {
    /// Builds a partition from arbitrary label values, densifying them.
    pub fn new<L: Ord + Clone>(ids: Vec<String>, labels: &[L]) -> Result<Self, EvalError> {
        if ids.len() != labels.len() {
            return Err(EvalError::PartitionMismatch(format!("{} ids but {} labels", ids.len(), labels.len())));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(EvalError::PartitionMismatch(format!("duplicate item id {dup:?}")));
        }
        let mut map: BTreeMap<L, usize> = BTreeMap::new();
        let dense = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Ok(Partition { ids, labels: dense, n_labels: map.len() })
    }

    /// Partition over items named `0..labels.len()`.
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::new(ids, labels).expect("index ids are unique")
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Cross-tabulation of item pairs by agreement between two partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairCounts {
    /// Same cluster in both.
    pub a: u64,
    /// Same in the first, different in the second.
    pub b: u64,
    /// Different in the first, same in the second.
    pub c: u64,
    /// Different in both.
    pub d: u64,
}

impl PairCounts {
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Pair counts via the contingency table. The partitions must cover the same
/// item ids; order may differ.
pub fn pair_counts(p: &Partition, q: &Partition) -> Result<PairCounts, EvalError> {
    if p.len() != q.len() {
        return Err(EvalError::PartitionMismatch(format!("{} items vs {} items", p.len(), q.len())));
    }
    let q_labels: Vec<usize> = if p.ids == q.ids {
        q.labels.clone()
    } else {
        let index: HashMap<&str, usize> = q.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        p.ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| q.labels[i])
                    .ok_or_else(|| EvalError::PartitionMismatch(format!("item {id:?} missing from second partition")))
            })
            .collect::<Result<_, _>>()?
    };

    let mut table = vec![0u64; p.n_labels * q.n_labels];
    let mut rows = vec![0u64; p.n_labels];
    let mut cols = vec![0u64; q.n_labels];
    for (&i, &j) in p.labels.iter().zip(&q_labels) {
        table[i * q.n_labels + j] += 1;
        rows[i] += 1;
        cols[j] += 1;
    }
    let a: u64 = table.iter().map(|&v| choose2(v)).sum();
    let same_p: u64 = rows.iter().map(|&v| choose2(v)).sum();
    let same_q: u64 = cols.iter().map(|&v| choose2(v)).sum();
    let n = choose2(p.len() as u64);
    let (b, c) = (same_p - a, same_q - a);
    Ok(PairCounts { a, b, c, d: n - a - b - c })
}

/// `(A + D) / N`.
pub fn rand_index(counts: &PairCounts) -> Result<f64, EvalError> {
    match counts.n() {
        0 => Err(EvalError::NoPairs),
        n => Ok((counts.a + counts.d) as f64 / n as f64),
    }
}

/// Adjusted Rand index:
/// `[N(A+D) − ((A+B)(A+C) + (C+D)(B+D))] / [N² − ((A+B)(A+C) + (C+D)(B+D))]`,
/// evaluated in exact integer arithmetic.
///
/// The denominator equals `(A+B)(B+D) + (A+C)(C+D)`, which vanishes only when
/// both partitions are all-singletons or both are a single cluster; those
/// identical cases are defined as 1.
pub fn adjusted_rand_index(counts: &PairCounts) -> Result<f64, EvalError> {
    let PairCounts { a, b, c, d } = *counts;
    let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
    let n = a + b + c + d;
    if n == 0 {
        return Err(EvalError::NoPairs);
    }
    let expected = (a + b) * (a + c) + (c + d) * (b + d);
    let num = n * (a + d) - expected;
    let den = n * n - expected;
    if den == 0 {
        return if b == 0 && c == 0 { Ok(1.0) } else { Err(EvalError::AriUndefined) };
    }
    Ok(num as f64 / den as f64)
}

/// ARI between two partitions over the same items.
pub fn ari(p: &Partition, q: &Partition) -> Result<f64, EvalError> {
    adjusted_rand_index(&pair_counts(p, q)?)
}

/// ARI between two label vectors over the same items in the same order.
pub fn ari_labels<L: Ord + Clone>(p: &[L], q: &[L]) -> Result<f64, EvalError> {
    ari(&Partition::from_labels(p), &Partition::from_labels(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(n²) scan over all item pairs.
    fn brute_force(p: &[usize], q: &[usize]) -> PairCounts {
        let mut c = PairCounts { a: 0, b: 0, c: 0, d: 0 };
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                match (p[i] == p[j], q[i] == q[j]) {
                    (true, true) => c.a += 1,
                    (true, false) => c.b += 1,
                    (false, true) => c.c += 1,
                    (false, false) => c.d += 1,
                }
            }
        }
        c
    }

    /// Contingency-table form of Hubert and Arabie's index.
    fn hubert_arabie(p: &[usize], q: &[usize]) -> Option<f64> {
        let kp = p.iter().max().map_or(0, |m| m + 1);
        let kq = q.iter().max().map_or(0, |m| m + 1);
        let mut t = vec![vec![0f64; kq]; kp];
        for (&i, &j) in p.iter().zip(q) {
            t[i][j] += 1.0;
        }
        let c2 = |x: f64| x * (x - 1.0) / 2.0;
        let index: f64 = t.iter().flatten().map(|&v| c2(v)).sum();
        let sa: f64 = t.iter().map(|r| c2(r.iter().sum())).sum();
        let sb: f64 = (0..kq).map(|j| c2(t.iter().map(|r| r[j]).sum())).sum();
        let total = c2(p.len() as f64);
        let expected = sa * sb / total;
        let max = 0.5 * (sa + sb);
        (max != expected).then(|| (index - expected) / (max - expected))
    }

    #[test]
    fn documented_pair_counts() {
        let p = Partition::from_labels(&["a", "a", "b"]);
        assert_eq!(pair_counts(&p, &p).unwrap(), PairCounts { a: 1, b: 0, c: 0, d: 2 });

        let p = Partition::from_labels(&[1, 1, 2, 2]);
        let q = Partition::from_labels(&[1, 2, 1, 2]);
        let c = pair_counts(&p, &q).unwrap();
        assert_eq!(c, PairCounts { a: 0, b: 2, c: 2, d: 2 });
        assert!((rand_index(&c).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(adjusted_rand_index(&c).unwrap(), -0.5);
        assert_eq!(ari(&p, &p).unwrap(), 1.0);

        let one = Partition::from_labels(&[7]);
        assert_eq!(pair_counts(&one, &one).unwrap(), PairCounts { a: 0, b: 0, c: 0, d: 0 });
        assert!(matches!(rand_index(&PairCounts { a: 0, b: 0, c: 0, d: 0 }), Err(EvalError::NoPairs)));
    }

    #[test]
    fn all_same_versus_all_different() {
        let p = Partition::from_labels(&[0, 0, 0]);
        let q = Partition::from_labels(&[0, 1, 2]);
        let c = pair_counts(&p, &q).unwrap();
        assert_eq!((c.a, c.d), (0, 0));
        assert_eq!(rand_index(&c).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&c).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_identical_partitions_are_one() {
        assert_eq!(ari_labels(&[0, 0, 0], &[5, 5, 5]).unwrap(), 1.0);
        assert_eq!(ari_labels(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn id_sets_must_match() {
        let p = Partition::new(vec!["x".into(), "y".into()], &[0, 1]).unwrap();
        let q = Partition::new(vec!["x".into(), "z".into()], &[0, 1]).unwrap();
        assert!(matches!(pair_counts(&p, &q), Err(EvalError::PartitionMismatch(_))));
        let r = Partition::new(vec!["x".into()], &[0]).unwrap();
        assert!(matches!(pair_counts(&p, &r), Err(EvalError::PartitionMismatch(_))));
        assert!(Partition::new(vec!["x".into(), "x".into()], &[0, 1]).is_err());
    }

    #[test]
    fn matching_is_by_id_not_position() {
        let p = Partition::new(vec!["a".into(), "b".into(), "c".into(), "d".into()], &[0, 0, 1, 1]).unwrap();
        let q = Partition::new(vec!["d".into(), "c".into(), "b".into(), "a".into()], &[1, 1, 0, 0]).unwrap();
        assert_eq!(ari(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn labels_are_densified_in_first_appearance_order() {
        let p = Partition::from_labels(&[9, 3, 9, 4]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.n_labels(), 3);
    }

    fn labels(max_n: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2..=max_n).prop_flat_map(|n| (prop::collection::vec(0..5usize, n), prop::collection::vec(0..5usize, n)))
    }

    proptest! {
        #[test]
        fn counts_match_brute_force((p, q) in labels(30)) {
            let c = pair_counts(&Partition::from_labels(&p), &Partition::from_labels(&q)).unwrap();
            prop_assert_eq!(c, brute_force(&p, &q));
            prop_assert_eq!(c.n() as usize, p.len() * (p.len() - 1) / 2);
        }

        #[test]
        fn ari_matches_contingency_oracle((p, q) in labels(30)) {
            let got = ari_labels(&p, &q);
            match hubert_arabie(&p, &q) {
                Some(want) => prop_assert!((got.unwrap() - want).abs() < 1e-12),
                None => prop_assert_eq!(got.unwrap(), 1.0),
            }
        }

        #[test]
        fn ari_is_symmetric_and_bounded((p, q) in labels(30)) {
            let pq = ari_labels(&p, &q).unwrap();
            let qp = ari_labels(&q, &p).unwrap();
            prop_assert_eq!(pq, qp);
            prop_assert!(pq <= 1.0);
            let ri = rand_index(&pair_counts(&Partition::from_labels(&p), &Partition::from_labels(&q)).unwrap());
            if let Ok(ri) = ri {
                prop_assert!((0.0..=1.0).contains(&ri));
            }
        }

        #[test]
        fn ari_ignores_relabeling((p, q) in labels(30), shift in 1usize..5) {
            let relabeled: Vec<usize> = q.iter().map(|l| (l + shift) % 5 * 7).collect();
            prop_assert_eq!(ari_labels(&p, &q).unwrap(), ari_labels(&p, &relabeled).unwrap());
        }

        #[test]
        fn ari_of_self_is_one(p in prop::collection::vec(0..5usize, 2..30)) {
            prop_assume!(p.iter().any(|&l| l != p[0]));
            prop_assert_eq!(ari_labels(&p, &p).unwrap(), 1.0);
        }
    }
}
