//! Property tests against the brute-force references in `vidsift-brute`.

use std::collections::BTreeSet;

use proptest::prelude::*;

use crate::airborne::greedy_assign;
use crate::feature::{FeatureKind, FeatureVector, MOTION_BINS};
use crate::geometry::AtomCoord;
use crate::lsh::{LshIndex, Posting};
use crate::search::{
    best_extent, coverage_counts, dp_full_matches, greedy_full_matches, DpMatrix, DpWeights,
    Location, PartialMatchSet,
};
use crate::FeatureTree;

fn oracle_weights(w: &DpWeights) -> vidsift_brute::AlignWeights {
    vidsift_brute::AlignWeights {
        insertion: w.insertion,
        deletion: w.deletion,
        continuation: w.continuation,
        matched: w.r#match,
    }
}

fn binomial_weight(k: u32, i: u32, j: u32) -> f64 {
    vidsift_brute::binomial(k as u64 - 1, i as u64) * vidsift_brute::binomial(k as u64 - 1, j as u64)
}

fn matrix(max_docs: usize, max_comps: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max_docs, 1..=max_comps).prop_flat_map(|(d, c)| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), c), d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Each level of the overlapping pyramid averages four children, so the
    // root weights leaf (i, j) by C(k-1, i) C(k-1, j) / 4^(k-1).
    #[test]
    fn activity_root_is_binomially_weighted(
        depth in 1u32..=4,
        leaves in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let tree = FeatureTree::from_leaves(FeatureKind::Activity, depth, AtomCoord::new(0, 0, 0), |i, j| {
            FeatureVector::Activity(leaves[(j * 4 + i) as usize])
        }).unwrap();
        let scale = 4f64.powi(depth as i32 - 1);
        let mut expected = 0.0;
        for j in 0..depth {
            for i in 0..depth {
                expected += binomial_weight(depth, i, j) * leaves[(j * 4 + i) as usize] / scale;
            }
        }
        let root = tree.root().activity().unwrap();
        prop_assert!((root - expected).abs() < 1e-12, "{root} vs {expected}");
    }

    #[test]
    fn motion_root_sums_weighted_leaf_counts(
        depth in 1u32..=3,
        counts in prop::collection::vec(prop::array::uniform9(0u32..50), 9),
    ) {
        let tree = FeatureTree::from_leaves(FeatureKind::Motion, depth, AtomCoord::new(0, 0, 0), |i, j| {
            FeatureVector::Motion(counts[(j * 3 + i) as usize])
        }).unwrap();
        let FeatureVector::Motion(root) = tree.root() else { panic!("motion root") };
        for b in 0..MOTION_BINS {
            let mut expected = 0.0;
            for j in 0..depth {
                for i in 0..depth {
                    expected += binomial_weight(depth, i, j) * counts[(j * 3 + i) as usize][b] as f64;
                }
            }
            prop_assert_eq!(root[b] as f64, expected);
        }
    }

    #[test]
    fn persistence_root_is_the_leaf_maximum(
        depth in 1u32..=4,
        leaves in prop::collection::vec(0u32..1000, 16),
    ) {
        let tree = FeatureTree::from_leaves(FeatureKind::Persistence, depth, AtomCoord::new(0, 0, 0), |i, j| {
            FeatureVector::Persistence(leaves[(j * 4 + i) as usize])
        }).unwrap();
        let expected = (0..depth)
            .flat_map(|j| (0..depth).map(move |i| (j * 4 + i) as usize))
            .map(|n| leaves[n])
            .max()
            .unwrap();
        prop_assert_eq!(tree.root(), &FeatureVector::Persistence(expected));
    }

    #[test]
    fn internal_nodes_never_change_when_rebuilt(
        leaves in prop::collection::vec(0.0f64..1.0, 9),
    ) {
        let build = || FeatureTree::from_leaves(FeatureKind::Activity, 3, AtomCoord::new(2, 5, 7), |i, j| {
            FeatureVector::Activity(leaves[(j * 3 + i) as usize])
        }).unwrap();
        prop_assert_eq!(build(), build());
        prop_assert_eq!(build().flatten().len(), 14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // Integer-valued costs make ties common, which exercises tie-breaking.
    #[test]
    fn greedy_assignment_matches_the_scan_oracle(
        rows in 0usize..=6,
        cols in 0usize..=6,
        raw in prop::collection::vec(0u8..20, 36),
        gate in 1.0f64..25.0,
    ) {
        let costs: Vec<Vec<f64>> = (0..rows)
            .map(|l| (0..cols).map(|m| raw[l * 6 + m] as f64).collect())
            .collect();
        let got = greedy_assign(&costs, gate);
        prop_assert_eq!(&got, &vidsift_brute::greedy_assignment(&costs, gate));
        let mut r = BTreeSet::new();
        let mut c = BTreeSet::new();
        for &(l, m, cost) in &got {
            prop_assert!(r.insert(l) && c.insert(m));
            prop_assert!(cost < gate);
        }
    }

    // With a single tracklet the rule reduces to nearest-candidate search.
    #[test]
    fn one_row_reduces_to_nearest_neighbor(
        points in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..12),
        at in (0.0f64..100.0, 0.0f64..100.0),
    ) {
        let row: Vec<f64> = points
            .iter()
            .map(|p| ((p.0 - at.0).powi(2) + (p.1 - at.1).powi(2)).sqrt())
            .collect();
        let got = greedy_assign(std::slice::from_ref(&row), f64::INFINITY);
        let nearest = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &d)| if d < row[b] { i } else { b });
        prop_assert_eq!(got, vec![(0, nearest, row[nearest])]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn dp_maximum_matches_path_enumeration(m in matrix(8, 5)) {
        let w = DpWeights::default();
        let set = PartialMatchSet::from_indicator(&m);
        let got = DpMatrix::fill(&set, &w, None).max().map_or(0.0, |b| b.0);
        prop_assert_eq!(got, vidsift_brute::alignment_value(&m, &oracle_weights(&w)));
    }

    #[test]
    fn dp_paths_are_disjoint_and_non_increasing(m in matrix(12, 4), threshold in 0.0f64..8.0) {
        let set = PartialMatchSet::from_indicator(&m);
        let found = dp_full_matches(&set, &DpWeights::default(), threshold, 100);
        let mut cells = BTreeSet::new();
        let mut last = f64::INFINITY;
        for f in &found {
            prop_assert!(f.score > threshold && f.score <= last);
            last = f.score;
            for c in &f.path {
                prop_assert!(cells.insert((c.document, c.component)));
                prop_assert!(c.document >= f.start && c.document <= f.end);
            }
        }
    }

    // Adding partial matches never lowers the best DP value.
    #[test]
    fn dp_value_is_monotone_in_matches(m in matrix(8, 4), flip in (0usize..8, 0usize..4)) {
        let w = DpWeights::default();
        let before = DpMatrix::fill(&PartialMatchSet::from_indicator(&m), &w, None).max().unwrap().0;
        let mut more = m.clone();
        let (t, a) = (flip.0 % m.len(), flip.1 % m[0].len());
        more[t][a] = true;
        let after = DpMatrix::fill(&PartialMatchSet::from_indicator(&more), &w, None).max().unwrap().0;
        prop_assert!(after >= before);
    }

    #[test]
    fn coverage_grows_and_extent_is_argmax(
        hits in prop::collection::vec((0u32..20, 0u32..4, 0u32..4), 1..30),
        lambda in 0.0f64..2.0,
        horizon in 1u32..12,
    ) {
        let mut set = PartialMatchSet::new(20, 2);
        for (i, &(t, u, v)) in hits.iter().enumerate() {
            set.add(i % 2, Location { t, u, v, track: None });
        }
        for start in set.documents_with_hits() {
            let counts = coverage_counts(&set, start, horizon);
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            let (delta, value) = best_extent(|d| counts[d as usize], lambda, horizon);
            let brute = (1..=horizon)
                .map(|d| (counts[d as usize] as f64 - lambda * d as f64, d))
                .fold((f64::NEG_INFINITY, 0), |b, x| if x.0 > b.0 { x } else { b });
            prop_assert_eq!((value, delta), brute);
        }
        let found = greedy_full_matches(&set, lambda, horizon, f64::NEG_INFINITY);
        for (i, a) in found.iter().enumerate() {
            for b in &found[i + 1..] {
                prop_assert!(!a.overlaps(b.start, b.end));
                prop_assert!(a.score >= b.score);
            }
        }
    }
}

fn random_tree(depth: u32, values: &[f64], t: u32) -> FeatureTree {
    FeatureTree::from_leaves(FeatureKind::Activity, depth, AtomCoord::new(0, 0, t), |i, j| {
        FeatureVector::Activity(values[(j * depth + i) as usize])
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn every_inserted_tree_finds_itself(
        entries in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 4), 0u32..3, 0u32..3), 1000),
        seed in any::<u64>(),
    ) {
        let mut index = LshIndex::new(FeatureKind::Activity, 5, 0.25, 8, seed, false).unwrap();
        let trees: Vec<(FeatureTree, u32, u32)> = entries
            .iter()
            .enumerate()
            .map(|(t, (vals, u, v))| (random_tree(2, vals, t as u32), *u, *v))
            .collect();
        for (tree, u, v) in &trees {
            index.insert(tree, AtomCoord::new(*u, *v, tree.anchor.t)).unwrap();
        }
        prop_assert!(index.entry_count() <= 8 * trees.len());
        for (tree, u, v) in &trees {
            let hits = index.lookup(tree, *u, *v).unwrap();
            prop_assert!(hits.contains(&Posting::doc(tree.anchor.t)));
        }

        let mut reversed = LshIndex::new(FeatureKind::Activity, 5, 0.25, 8, seed, false).unwrap();
        for (tree, u, v) in trees.iter().rev() {
            reversed.insert(tree, AtomCoord::new(*u, *v, tree.anchor.t)).unwrap();
        }
        prop_assert_eq!(&reversed, &index);
    }
}
