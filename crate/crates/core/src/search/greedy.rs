//! Greedy segment selection with the value `v(Δ) = exp(|R(Δ)| − λΔ)`.

use std::collections::BTreeSet;

use super::matches::{FullMatch, PathCell};
use super::partial::PartialMatchSet;

/// `Δ* = argmax_{1 ≤ Δ ≤ horizon} |R(Δ)| − λΔ`, ties to the smallest `Δ`.
/// Returns `Δ*` and the log-value at it.
pub fn best_extent(r: impl Fn(u32) -> usize, lambda: f64, horizon: u32) -> (u32, f64) {
    let mut best = (1, f64::NEG_INFINITY);
    for delta in 1..=horizon.max(1) {
        let v = r(delta) as f64 - lambda * delta as f64;
        if v > best.1 {
            best = (delta, v);
        }
    }
    best
}

/// `|R_τ(Δ)|` for `Δ = 0..=horizon`: distinct `(u, v)` positions matched by
/// any component in documents `τ..=τ+Δ`.
pub fn coverage_counts(m: &PartialMatchSet, start: u32, horizon: u32) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(horizon as usize + 1);
    for delta in 0..=horizon {
        let t = start + delta;
        if t < m.documents {
            for a in 0..m.components() {
                for l in m.locations(t, a) {
                    seen.insert((l.u, l.v));
                }
            }
        }
        out.push(seen.len());
    }
    out
}

/// Evaluates every start with at least one hit, keeps each start's best
/// segment, then selects non-overlapping segments by descending log-value.
/// Segments scoring at or below `threshold` are dropped.
pub fn greedy_full_matches(
    m: &PartialMatchSet,
    lambda: f64,
    horizon: u32,
    threshold: f64,
) -> Vec<FullMatch> {
    let mut candidates: Vec<(f64, u32, u32)> = m
        .documents_with_hits()
        .into_iter()
        .map(|start| {
            let counts = coverage_counts(m, start, horizon);
            let (delta, value) = best_extent(|d| counts[d as usize], lambda, horizon);
            (value, start, delta)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let last = m.documents.saturating_sub(1);
    let mut out: Vec<FullMatch> = Vec::new();
    for (value, start, delta) in candidates {
        if value <= threshold {
            break;
        }
        let end = (start + delta).min(last.max(start));
        if out.iter().any(|f| f.overlaps(start, end)) {
            continue;
        }
        let mut path = Vec::new();
        for t in start..=end {
            for a in 0..m.components() {
                let locations = m.locations(t, a);
                if !locations.is_empty() {
                    path.push(PathCell {
                        document: t,
                        component: a,
                        step: None,
                        locations: locations.to_vec(),
                    });
                }
            }
        }
        out.push(FullMatch {
            start,
            end,
            score: value,
            path,
            distortions: None,
        });
    }
    out
}
