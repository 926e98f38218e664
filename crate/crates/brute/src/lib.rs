//! Slow, obviously-correct reference computations. Nothing here depends on
//! `vidsift-core`, so the test suites can compare the two.

/// Step weights of the alignment, in the same units as the DP.
#[derive(Clone, Copy, Debug)]
pub struct AlignWeights {
    /// Miss entered from the left (a skipped component).
    pub insertion: f64,
    /// Miss entered from above (a document without a hit).
    pub deletion: f64,
    pub continuation: f64,
    pub matched: f64,
}

/// Best local-alignment value by enumerating every monotone path.
///
/// A path opens on a hit cell worth the match weight. From `(t, a)` it may
/// go to `(t+1, a+1)`, `(t+1, a)` or `(t, a+1)`. A hit entered diagonally
/// earns the match weight and one entered from above earns the continuation
/// weight; a hit cannot be entered from the left. A miss entered from above
/// costs the deletion weight, one entered from the left costs the insertion
/// weight, and a miss cannot be entered diagonally.
pub fn alignment_value(m: &[Vec<bool>], w: &AlignWeights) -> f64 {
    fn walk(m: &[Vec<bool>], w: &AlignWeights, t: usize, a: usize, value: f64, best: &mut f64) {
        *best = best.max(value);
        let (docs, comps) = (m.len(), m[0].len());
        for (dt, da) in [(1, 1), (1, 0), (0, 1)] {
            let (nt, na) = (t + dt, a + da);
            if nt >= docs || na >= comps {
                continue;
            }
            let gain = match (m[nt][na], dt, da) {
                (true, 1, 1) => w.matched,
                (true, 1, 0) => w.continuation,
                (false, 1, 0) => w.deletion,
                (false, 0, 1) => w.insertion,
                _ => continue,
            };
            walk(m, w, nt, na, value + gain, best);
        }
    }

    let mut best: f64 = 0.0;
    for (t, row) in m.iter().enumerate() {
        for (a, &hit) in row.iter().enumerate() {
            if hit {
                walk(m, w, t, a, w.matched, &mut best);
            }
        }
    }
    best
}

/// Greedy assignment by repeated full scans for the cheapest free pair.
/// Ties go to the first pair in row-major order.
pub fn greedy_assignment(costs: &[Vec<f64>], gate: f64) -> Vec<(usize, usize, f64)> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    let mut row_free = vec![true; rows];
    let mut col_free = vec![true; cols];
    let mut out = Vec::new();
    loop {
        let mut pick: Option<(usize, usize)> = None;
        for l in 0..rows {
            for m in 0..cols {
                if !row_free[l] || !col_free[m] || costs[l][m].partial_cmp(&gate) != Some(std::cmp::Ordering::Less) {
                    continue;
                }
                if pick.is_none_or(|(pl, pm)| costs[l][m] < costs[pl][pm]) {
                    pick = Some((l, m));
                }
            }
        }
        let Some((l, m)) = pick else { break };
        row_free[l] = false;
        col_free[m] = false;
        out.push((l, m, costs[l][m]));
    }
    out
}

/// Collision probability of two points at distance `c` under
/// `floor((a·x + b) / r)` with Gaussian `a`, by Simpson integration of
/// `∫_0^r (1/c) f(t/c) (1 - t/r) dt` where `f` is the density of `|N(0, 1)|`.
pub fn collision_probability(c: f64, r: f64) -> f64 {
    if c == 0.0 {
        return 1.0;
    }
    let density = |s: f64| 2.0 * (-s * s / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let g = |t: f64| density(t / c) / c * (1.0 - t / r);
    let n = 20_000;
    let h = r / n as f64;
    let mut sum = g(0.0) + g(r);
    for i in 1..n {
        sum += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Whether `needle` occurs in order, not necessarily contiguously, in `hay`.
pub fn is_subsequence(needle: &[u32], hay: &[u32]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

pub fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
