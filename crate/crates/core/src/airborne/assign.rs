/// Greedy one-to-one assignment: repeatedly take the cheapest remaining
/// `(row, col)` pair whose cost is below `gate` and retire both ends. Ties
/// resolve to the smaller row, then the smaller column. Returns
/// `(row, col, cost)` in selection order.
pub fn greedy_assign(costs: &[Vec<f64>], gate: f64) -> Vec<(usize, usize, f64)> {
    let cols = costs.first().map_or(0, Vec::len);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (l, row) in costs.iter().enumerate() {
        assert_eq!(row.len(), cols, "ragged cost matrix");
        for (m, &c) in row.iter().enumerate() {
            if c < gate {
                pairs.push((c, l, m));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; costs.len()];
    let mut col_used = vec![false; cols];
    let mut out = Vec::new();
    for (c, l, m) in pairs {
        if !row_used[l] && !col_used[m] {
            row_used[l] = true;
            col_used[m] = true;
            out.push((l, m, c));
        }
    }
    out
}
