//! Exact linear assignment on small square matrices (Hungarian algorithm
//! with potentials, O(k^3)). Used to align partition labels with the
//! planted blocks.

/// Maximum-weight assignment. `weight[r][c]` is the value of matching row r
/// to column c. Returns (optimal value, sigma) where `sigma[c]` is the row
/// matched to column c, chosen lexicographically smallest among optima.
pub fn max_assignment(weight: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let k = weight.len();
    debug_assert!(weight.iter().all(|row| row.len() == k));
    let best = max_assignment_value(weight, &[]);
    // Fix sigma column by column, keeping the total achievable.
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    for _col in 0..k {
        let mut chosen = None;
        for row in 0..k {
            if fixed.contains(&row) {
                continue;
            }
            fixed.push(row);
            if max_assignment_value(weight, &fixed) == best {
                chosen = Some(row);
                break;
            }
            fixed.pop();
        }
        debug_assert!(chosen.is_some(), "assignment fix-up must succeed");
        if chosen.is_none() {
            // Unreachable for consistent inputs; fall back to any free row.
            let row = (0..k).find(|r| !fixed.contains(r)).unwrap();
            fixed.push(row);
        }
    }
    (best, fixed)
}

/// Optimal total weight when the first `fixed.len()` columns are pinned to
/// the given rows.
fn max_assignment_value(weight: &[Vec<i64>], fixed: &[usize]) -> i64 {
    let k = weight.len();
    let mut pinned: i64 = 0;
    for (col, &row) in fixed.iter().enumerate() {
        pinned += weight[row][col];
    }
    let free_cols: Vec<usize> = (fixed.len()..k).collect();
    let free_rows: Vec<usize> = (0..k).filter(|r| !fixed.contains(r)).collect();
    if free_cols.is_empty() {
        return pinned;
    }
    // Minimise the negated weights on the free submatrix.
    let cost: Vec<Vec<i64>> = free_rows
        .iter()
        .map(|&r| free_cols.iter().map(|&c| -weight[r][c]).collect())
        .collect();
    pinned - min_assignment_cost(&cost)
}

/// Hungarian algorithm with row/column potentials on a square cost matrix.
fn min_assignment_cost(cost: &[Vec<i64>]) -> i64 {
    let n = cost.len();
    if n == 0 {
        return 0;
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based helpers, classic formulation.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[col] = row
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0;
    for j in 1..=n {
        total += cost[matched_row[j] - 1][j - 1];
    }
    total
}
