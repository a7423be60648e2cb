//! Exact minimum-cost bipartite assignment (shortest augmenting path with
//! potentials, O(n^3)).

use ndarray::ArrayView2;

/// Returns `(assignment, total_cost)` for a square cost matrix, where
/// `assignment[row] = column`.
pub(crate) fn min_cost_assignment(cost: &ArrayView2<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // 1-based arrays with a sentinel slot 0, potentials u/v.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut match_col = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)

    for row in 1..=n {
        match_col[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if match_col[j] > 0 {
            assignment[match_col[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    (assignment, total)
}
