//! Maximum-weight one-to-one assignment between two cluster sets.
//!
//! Implemented as the Hungarian algorithm with potentials on a square,
//! zero-padded cost matrix. Weights must be non-negative; padding cells carry
//! weight zero, so leaving a row or column unmatched never beats a positive
//! real match and the result equals the optimum over partial matchings.

/// Returns the maximum total weight and the matching as (row, col) pairs
/// restricted to real cells. `weights[i][j]` is the gain of matching row i to
/// column j; all entries must be finite and non-negative.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let n = weights.len();
    let m = weights.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 {
        return (0.0, Vec::new());
    }
    debug_assert!(weights.iter().all(|r| r.len() == m));
    debug_assert!(weights.iter().flatten().all(|w| w.is_finite() && *w >= 0.0));
    let dim = n.max(m);
    let cost = |i: usize, j: usize| -> f64 {
        if i < n && j < m {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // Potentials u, v and column matching p, 1-indexed with a virtual 0th
    // column used to start each augmenting search.
    let mut u = vec![0.0f64; dim + 1];
    let mut v = vec![0.0f64; dim + 1];
    let mut p = vec![0usize; dim + 1];
    let mut way = vec![0usize; dim + 1];
    for i in 1..=dim {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; dim + 1];
        let mut used = vec![false; dim + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=dim {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=dim {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut total = 0.0;
    let mut matching = Vec::new();
    for j in 1..=dim {
        let i = p[j];
        if i >= 1 && i <= n && j <= m {
            total += weights[i - 1][j - 1];
            matching.push((i - 1, j - 1));
        }
    }
    matching.sort_unstable();
    (total, matching)
}

/// Exhaustive-search oracle for the assignment optimum. Only viable for tiny
/// inputs; tests compare it against the solver.
pub fn exhaustive_assignment(weights: &[Vec<f64>]) -> f64 {
    let n = weights.len();
    let m = weights.first().map_or(0, |r| r.len());
    fn recurse(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == weights.len() {
            return 0.0;
        }
        // Leaving this row unmatched is always an option.
        let mut best = recurse(weights, row + 1, used);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                let w = weights[row][j] + recurse(weights, row + 1, used);
                used[j] = false;
                if w > best {
                    best = w;
                }
            }
        }
        best
    }
    if n == 0 || m == 0 {
        return 0.0;
    }
    recurse(weights, 0, &mut vec![false; m])
}
