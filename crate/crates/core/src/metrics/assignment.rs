//! Exact minimum-cost perfect matching on a dense square cost matrix.
//!
//! Shortest-augmenting-path algorithm with dual potentials (Hungarian
//! class), O(n^3) time and O(n^2) memory. Deterministic: ties are broken by
//! column index.

use ndarray::Array2;

/// Minimum-cost assignment of rows to columns.
///
/// Returns `(assignment, total)` where `assignment[row] = col`.
pub fn min_cost_assignment(cost: &Array2<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    assert!(n > 0);

    // 1-indexed working arrays; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
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
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
        total += cost[[p[j] - 1, j - 1]];
    }
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn brute_force(cost: &Array2<f64>) -> f64 {
        // enumerate all permutations (n <= 7)
        fn go(cost: &Array2<f64>, row: usize, cols: &mut Vec<usize>, acc: f64, best: &mut f64) {
            let n = cost.nrows();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for idx in 0..cols.len() {
                let c = cols.remove(idx);
                go(cost, row + 1, cols, acc + cost[[row, c]], best);
                cols.insert(idx, c);
            }
        }
        let mut best = f64::INFINITY;
        let mut cols: Vec<usize> = (0..cost.nrows()).collect();
        go(cost, 0, &mut cols, 0.0, &mut best);
        best
    }

    #[test]
    fn matches_identity_on_diagonal_dominant() {
        let cost = array![[0.0, 5.0], [5.0, 0.0]];
        let (asg, total) = min_cost_assignment(&cost);
        assert_eq!(asg, vec![0, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        use rand::Rng;
        let mut rng = crate::rng::substream(314, &[1]);
        for n in 1..=7 {
            for _ in 0..20 {
                let mut cost = Array2::zeros((n, n));
                for v in cost.iter_mut() {
                    *v = rng.gen_range(0.0..10.0);
                }
                let (asg, total) = min_cost_assignment(&cost);
                // valid permutation
                let mut seen = vec![false; n];
                for &c in &asg {
                    assert!(!seen[c]);
                    seen[c] = true;
                }
                let expected = brute_force(&cost);
                assert!(
                    (total - expected).abs() < 1e-9,
                    "n={n}: got {total}, brute force {expected}"
                );
            }
        }
    }

    #[test]
    fn handles_negative_costs() {
        let cost = array![[-1.0, 3.0], [2.0, -4.0]];
        let (_, total) = min_cost_assignment(&cost);
        assert!((total - (-5.0)).abs() < 1e-12);
    }
}
