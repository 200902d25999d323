//! Small numeric helpers: fixed-order pairwise reductions and least squares.
//!
//! All reductions here run in a fixed order regardless of thread count, so
//! every caller inherits run-to-run determinism for free.

/// Pairwise (cascade) summation. Fixed association order, O(log n) error growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing a buffer.
pub fn pairwise_sum_by<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
        const BASE: usize = 32;
        if hi - lo <= BASE {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    pairwise_sum_by(xs.len(), |i| {
        let d = xs[i] - m;
        d * d
    }) / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Median; copies its input.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
///
/// Returns `(slope, intercept, slope_stderr)`; the standard error is the
/// classical residual-based estimate (NaN for fewer than 3 points).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "ols needs at least two points");
    let xm = mean(x);
    let ym = mean(y);
    let sxx = pairwise_sum_by(n, |i| (x[i] - xm) * (x[i] - xm));
    let sxy = pairwise_sum_by(n, |i| (x[i] - xm) * (y[i] - ym));
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let stderr = if n > 2 {
        let ss_res = pairwise_sum_by(n, |i| {
            let r = y[i] - intercept - slope * x[i];
            r * r
        });
        (ss_res / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}

/// Squared Euclidean norm.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
        assert!((pairwise_sum_by(xs.len(), |i| xs[i]) - naive).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        // 1 + n*eps summed naively loses the tiny terms; pairwise keeps more.
        let n = 1 << 20;
        let mut xs = vec![1e-16; n];
        xs[0] = 1.0;
        let exact = 1.0 + (n - 1) as f64 * 1e-16;
        let pw = pairwise_sum(&xs);
        assert!((pw - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (slope, intercept, stderr) = ols(&x, &y);
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((intercept + 1.0).abs() < 1e-12);
        assert!(stderr.abs() < 1e-10);
    }

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
