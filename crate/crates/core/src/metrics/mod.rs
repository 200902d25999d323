//! Distances between empirical measures, and between empirical measures and
//! grid densities.
//!
//! `w2_1d` is the exact 1D 2-Wasserstein distance via sorted quantile
//! functions; `w2_assignment` is the exact multi-dimensional distance through
//! a minimum-cost matching (capped at n = 2048 by its cubic cost);
//! `w2_sliced` is the scalable surrogate for larger clouds.

mod assignment;

pub use assignment::min_cost_assignment;

use ndarray::{Array2, ArrayView2};

use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::math::pairwise_sum_by;
use crate::pde1d::GridDensity;
use crate::rng::{self, stream};

/// Budget for the exact assignment solver.
pub const ASSIGNMENT_MAX_N: usize = 2048;

/// A uniformly weighted point cloud.
#[derive(Debug, Clone)]
pub struct Sample {
    points: Array2<f64>,
}

impl Sample {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::invalid_param("points", "need n >= 1"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("points", "must be finite"));
        }
        Ok(Self { points })
    }

    pub fn from_1d(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(Array2::from_shape_vec((n, 1), values.to_vec()).expect("shape"))
    }

    pub fn from_state(state: &EnsembleState) -> Self {
        Self {
            points: state.positions.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    fn column_sorted(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.column(0).to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }
}

/// Exact 1D 2-Wasserstein distance.
///
/// Equal sizes pair sorted order statistics. Unequal sizes are equivalent to
/// replicating each sample to the lcm of the two sizes (exact for empirical
/// quantile functions); implemented by integrating over the merged quantile
/// breakpoints `i/n` and `j/m`, which computes the same number in O(n + m)
/// without materializing the replication.
pub fn w2_1d(a: &Sample, b: &Sample) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::invalid_param("sample", "w2_1d needs d = 1"));
    }
    let xs = a.column_sorted();
    let ys = b.column_sorted();
    let n = xs.len() as u64;
    let m = ys.len() as u64;
    let scale = (n as f64) * (m as f64);
    let mut acc = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut k_prev = 0u64;
    while i < xs.len() && j < ys.len() {
        // next quantile breakpoints, scaled by n*m
        let ka = (i as u64 + 1) * m;
        let kb = (j as u64 + 1) * n;
        let k = ka.min(kb);
        let d = xs[i] - ys[j];
        acc += ((k - k_prev) as f64 / scale) * d * d;
        if ka == k {
            i += 1;
        }
        if kb == k {
            j += 1;
        }
        k_prev = k;
    }
    Ok(acc.sqrt())
}

/// Exact 2-Wasserstein distance between equally sized clouds via
/// minimum-cost matching on squared Euclidean costs.
pub fn w2_assignment(a: &Sample, b: &Sample) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid_param(
            "sample",
            format!("w2_assignment needs equal sizes, got {} vs {}", a.n(), b.n()),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let n = a.n();
    if n > ASSIGNMENT_MAX_N {
        return Err(Error::invalid_param(
            "sample",
            format!("w2_assignment capped at n = {ASSIGNMENT_MAX_N}, got {n}"),
        ));
    }
    let d = a.dim();
    let mut cost = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                let diff = a.points[[i, k]] - b.points[[j, k]];
                s += diff * diff;
            }
            cost[[i, j]] = s;
        }
    }
    let (_, total) = min_cost_assignment(&cost);
    Ok((total / n as f64).max(0.0).sqrt())
}

/// Sliced 2-Wasserstein surrogate: root-mean of squared 1D distances over
/// random unit projections. Deterministic per seed; equals `w2_1d` exactly
/// when `d = 1`.
pub fn w2_sliced(a: &Sample, b: &Sample, n_projections: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    if n_projections == 0 {
        return Err(Error::invalid_param("n_projections", "must be >= 1"));
    }
    let d = a.dim();
    let mut acc = 0.0;
    for p in 0..n_projections {
        let mut rng = rng::substream(seed, &[stream::SLICED, p as u64]);
        let mut dir = vec![0.0; d];
        loop {
            rng::fill_standard_normal(&mut rng, &mut dir);
            let norm = crate::math::norm(&dir);
            if norm > 1e-12 {
                for v in &mut dir {
                    *v /= norm;
                }
                break;
            }
        }
        let project = |s: &Sample| -> Sample {
            let vals: Vec<f64> = s
                .points
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(&dir).map(|(x, u)| x * u).sum())
                .collect();
            Sample::from_1d(&vals).expect("projection finite")
        };
        let w = w2_1d(&project(a), &project(b))?;
        acc += w * w;
    }
    Ok((acc / n_projections as f64).sqrt())
}

/// L1 distance between a 1D sample's histogram on the density's mesh and the
/// density's cell masses. Lies in `[0, 2]`.
#[derive(Debug, Clone, Copy)]
pub struct HistogramL1 {
    pub value: f64,
    /// Sample mass that fell outside the grid and was folded into the
    /// boundary cells.
    pub out_of_range: f64,
}

pub fn histogram_l1(a: &Sample, density: &GridDensity) -> Result<HistogramL1> {
    if a.dim() != 1 {
        return Err(Error::invalid_param("sample", "histogram_l1 needs d = 1"));
    }
    let n_cells = density.n_cells();
    let h = density.cell_width();
    let mut counts = vec![0.0f64; n_cells];
    let mut out_of_range = 0usize;
    for &x in a.points.column(0).iter() {
        let raw = ((x - density.x_min) / h).floor();
        let idx = if raw < 0.0 {
            out_of_range += 1;
            0
        } else if raw >= n_cells as f64 {
            out_of_range += 1;
            n_cells - 1
        } else {
            raw as usize
        };
        counts[idx] += 1.0;
    }
    let n = a.n() as f64;
    let value = pairwise_sum_by(n_cells, |c| (counts[c] / n - density.masses[c]).abs());
    Ok(HistogramL1 {
        value,
        out_of_range: out_of_range as f64 / n,
    })
}

/// Raw absolute moments `(1/n) sum |x_i|^k` for orders drawn from {1, 2, 4}.
pub fn moments(a: &Sample, orders: &[usize]) -> Result<Vec<f64>> {
    for &k in orders {
        if !matches!(k, 1 | 2 | 4) {
            return Err(Error::invalid_param("orders", format!("unsupported order {k}")));
        }
    }
    let n = a.n();
    Ok(orders
        .iter()
        .map(|&k| {
            pairwise_sum_by(n, |i| {
                let sq: f64 = a.points.row(i).iter().map(|v| v * v).sum();
                match k {
                    1 => sq.sqrt(),
                    2 => sq,
                    _ => sq * sq,
                }
            }) / n as f64
        })
        .collect())
}
