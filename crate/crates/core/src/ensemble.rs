//! Ensemble states and initial laws.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// A time-stamped `N x d` position array: the empirical measure at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub t: f64,
    pub positions: Array2<f64>,
}

impl EnsembleState {
    pub fn new(t: f64, positions: Array2<f64>) -> Result<Self> {
        if positions.nrows() == 0 || positions.ncols() == 0 {
            return Err(Error::invalid_param("positions", "must be non-empty"));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("positions", "must be finite"));
        }
        Ok(Self { t, positions })
    }

    pub fn from_rows(t: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid_param("positions", "must be non-empty"));
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let positions = Array2::from_shape_vec((n, d), flat).expect("shape agrees");
        Self::new(t, positions)
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.positions.view()
    }

    /// `(1/N) sum_i |x_i - mean|^2` summed over components.
    pub fn variance(&self) -> f64 {
        let n = self.n() as f64;
        let mean = self.positions.mean_axis(ndarray::Axis(0)).expect("n >= 1");
        self.positions
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(mean.iter())
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    /// Largest pairwise distance in the ensemble.
    pub fn diameter(&self) -> f64 {
        let n = self.n();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d: f64 = (0..self.dim())
                    .map(|k| {
                        let d = self.positions[[i, k]] - self.positions[[j, k]];
                        d * d
                    })
                    .sum();
                best = best.max(d.sqrt());
            }
        }
        best
    }
}

/// Initial law for position ensembles. Every variant has finite fourth
/// moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Componentwise uniform on `[lo, hi]^d`.
    UniformBox { lo: f64, hi: f64 },
    /// Independent Gaussian per component.
    GaussianDiag { mean: Vec<f64>, sd: Vec<f64> },
    /// Uniform over a finite set of atoms (a Dirac for a single atom).
    Atoms { points: Vec<Vec<f64>> },
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::UniformBox { lo: -3.0, hi: 3.0 }
    }
}

impl InitialLaw {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            InitialLaw::UniformBox { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid_param("init", "uniform box needs lo <= hi, finite"));
                }
            }
            InitialLaw::GaussianDiag { mean, sd } => {
                if mean.len() != dim || sd.len() != dim {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        actual: mean.len().max(sd.len()),
                    });
                }
                if sd.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                    return Err(Error::invalid_param("init", "gaussian sd must be >= 0"));
                }
            }
            InitialLaw::Atoms { points } => {
                if points.is_empty() {
                    return Err(Error::invalid_param("init", "atom list must be non-empty"));
                }
                for p in points {
                    if p.len() != dim {
                        return Err(Error::DimMismatch {
                            expected: dim,
                            actual: p.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Draw one point with a caller-provided generator.
    pub fn sample_one(&self, dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>> {
        self.validate(dim)?;
        let mut row = vec![0.0; dim];
        match self {
            InitialLaw::UniformBox { lo, hi } => {
                if lo == hi {
                    row.fill(*lo);
                } else {
                    rng::fill_uniform(rng, *lo, *hi, &mut row);
                }
            }
            InitialLaw::GaussianDiag { mean, sd } => {
                rng::fill_standard_normal(rng, &mut row);
                for k in 0..dim {
                    row[k] = mean[k] + sd[k] * row[k];
                }
            }
            InitialLaw::Atoms { points } => {
                let idx = rng.gen_range(0..points.len());
                row.copy_from_slice(&points[idx]);
            }
        }
        Ok(row)
    }

    /// Draw `n` i.i.d. points. Particle `i` owns the substream
    /// `[INIT, tag, i]` of `seed`, so the draw is independent of scheduling.
    pub fn sample(&self, n: usize, dim: usize, seed: u64, tag: u64) -> Result<Array2<f64>> {
        self.validate(dim)?;
        let mut out = Array2::zeros((n, dim));
        for i in 0..n {
            let mut rng = rng::substream(seed, &[stream::INIT, tag, i as u64]);
            let row = self.sample_one(dim, &mut rng)?;
            for k in 0..dim {
                out[[i, k]] = row[k];
            }
        }
        Ok(out)
    }
}
