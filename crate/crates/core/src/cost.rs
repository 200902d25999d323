//! Objective functions and their metadata.
//!
//! A [`CostFunction`] bundles an objective `E: R^d -> R` with the metadata the
//! diagnostics need: a known minimizer when one exists, a lower bound on `E`,
//! and claimed growth constants `(C_u, C_l, M)` that the assumption checker
//! probes empirically. Built-ins are selectable by name through
//! [`CostRegistry`]; custom objectives register programmatically.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::norm_sq;

/// Claimed growth constants: `E - E_lower <= C_u (1 + |x|^2)` everywhere and
/// `E - E_lower >= C_l |x|^2` for `|x| >= radius`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthConstants {
    pub c_upper: f64,
    pub c_lower: f64,
    pub radius: f64,
}

/// A known global minimizer and its value.
#[derive(Debug, Clone, Serialize)]
pub struct KnownMin {
    pub location: Vec<f64>,
    pub value: f64,
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An objective with metadata. Evaluation is pure and thread-safe.
#[derive(Clone)]
pub struct CostFunction {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    known_min: Option<KnownMin>,
    lower_bound: f64,
    growth: Option<GrowthConstants>,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lower_bound", &self.lower_bound)
            .field("known_min", &self.known_min)
            .field("growth", &self.growth)
            .finish()
    }
}

impl CostFunction {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid_param("dim", "must be >= 1"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            known_min: None,
            lower_bound: f64::NEG_INFINITY,
            growth: None,
        })
    }

    pub fn with_known_min(mut self, location: Vec<f64>, value: f64) -> Self {
        assert_eq!(location.len(), self.dim);
        self.known_min = Some(KnownMin { location, value });
        self
    }

    pub fn with_lower_bound(mut self, lower: f64) -> Self {
        self.lower_bound = lower;
        self
    }

    pub fn with_growth(mut self, growth: GrowthConstants) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_min(&self) -> Option<&KnownMin> {
        self.known_min.as_ref()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn growth(&self) -> Option<GrowthConstants> {
        self.growth
    }

    /// Evaluate at a single point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    /// Evaluate every row of an `N x d` position array.
    pub fn eval_rows(&self, positions: &ArrayView2<'_, f64>) -> Vec<f64> {
        positions
            .rows()
            .into_iter()
            .map(|row| self.eval(row.as_slice().expect("contiguous row")))
            .collect()
    }

    /// `|x - center|^2 / 2` with minimum 0 at `center`.
    pub fn quadratic(dim: usize, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), dim);
        let c = center.clone();
        let shift_norm = norm_sq(&center).sqrt();
        // E = |x-c|^2/2 <= (|x| + |c|)^2 / 2 <= (1 + |c|)^2 (1 + |x|^2) / 2,
        // and |x-c| >= |x|/2 once |x| >= 2|c| + 1.
        let c_upper = 0.5 * (1.0 + shift_norm) * (1.0 + shift_norm) + 0.5;
        Self::new("quadratic", dim, move |x: &[f64]| {
            0.5 * x
                .iter()
                .zip(&c)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        })
        .unwrap()
        .with_known_min(center, 0.0)
        .with_lower_bound(0.0)
        .with_growth(GrowthConstants {
            c_upper,
            c_lower: 1.0 / 8.0,
            radius: 2.0 * shift_norm + 1.0,
        })
    }

    /// Shifted sphere `|x - center|^2`.
    pub fn sphere(dim: usize, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), dim);
        let c = center.clone();
        let shift_norm = norm_sq(&center).sqrt();
        let c_upper = (1.0 + shift_norm) * (1.0 + shift_norm) + 1.0;
        Self::new("sphere", dim, move |x: &[f64]| {
            x.iter()
                .zip(&c)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        })
        .unwrap()
        .with_known_min(center, 0.0)
        .with_lower_bound(0.0)
        .with_growth(GrowthConstants {
            c_upper,
            c_lower: 1.0 / 4.0,
            radius: 2.0 * shift_norm + 1.0,
        })
    }

    /// Rastrigin: `sum_k (x_k^2 - a cos(2 pi x_k) + a)`, minimum 0 at the origin.
    pub fn rastrigin(dim: usize, a: f64) -> Self {
        // E(x) = |x|^2 + a * sum(1 - cos) with the oscillation in [0, 2*a*d],
        // so E <= (1 + 2 a d)(1 + |x|^2) and E >= |x|^2.
        let c_upper = 1.0 + 2.0 * a * dim as f64;
        Self::new("rastrigin", dim, move |x: &[f64]| {
            x.iter()
                .map(|&xi| xi * xi - a * (2.0 * PI * xi).cos() + a)
                .sum()
        })
        .unwrap()
        .with_known_min(vec![0.0; dim], 0.0)
        .with_lower_bound(0.0)
        .with_growth(GrowthConstants {
            c_upper,
            c_lower: 1.0,
            radius: 1.0,
        })
    }

    /// Ackley with the classic `(a, b, c)` parameters, minimum 0 at the origin.
    ///
    /// Ackley is bounded, so it cannot satisfy quadratic growth at infinity;
    /// the claimed `c_lower` here exists so the assumption checker has
    /// something to refute. Keep it out of mean-field benchmark runs.
    pub fn ackley(dim: usize, a: f64, b: f64, c: f64) -> Self {
        let d = dim as f64;
        Self::new("ackley", dim, move |x: &[f64]| {
            let s1 = x.iter().map(|&v| v * v).sum::<f64>() / d;
            let s2 = x.iter().map(|&v| (c * v).cos()).sum::<f64>() / d;
            -a * (-b * s1.sqrt()).exp() - s2.exp() + a + std::f64::consts::E
        })
        .unwrap()
        .with_known_min(vec![0.0; dim], 0.0)
        .with_lower_bound(0.0)
        .with_growth(GrowthConstants {
            c_upper: 25.0,
            c_lower: 0.5,
            radius: 10.0,
        })
    }
}

type CostFactory = dyn Fn(usize, &BTreeMap<String, f64>) -> Result<CostFunction> + Send + Sync;

/// Name-keyed construction of cost functions with a scalar parameter map.
///
/// Unknown names and unknown parameter keys are rejected.
pub struct CostRegistry {
    factories: BTreeMap<String, Arc<CostFactory>>,
}

fn check_param_keys(cost: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::UnknownCostParam {
                cost: cost.to_string(),
                key: key.clone(),
            });
        }
    }
    Ok(())
}

impl Default for CostRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("quadratic", |dim, params| {
            check_param_keys("quadratic", params, &["shift"])?;
            let shift = params.get("shift").copied().unwrap_or(0.0);
            Ok(CostFunction::quadratic(dim, vec![shift; dim]))
        });
        reg.register("sphere", |dim, params| {
            check_param_keys("sphere", params, &["shift"])?;
            let shift = params.get("shift").copied().unwrap_or(0.0);
            Ok(CostFunction::sphere(dim, vec![shift; dim]))
        });
        reg.register("rastrigin", |dim, params| {
            check_param_keys("rastrigin", params, &["a"])?;
            let a = params.get("a").copied().unwrap_or(10.0);
            Ok(CostFunction::rastrigin(dim, a))
        });
        reg.register("ackley", |dim, params| {
            check_param_keys("ackley", params, &["a", "b", "c"])?;
            let a = params.get("a").copied().unwrap_or(20.0);
            let b = params.get("b").copied().unwrap_or(0.2);
            let c = params.get("c").copied().unwrap_or(2.0 * PI);
            Ok(CostFunction::ackley(dim, a, b, c))
        });
        reg
    }
}

impl CostRegistry {
    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(usize, &BTreeMap<String, f64>) -> Result<CostFunction> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.into(), Arc::new(factory));
    }

    pub fn build(&self, name: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<CostFunction> {
        match self.factories.get(name) {
            Some(f) => f(dim, params),
            None => Err(Error::UnknownCost(name.to_string())),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(|s| s.as_str())
    }
}

/// Build a built-in cost function by name with the default registry.
pub fn cost_by_name(name: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<CostFunction> {
    CostRegistry::default().build(name, dim, params)
}
