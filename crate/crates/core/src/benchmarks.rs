//! Analytic benchmark functions and validation metrics for comparing
//! surrogate predictions against the true model.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::inputs::InputModel;
use crate::lar::SparsePceModel;
use crate::par;

/// Importance constants of the Sobol' g-function; low-index dimensions
/// dominate and need high polynomial degree.
pub const SOBOL_C: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 500.0];

/// 1-based dimension sets coupled by the interaction term of the modified
/// Schwefel function.
pub const SCHWEFEL_S1: [usize; 5] = [1, 3, 5, 6, 8];
pub const SCHWEFEL_S2: [usize; 3] = [15, 18, 20];

/// `Π_{i=1..8} (|4xᵢ − 2| + cᵢ)/(1 + cᵢ)` on the unit cube.
pub fn sobol_g(x: &[f64]) -> Result<f64> {
    if x.len() != 8 {
        return Err(PceError::DimensionMismatch {
            expected: 8,
            got: x.len(),
        });
    }
    let mut product = 1.0;
    for (i, (&xi, c)) in x.iter().zip(&SOBOL_C).enumerate() {
        if !(0.0..=1.0).contains(&xi) {
            return Err(PceError::OutOfSupport { index: i, value: xi });
        }
        product *= ((4.0 * xi - 2.0).abs() + c) / (1.0 + c);
    }
    Ok(product)
}

/// Analytic variance of the g-function: `Π (1 + 1/(3(1+cᵢ)²)) − 1`
/// (the mean is exactly 1).
pub fn sobol_g_variance() -> f64 {
    SOBOL_C
        .iter()
        .map(|c| 1.0 + 1.0 / (3.0 * (1.0 + c) * (1.0 + c)))
        .product::<f64>()
        - 1.0
}

/// Modified Schwefel function on `[-500, 500]^20`: an oscillatory additive
/// part needing high degree in high-index dimensions, plus one interaction
/// term coupling the `S1` and `S2` dimension groups.
pub fn schwefel_mod(x: &[f64]) -> Result<f64> {
    if x.len() != 20 {
        return Err(PceError::DimensionMismatch {
            expected: 20,
            got: x.len(),
        });
    }
    for (i, &xi) in x.iter().enumerate() {
        if !(-500.0..=500.0).contains(&xi) {
            return Err(PceError::OutOfSupport { index: i, value: xi });
        }
    }
    let weighted = |i: usize| {
        // i is 1-based
        let xi = x[i - 1];
        let w = i as f64 / 20.0;
        (w + 0.5) * xi * (w * xi.abs()).sqrt().sin()
    };
    let additive: f64 = -(1..=20).map(weighted).sum::<f64>();
    let s1: f64 = SCHWEFEL_S1.iter().map(|&j| weighted(j)).sum();
    let s2: f64 = SCHWEFEL_S2.iter().map(|&k| x[k - 1]).sum();
    Ok(additive + s1 * s2 / 3000.0)
}

/// Benchmark registry entry, addressable by name from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    SobolG,
    SchwefelMod,
}

impl Benchmark {
    pub const ALL: [Benchmark; 2] = [Benchmark::SobolG, Benchmark::SchwefelMod];

    pub fn dimension(&self) -> usize {
        match self {
            Benchmark::SobolG => 8,
            Benchmark::SchwefelMod => 20,
        }
    }

    pub fn input_model(&self) -> InputModel {
        match self {
            Benchmark::SobolG => InputModel::uniform(8, 0.0, 1.0),
            Benchmark::SchwefelMod => InputModel::uniform(20, -500.0, 500.0),
        }
        .expect("benchmark input models are valid")
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Benchmark::SobolG => sobol_g(x),
            Benchmark::SchwefelMod => schwefel_mod(x),
        }
    }

    /// Evaluate every row of an `N×M` matrix of physical points.
    pub fn eval_batch(&self, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
        let rows: Vec<Result<f64>> = par::map_range(xs.nrows(), |i| {
            let x: Vec<f64> = xs.row(i).iter().copied().collect();
            self.eval(&x)
        });
        let mut out = DVector::zeros(xs.nrows());
        for (i, r) in rows.into_iter().enumerate() {
            out[i] = r?;
        }
        Ok(out)
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Benchmark::SobolG => write!(f, "sobol-g"),
            Benchmark::SchwefelMod => write!(f, "schwefel-mod"),
        }
    }
}

impl FromStr for Benchmark {
    type Err = PceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sobol-g" => Ok(Benchmark::SobolG),
            "schwefel-mod" => Ok(Benchmark::SchwefelMod),
            other => Err(PceError::InvalidInput(format!(
                "unknown benchmark '{other}' (expected sobol-g or schwefel-mod)"
            ))),
        }
    }
}

/// Relative validation error `Σ(y − ŷ)² / Σ(y − ȳ)²` on an independent
/// sample of the true model.
pub fn validation_error(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(PceError::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(PceError::InvalidInput(
            "validation needs at least 2 points".to_string(),
        ));
    }
    let mean = y_true.mean();
    let denom: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(PceError::DegenerateOutput);
    }
    let num: f64 = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(num / denom)
}

/// Mean and variance of the surrogate itself: for an orthonormal basis the
/// mean is the constant coefficient and the variance the sum of squared
/// non-constant coefficients.
pub fn pce_moments(model: &SparsePceModel) -> (f64, f64) {
    let mut mean = 0.0;
    let mut variance = 0.0;
    for (alpha, c) in model.basis.iter().zip(&model.coefficients) {
        if alpha.is_zero() {
            mean += c;
        } else {
            variance += c * c;
        }
    }
    (mean, variance)
}
