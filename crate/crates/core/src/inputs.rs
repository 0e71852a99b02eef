//! Input probability models, isoprobabilistic standardization and Latin
//! hypercube sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::polynomials::PolyFamily;

/// One independent marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Marginal {
    Uniform { a: f64, b: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(PceError::InvalidInput(format!(
                        "uniform marginal requires finite a < b, got [{a}, {b}]"
                    )));
                }
            }
            Marginal::Gaussian { mean, sd } => {
                if !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
                    return Err(PceError::InvalidInput(format!(
                        "gaussian marginal requires finite mean and sd > 0, got ({mean}, {sd})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The orthonormal family matched to this marginal.
    pub fn family(&self) -> PolyFamily {
        match self {
            Marginal::Uniform { .. } => PolyFamily::Legendre,
            Marginal::Gaussian { .. } => PolyFamily::Hermite,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => 0.5 * (a + b),
            Marginal::Gaussian { mean, .. } => mean,
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            Marginal::Uniform { a, b } => x >= a && x <= b,
            Marginal::Gaussian { .. } => x.is_finite(),
        }
    }

    fn to_standard(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => 2.0 * (x - a) / (b - a) - 1.0,
            Marginal::Gaussian { mean, sd } => (x - mean) / sd,
        }
    }

    fn from_standard(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + 0.5 * (u + 1.0) * (b - a),
            Marginal::Gaussian { mean, sd } => mean + sd * u,
        }
    }

    /// Inverse CDF, used by the samplers.
    fn quantile(&self, prob: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + prob * (b - a),
            Marginal::Gaussian { mean, sd } => mean + sd * standard_normal_quantile(prob),
        }
    }
}

/// `M` independent marginals with the isoprobabilistic map to each
/// polynomial family's standard domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputModel {
    pub marginals: Vec<Marginal>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(PceError::InvalidInput("empty input model".to_string()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    /// `m` i.i.d. Uniform(a, b) marginals.
    pub fn uniform(m: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Marginal::Uniform { a, b }; m])
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    /// One polynomial family per dimension.
    pub fn families(&self) -> Vec<PolyFamily> {
        self.marginals.iter().map(|m| m.family()).collect()
    }

    /// Map a physical point into the standardized domain:
    /// Uniform(a,b) → [-1,1], Gaussian(μ,σ) → (x−μ)/σ.
    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(PceError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        x.iter()
            .zip(&self.marginals)
            .enumerate()
            .map(|(index, (&xi, marginal))| {
                if !marginal.contains(xi) {
                    Err(PceError::OutOfSupport { index, value: xi })
                } else {
                    Ok(marginal.to_standard(xi))
                }
            })
            .collect()
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn unstandardize(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dimension() {
            return Err(PceError::DimensionMismatch {
                expected: self.dimension(),
                got: u.len(),
            });
        }
        Ok(u.iter()
            .zip(&self.marginals)
            .map(|(&ui, marginal)| marginal.from_standard(ui))
            .collect())
    }

    /// Standardize every row of an `N×M` matrix of physical points.
    pub fn standardize_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dimension() {
            return Err(PceError::DimensionMismatch {
                expected: self.dimension(),
                got: x.ncols(),
            });
        }
        let mut u = x.clone();
        for (j, marginal) in self.marginals.iter().enumerate() {
            for i in 0..x.nrows() {
                let xi = x[(i, j)];
                if !marginal.contains(xi) {
                    return Err(PceError::OutOfSupport { index: j, value: xi });
                }
                u[(i, j)] = marginal.to_standard(xi);
            }
        }
        Ok(u)
    }

    /// Latin hypercube sample of `n` points in physical units.
    ///
    /// Each dimension gets one point per equiprobability stratum
    /// `[(k−1)/n, k/n)`, placed uniformly at random within the stratum, with
    /// the strata independently permuted per dimension. Fully determined by
    /// `seed`.
    pub fn lhs_sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let m = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = DMatrix::zeros(n, m);
        let mut strata: Vec<usize> = (0..n).collect();
        for (j, marginal) in self.marginals.iter().enumerate() {
            shuffle(&mut strata, &mut rng);
            for i in 0..n {
                let mut prob = (strata[i] as f64 + rng.gen::<f64>()) / n as f64;
                // keep Gaussian quantiles finite at the stratum edges
                prob = prob.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                points[(i, j)] = marginal.quantile(prob);
            }
        }
        points
    }

    /// Plain Monte Carlo sample of `n` points in physical units.
    pub fn mc_sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let m = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = DMatrix::zeros(n, m);
        for i in 0..n {
            for (j, marginal) in self.marginals.iter().enumerate() {
                let prob = rng.gen::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                points[(i, j)] = marginal.quantile(prob);
            }
        }
        points
    }
}

/// Fisher–Yates with the crate's seeded generator, kept local so the sampled
/// designs do not depend on `rand`'s shuffle implementation details.
fn shuffle<R: Rng>(items: &mut [usize], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Sampled input points with the observed scalar outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDesign {
    pub inputs: DMatrix<f64>,
    pub outputs: DVector<f64>,
    pub seed: u64,
}

impl ExperimentalDesign {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>, seed: u64) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(PceError::DimensionMismatch {
                expected: inputs.nrows(),
                got: outputs.len(),
            });
        }
        if inputs.nrows() == 0 {
            return Err(PceError::InvalidInput("empty experimental design".to_string()));
        }
        if inputs.iter().any(|v| !v.is_finite()) || outputs.iter().any(|v| !v.is_finite()) {
            return Err(PceError::InvalidInput(
                "experimental design contains non-finite values".to_string(),
            ));
        }
        Ok(Self { inputs, outputs, seed })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.inputs.ncols()
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1.2e-9 over (0, 1)).
fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
