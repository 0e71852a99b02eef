//! Incremental least-angle path machinery shared by the fixed-candidate
//! solver (`lar`) and the hierarchically enriched solver (`heredity`).
//!
//! The engine owns the standardized response and the active set. Candidate
//! columns are centered and scaled to unit Euclidean norm; the active Gram
//! matrix keeps a growing Cholesky factor, from which the equiangular
//! direction, the hybrid OLS refit and the hat-matrix leverages are all
//! updated in `O(N·k)` per step instead of refactorizing from scratch.

use nalgebra::DVector;

use crate::error::{PceError, Result};
use crate::multiindex::MultiIndex;
use crate::regression::LEVERAGE_TOL;

/// Pivot tolerance for the growing Cholesky factor; a smaller pivot means
/// the tentative column is numerically dependent on the active set.
const CHOLESKY_TOL: f64 = 1e-12;

/// Centered columns with a smaller norm than this (relative to the raw
/// column) carry no information on the design and are dropped.
const DEGENERATE_SCALE_TOL: f64 = 1e-12;

/// A candidate regressor, standardized for the correlation geometry.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub alpha: MultiIndex,
    /// Centered, unit-Euclidean-norm column.
    pub std: DVector<f64>,
    pub mean: f64,
    /// `‖raw − mean·1‖₂`; maps standardized coefficients back to raw scale.
    pub scale: f64,
}

impl Candidate {
    /// `None` when the centered column is numerically zero (degenerate on
    /// this design).
    pub fn build(alpha: MultiIndex, raw: &DVector<f64>) -> Option<Self> {
        let mean = raw.mean();
        let centered = raw.map(|v| v - mean);
        let scale = centered.norm();
        if scale <= DEGENERATE_SCALE_TOL * (raw.norm() + 1.0) {
            return None;
        }
        Some(Self {
            alpha,
            std: centered / scale,
            mean,
            scale,
        })
    }

    /// Inner product with the residual; proportional to the Pearson
    /// correlation, with the same denominator for every candidate.
    pub fn correlation(&self, residual: &DVector<f64>) -> f64 {
        self.std.dot(residual)
    }
}

/// Intercept plus per-active-column coefficients on the raw scale.
#[derive(Debug, Clone)]
pub(crate) struct StepFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct EngineStep {
    pub selected: MultiIndex,
    pub hybrid: StepFit,
    pub lar: StepFit,
    pub loo_error: f64,
    pub empirical_error: f64,
    /// `max − min` of the active |correlations| at step entry; the
    /// equiangular tie set keeps this near zero from the second step on.
    pub active_corr_spread: f64,
}

pub(crate) enum StepStatus {
    Recorded,
    RejectedRankDeficient,
    RejectedSaturated,
}

pub(crate) struct PathEngine {
    n: usize,
    y_mean: f64,
    y_centered: DVector<f64>,
    y_var: f64,
    residual: DVector<f64>,
    active: Vec<Candidate>,
    /// Rows of the lower-triangular Cholesky factor of the active Gram.
    chol: Vec<Vec<f64>>,
    /// Columns of `Z = X̃_A L⁻ᵀ`; row norms give the leverages.
    z_cols: Vec<DVector<f64>>,
    /// Running `Σ_t Z[i,t]²` per observation.
    leverage_sq: DVector<f64>,
    /// `x̃ᵀ ỹ` per active column.
    xty: Vec<f64>,
    /// LAR coefficients on the standardized columns.
    beta_lar: Vec<f64>,
    /// Diagonal of the inverse standardized Gram, grown with the factor;
    /// feeds the finite-sample LOO correction.
    diag_ginv: Vec<f64>,
    /// `mean/scale` per active column.
    mean_over_scale: Vec<f64>,
    /// Multiply recorded LOO errors by the finite-sample correction factor.
    corrected_loo: bool,
    pub steps: Vec<EngineStep>,
    best_loo: f64,
    best_step: Option<usize>,
    since_improve: usize,
}

impl PathEngine {
    pub fn new(y: &DVector<f64>, corrected_loo: bool) -> Result<Self> {
        let var = crate::regression::sample_variance(y);
        if crate::regression::variance_is_degenerate(var, y) {
            return Err(PceError::DegenerateOutput);
        }
        let mean = y.mean();
        let centered = y.map(|v| v - mean);
        Ok(Self {
            n: y.len(),
            y_mean: mean,
            residual: centered.clone(),
            y_centered: centered,
            y_var: var,
            active: Vec::new(),
            chol: Vec::new(),
            z_cols: Vec::new(),
            leverage_sq: DVector::zeros(y.len()),
            xty: Vec::new(),
            beta_lar: Vec::new(),
            diag_ginv: Vec::new(),
            mean_over_scale: Vec::new(),
            corrected_loo,
            steps: Vec::new(),
            best_loo: f64::INFINITY,
            best_step: None,
            since_improve: 0,
        })
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn best_step(&self) -> Option<usize> {
        self.best_step
    }

    pub fn steps_since_improvement(&self) -> usize {
        self.since_improve
    }

    /// Run one least-angle step with `selected` entering the active set.
    ///
    /// `pool` holds the remaining inactive candidates and `pool_corr` their
    /// correlations with the current residual (positions aligned). The
    /// coefficients move along the equiangular direction until some pool
    /// element is as correlated as the active set, then the active set is
    /// refit by OLS and the LOO error recorded.
    pub fn advance(
        &mut self,
        selected: Candidate,
        pool: &[Candidate],
        pool_corr: &[f64],
    ) -> StepStatus {
        debug_assert_eq!(pool.len(), pool_corr.len());
        let spread = self.active_correlation_spread();

        // Grow the Cholesky factor; failure means the column is numerically
        // dependent on the active set.
        let g: Vec<f64> = self
            .active
            .iter()
            .map(|a| a.std.dot(&selected.std))
            .collect();
        let Some(row) = chol_append(&self.chol, &g) else {
            return StepStatus::RejectedRankDeficient;
        };
        let d = *row.last().expect("row is never empty");

        // New column of Z = X̃ L⁻ᵀ, and the leverages it implies.
        let mut z_new = selected.std.clone();
        for (t, col) in self.z_cols.iter().enumerate() {
            z_new.axpy(-row[t], col, 1.0);
        }
        z_new /= d;
        let inv_n = 1.0 / self.n as f64;
        for i in 0..self.n {
            let h = inv_n + self.leverage_sq[i] + z_new[i] * z_new[i];
            if h >= 1.0 - LEVERAGE_TOL {
                return StepStatus::RejectedSaturated;
            }
        }

        // Inverse-Gram diagonal via the bordering identity: with w = G⁻¹g
        // the diagonal grows by w_j²/d² and the new entry is 1/d².
        let w = back_substitute(&self.chol, &row[..self.active.len()]);

        // Commit the column.
        self.chol.push(row);
        for i in 0..self.n {
            self.leverage_sq[i] += z_new[i] * z_new[i];
        }
        self.z_cols.push(z_new);
        self.xty.push(selected.std.dot(&self.y_centered));
        self.beta_lar.push(0.0);
        for (j, wj) in w.iter().enumerate() {
            self.diag_ginv[j] += wj * wj / (d * d);
        }
        self.diag_ginv.push(1.0 / (d * d));
        self.mean_over_scale.push(selected.mean / selected.scale);
        let selected_alpha = selected.alpha.clone();
        self.active.push(selected);
        let k = self.active.len();

        // Equiangular direction over the (signed) active set.
        let c_active: Vec<f64> = self
            .active
            .iter()
            .map(|a| a.correlation(&self.residual))
            .collect();
        let big_c = c_active.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let signs: Vec<f64> = c_active
            .iter()
            .map(|c| if *c >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let v = chol_solve(&self.chol, &signs);
        let stv: f64 = signs.iter().zip(&v).map(|(s, w)| s * w).sum();
        // stv = sᵀG⁻¹s > 0 since G is positive definite
        let a_norm = 1.0 / stv.sqrt();
        let mut direction = DVector::zeros(self.n);
        for (j, a) in self.active.iter().enumerate() {
            direction.axpy(a_norm * v[j], &a.std, 1.0);
        }

        // Step length: the full step C/A reaches the active-set OLS fit;
        // stop earlier where an inactive candidate catches up.
        let mut gamma = big_c / a_norm;
        for (cand, &c_j) in pool.iter().zip(pool_corr) {
            let a_j = cand.std.dot(&direction);
            for (num, den) in [(big_c - c_j, a_norm - a_j), (big_c + c_j, a_norm + a_j)] {
                if den.abs() > 1e-14 {
                    let t = num / den;
                    if t > -1e-12 && t < gamma {
                        gamma = t.max(0.0);
                    }
                }
            }
        }

        self.residual.axpy(-gamma, &direction, 1.0);
        for (j, b) in self.beta_lar.iter_mut().enumerate() {
            *b += gamma * a_norm * v[j];
        }

        // Hybrid refit: OLS on the active set through the same Gram factor.
        let theta = chol_solve(&self.chol, &self.xty);
        let mut fitted = DVector::zeros(self.n);
        for (j, a) in self.active.iter().enumerate() {
            fitted.axpy(theta[j], &a.std, 1.0);
        }
        let hybrid_residual = &self.y_centered - &fitted;
        let mut loo_acc = 0.0;
        for i in 0..self.n {
            let h = inv_n + self.leverage_sq[i];
            let r = hybrid_residual[i] / (1.0 - h);
            loo_acc += r * r;
        }
        let mut loo_error = loo_acc * inv_n / self.y_var;
        if self.corrected_loo {
            loo_error *= self.correction_factor();
        }
        let empirical_error = hybrid_residual.norm_squared() * inv_n / self.y_var;

        self.steps.push(EngineStep {
            selected: selected_alpha,
            hybrid: self.to_raw_fit(&theta),
            lar: self.to_raw_fit(&self.beta_lar.clone()),
            loo_error,
            empirical_error,
            active_corr_spread: spread,
        });

        if loo_error < self.best_loo {
            self.best_loo = loo_error;
            self.best_step = Some(k - 1);
            self.since_improve = 0;
        } else {
            self.since_improve += 1;
        }
        StepStatus::Recorded
    }

    /// Finite-sample LOO correction `T = N/(N−P) · (1 + tr[(ΨᵀΨ)⁻¹])` for
    /// the raw active design including the constant column (`P = k + 1`),
    /// assembled from the standardized Gram inverse:
    /// `tr[(ΨᵀΨ)⁻¹] = 1/N + Σ_j (G⁻¹)_jj/s_j² + aᵀG⁻¹a` with `a_j = m̄_j/s_j`.
    fn correction_factor(&self) -> f64 {
        let n = self.n as f64;
        let p = (self.active.len() + 1) as f64;
        if n - p < 1.0 {
            return f64::INFINITY;
        }
        let tr_s: f64 = self
            .diag_ginv
            .iter()
            .zip(&self.active)
            .map(|(dj, a)| dj / (a.scale * a.scale))
            .sum();
        let va = chol_solve(&self.chol, &self.mean_over_scale);
        let quad: f64 = self
            .mean_over_scale
            .iter()
            .zip(&va)
            .map(|(a, v)| a * v)
            .sum();
        let trace = 1.0 / n + tr_s + quad;
        n / (n - p) * (1.0 + trace)
    }

    fn active_correlation_spread(&self) -> f64 {
        if self.active.is_empty() {
            return 0.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for a in &self.active {
            let c = a.correlation(&self.residual).abs();
            lo = lo.min(c);
            hi = hi.max(c);
        }
        hi - lo
    }

    /// Map coefficients on the standardized columns back to raw columns
    /// plus an explicit intercept.
    fn to_raw_fit(&self, standardized: &[f64]) -> StepFit {
        let mut intercept = self.y_mean;
        let coefficients: Vec<f64> = self
            .active
            .iter()
            .zip(standardized)
            .map(|(a, &t)| {
                let c = t / a.scale;
                intercept -= c * a.mean;
                c
            })
            .collect();
        StepFit {
            intercept,
            coefficients,
        }
    }
}

/// Append one row to the Cholesky factor of a Gram matrix whose new column
/// has unit diagonal; `None` when the pivot falls below tolerance.
fn chol_append(l: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let k = g.len();
    let mut row = vec![0.0; k + 1];
    for i in 0..k {
        let mut s = g[i];
        for t in 0..i {
            s -= l[i][t] * row[t];
        }
        row[i] = s / l[i][i];
    }
    let d2 = 1.0 - row[..k].iter().map(|v| v * v).sum::<f64>();
    if !(d2 > CHOLESKY_TOL) {
        return None;
    }
    row[k] = d2.sqrt();
    Some(row)
}

/// Solve `L Lᵀ x = b`.
fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for t in 0..i {
            s -= l[i][t] * z[t];
        }
        z[i] = s / l[i][i];
    }
    back_substitute(l, &z)
}

/// Solve `Lᵀ x = z`.
fn back_substitute(l: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let k = z.len();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = z[i];
        for t in i + 1..k {
            s -= l[t][i] * x[t];
        }
        x[i] = s / l[i][i];
    }
    x
}
