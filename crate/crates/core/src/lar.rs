//! Least-angle-regression path solver over a fixed candidate basis, hybrid
//! OLS recomputation, best-iteration selection by leave-one-out error, and
//! the outer degree-adaptive loop.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::{Candidate, PathEngine, StepStatus};
use crate::error::{PceError, Result};
use crate::heredity::{hlar_fit, HeredityConfig};
use crate::inputs::{ExperimentalDesign, InputModel};
use crate::multiindex::{generate_candidate_set, MultiIndex, TruncationSpec};
use crate::par;
use crate::polynomials::{self, MAX_DEGREE};
use crate::regression::{self, DesignMatrix, FitDiagnostics};

/// Knobs of a single path run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LarOptions {
    /// Cap on the number of selected terms (constant excluded); defaults to
    /// `min(K, N−1)` so the hybrid OLS stays overdetermined.
    pub max_terms: Option<usize>,
    /// Stop when the LOO error has not improved for this many consecutive
    /// steps; the best step is still chosen over everything recorded.
    pub early_stop_window: usize,
    /// Multiply recorded LOO errors by the finite-sample correction factor
    /// `N/(N−P)·(1 + tr[(ΨᵀΨ)⁻¹])`, which penalizes model size during
    /// best-step and best-degree selection. Off by default.
    pub corrected_loo: bool,
}

impl Default for LarOptions {
    fn default() -> Self {
        Self {
            max_terms: None,
            early_stop_window: 10,
            corrected_loo: false,
        }
    }
}

/// Why a path stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathTermination {
    MaxTerms,
    Exhausted,
    EarlyStop,
    RankDeficientStep,
    SaturatedLeverage,
}

/// One recorded iteration: the entrant, the active set, and both coefficient
/// vectors laid out as `[intercept, coefficients in selection order]`.
#[derive(Debug, Clone)]
pub struct LarStep {
    pub selected: MultiIndex,
    pub active: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub lar_coefficients: Vec<f64>,
    pub loo_error: f64,
    pub empirical_error: f64,
    /// Spread of the active |correlations| at step entry (equiangular tie).
    pub active_correlation_spread: f64,
}

#[derive(Debug, Clone)]
pub struct LarPath {
    pub steps: Vec<LarStep>,
    pub best_step: Option<usize>,
    pub termination: PathTermination,
    /// Candidates dropped before the path because their columns have zero
    /// variance on this design.
    pub dropped_columns: Vec<MultiIndex>,
}

pub(crate) fn flatten_fit(fit: &crate::engine::StepFit) -> Vec<f64> {
    let mut out = Vec::with_capacity(fit.coefficients.len() + 1);
    out.push(fit.intercept);
    out.extend_from_slice(&fit.coefficients);
    out
}

fn path_from_engine(
    engine: PathEngine,
    termination: PathTermination,
    dropped: Vec<MultiIndex>,
) -> LarPath {
    let mut active = Vec::new();
    let steps = engine
        .steps
        .iter()
        .map(|s| {
            active.push(s.selected.clone());
            LarStep {
                selected: s.selected.clone(),
                active: active.clone(),
                coefficients: flatten_fit(&s.hybrid),
                lar_coefficients: flatten_fit(&s.lar),
                loo_error: s.loo_error,
                empirical_error: s.empirical_error,
                active_correlation_spread: s.active_corr_spread,
            }
        })
        .collect();
    LarPath {
        steps,
        best_step: engine.best_step(),
        termination,
        dropped_columns: dropped,
    }
}

/// Pick the most correlated candidate; exact ties go to the lowest canonical
/// multi-index so the result is independent of storage order.
pub(crate) fn select_most_correlated(
    pool: &[Candidate],
    corr: &[f64],
) -> Result<Option<usize>> {
    let mut best: Option<usize> = None;
    for (j, &c) in corr.iter().enumerate() {
        if !c.is_finite() {
            return Err(PceError::NonFiniteCorrelation { index: j });
        }
        best = match best {
            None => Some(j),
            Some(b) => {
                let (ca, cb) = (c.abs(), corr[b].abs());
                if ca > cb || (ca == cb && pool[j].alpha < pool[b].alpha) {
                    Some(j)
                } else {
                    Some(b)
                }
            }
        };
    }
    Ok(best)
}

/// Run the least-angle path over the columns of `psi`.
///
/// Candidate columns are centered and scaled to unit norm for the
/// correlation and direction geometry; after every step the active set is
/// refit by ordinary least squares on the raw columns plus an explicit
/// constant, and the analytic LOO error of that refit is recorded. The
/// response is centered by its sample mean before the path, so the constant
/// term never competes.
pub fn lar_path(psi: &DesignMatrix, y: &DVector<f64>, options: &LarOptions) -> Result<LarPath> {
    if psi.nrows() != y.len() {
        return Err(PceError::DimensionMismatch {
            expected: psi.nrows(),
            got: y.len(),
        });
    }
    let mut dropped = Vec::new();
    let mut pool: Vec<Candidate> = Vec::with_capacity(psi.ncols());
    for (j, alpha) in psi.columns.iter().enumerate() {
        let raw = psi.values.column(j).into_owned();
        match Candidate::build(alpha.clone(), &raw) {
            Some(c) => pool.push(c),
            None => dropped.push(alpha.clone()),
        }
    }
    let n = y.len();
    let max_terms = options
        .max_terms
        .unwrap_or(usize::MAX)
        .min(pool.len())
        .min(n.saturating_sub(1));

    let mut engine = PathEngine::new(y, options.corrected_loo)?;
    let termination = loop {
        if engine.n_active() >= max_terms {
            break PathTermination::MaxTerms;
        }
        if pool.is_empty() {
            break PathTermination::Exhausted;
        }
        let corr: Vec<f64> = pool
            .iter()
            .map(|c| c.correlation(engine.residual()))
            .collect();
        let Some(idx) = select_most_correlated(&pool, &corr)? else {
            break PathTermination::Exhausted;
        };
        let selected = pool.remove(idx);
        let mut corr = corr;
        corr.remove(idx);
        match engine.advance(selected, &pool, &corr) {
            StepStatus::Recorded => {}
            StepStatus::RejectedRankDeficient => break PathTermination::RankDeficientStep,
            StepStatus::RejectedSaturated => break PathTermination::SaturatedLeverage,
        }
        if engine.steps_since_improvement() >= options.early_stop_window {
            break PathTermination::EarlyStop;
        }
    };
    Ok(path_from_engine(engine, termination, dropped))
}

/// A fitted sparse PCE: retained basis (constant first), coefficients, and
/// fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePceModel {
    pub input_model: InputModel,
    pub basis: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub diagnostics: FitDiagnostics,
    pub truncation: TruncationSpec,
    pub best_degree: u32,
}

impl SparsePceModel {
    pub fn dimension(&self) -> usize {
        self.input_model.dimension()
    }

    /// Number of retained terms, constant included.
    pub fn n_retained(&self) -> usize {
        self.basis.len()
    }

    /// Evaluate the surrogate at one standardized point.
    pub fn predict_standardized(&self, u: &[f64]) -> Result<f64> {
        let m = self.dimension();
        if u.len() != m {
            return Err(PceError::DimensionMismatch {
                expected: m,
                got: u.len(),
            });
        }
        let families = self.input_model.families();
        let mut max_degree = vec![0u32; m];
        for alpha in &self.basis {
            for (dim, d) in alpha.nonzero() {
                max_degree[dim] = max_degree[dim].max(d);
            }
        }
        let tables: Vec<Vec<f64>> = (0..m)
            .map(|j| polynomials::tabulate_unchecked(families[j], max_degree[j], u[j]))
            .collect();
        let mut acc = 0.0;
        for (alpha, c) in self.basis.iter().zip(&self.coefficients) {
            let term: f64 = alpha
                .nonzero()
                .map(|(dim, d)| tables[dim][d as usize])
                .product();
            acc += c * term;
        }
        Ok(acc)
    }

    /// Evaluate the surrogate at one physical point.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let u = self.input_model.standardize(x)?;
        self.predict_standardized(&u)
    }

    /// Evaluate the surrogate at every row of an `N×M` physical matrix.
    pub fn predict_batch(&self, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
        if xs.ncols() != self.dimension() {
            return Err(PceError::DimensionMismatch {
                expected: self.dimension(),
                got: xs.ncols(),
            });
        }
        let rows: Vec<Result<f64>> = par::map_range(xs.nrows(), |i| {
            let x: Vec<f64> = xs.row(i).iter().copied().collect();
            self.predict(&x)
        });
        let mut out = DVector::zeros(xs.nrows());
        for (i, r) in rows.into_iter().enumerate() {
            out[i] = r?;
        }
        Ok(out)
    }
}

/// Degrees above the univariate cap can never be requested by a valid
/// truncation, so this is a plain guard.
fn check_degree(p: u32) -> Result<()> {
    if p > MAX_DEGREE {
        return Err(PceError::DegreeOverflow {
            degree: p,
            cap: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Assemble a model from a retained active set: rebuild the design with the
/// constant column and recompute coefficients and diagnostics through the
/// rank-revealing solver.
pub(crate) fn assemble_model(
    ed: &ExperimentalDesign,
    input_model: &InputModel,
    truncation: TruncationSpec,
    best_degree: u32,
    active: &[MultiIndex],
    corrected_loo: bool,
) -> Result<SparsePceModel> {
    let m = input_model.dimension();
    let u = input_model.standardize_matrix(&ed.inputs)?;
    let mut basis = Vec::with_capacity(active.len() + 1);
    basis.push(MultiIndex::zero(m));
    basis.extend_from_slice(active);
    let psi = regression::build_design_matrix(&u, &basis, &input_model.families())?;
    let coefficients = regression::ols_solve(&psi, &ed.outputs)?;
    let mut loo = regression::loo_error(&psi, &ed.outputs, &coefficients)?;
    if corrected_loo {
        loo *= regression::loo_correction_factor(&psi)?;
    }
    let diagnostics = FitDiagnostics {
        loo_error: loo,
        empirical_error: regression::empirical_error(&psi, &ed.outputs, &coefficients)?,
    };
    Ok(SparsePceModel {
        input_model: input_model.clone(),
        basis,
        coefficients: coefficients.iter().copied().collect(),
        diagnostics,
        truncation,
        best_degree,
    })
}

/// Constant-only model for degenerate responses.
pub(crate) fn constant_model(
    ed: &ExperimentalDesign,
    input_model: &InputModel,
    truncation: TruncationSpec,
    best_degree: u32,
) -> SparsePceModel {
    SparsePceModel {
        input_model: input_model.clone(),
        basis: vec![MultiIndex::zero(input_model.dimension())],
        coefficients: vec![ed.outputs.mean()],
        diagnostics: FitDiagnostics {
            loo_error: 0.0,
            empirical_error: 0.0,
        },
        truncation,
        best_degree,
    }
}

fn response_is_degenerate(y: &DVector<f64>) -> bool {
    regression::variance_is_degenerate(regression::sample_variance(y), y)
}

/// Fit a sparse PCE over the a-priori truncated candidate set: generate the
/// candidates, run the least-angle path, keep the step with the smallest
/// LOO error.
pub fn fit_reference(
    ed: &ExperimentalDesign,
    spec: &TruncationSpec,
    input_model: &InputModel,
    options: &LarOptions,
) -> Result<SparsePceModel> {
    if ed.len() < 3 {
        return Err(PceError::InvalidInput(format!(
            "need at least 3 design points, got {}",
            ed.len()
        )));
    }
    check_degree(spec.p)?;
    let m = input_model.dimension();
    if ed.dimension() != m {
        return Err(PceError::DimensionMismatch {
            expected: m,
            got: ed.dimension(),
        });
    }
    let mut candidates = generate_candidate_set(m, spec)?;
    candidates.retain(|a| !a.is_zero());
    if candidates.is_empty() {
        return Err(PceError::InvalidTruncation(
            "candidate set contains only the constant term".to_string(),
        ));
    }
    if response_is_degenerate(&ed.outputs) {
        return Ok(constant_model(ed, input_model, *spec, spec.p));
    }
    let u = input_model.standardize_matrix(&ed.inputs)?;
    let psi = regression::build_design_matrix(&u, &candidates, &input_model.families())?;
    let path = lar_path(&psi, &ed.outputs, options)?;
    let active: Vec<MultiIndex> = match path.best_step {
        Some(idx) => path.steps[idx].active.clone(),
        None => Vec::new(),
    };
    assemble_model(ed, input_model, *spec, spec.p, &active, options.corrected_loo)
}

/// Basis selection strategy for the degree-adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Fixed candidate set from the truncation scheme (reference approach).
    Lar,
    /// Hierarchical adaptive candidate enrichment by heredity.
    Hlar,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::Lar => write!(f, "LAR"),
            FitMethod::Hlar => write!(f, "hLAR"),
        }
    }
}

/// Configuration shared by the degree sweep.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub method: FitMethod,
    pub q: f64,
    pub r: Option<usize>,
    /// Truncation applied to heredity children (h-LAR only).
    pub child_mode: crate::heredity::ChildTruncation,
    pub lar: LarOptions,
    /// Degrees without LOO improvement before the sweep stops.
    pub degree_patience: usize,
}

impl FitConfig {
    pub fn new(method: FitMethod, q: f64, r: Option<usize>) -> Self {
        Self {
            method,
            q,
            r,
            child_mode: crate::heredity::ChildTruncation::PerDimension,
            lar: LarOptions::default(),
            degree_patience: 2,
        }
    }
}

/// Fit one model per degree in `p_range` (ascending) and return the one with
/// the smallest LOO error, recording that degree as `best_degree`. The sweep
/// stops early after `degree_patience` consecutive degrees without
/// improvement; per-degree failures are skipped unless every degree fails.
pub fn fit_degree_adaptive(
    ed: &ExperimentalDesign,
    input_model: &InputModel,
    config: &FitConfig,
    p_range: RangeInclusive<u32>,
) -> Result<SparsePceModel> {
    if p_range.is_empty() {
        return Err(PceError::InvalidInput("empty degree range".to_string()));
    }
    let mut best: Option<SparsePceModel> = None;
    let mut last_err: Option<PceError> = None;
    let mut stale = 0usize;
    for p in p_range {
        let result = match config.method {
            FitMethod::Lar => {
                let spec = TruncationSpec::new(p, config.q, config.r)?;
                fit_reference(ed, &spec, input_model, &config.lar)
            }
            FitMethod::Hlar => {
                let heredity = HeredityConfig {
                    p,
                    q: Some(config.q),
                    child_mode: config.child_mode,
                    lar: config.lar,
                };
                hlar_fit(ed, &heredity, input_model)
            }
        };
        match result {
            Ok(mut model) => {
                model.best_degree = p;
                let improved = best
                    .as_ref()
                    .map(|b| model.diagnostics.loo_error < b.diagnostics.loo_error)
                    .unwrap_or(true);
                if improved {
                    best = Some(model);
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= config.degree_patience {
                        break;
                    }
                }
            }
            Err(e) => {
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(model) => Ok(model),
        None => Err(last_err.unwrap_or(PceError::InvalidInput(
            "no degree produced a model".to_string(),
        ))),
    }
}
