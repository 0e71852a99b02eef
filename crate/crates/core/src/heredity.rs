//! Hierarchical adaptive sparse PCE (h-LAR): a least-angle path whose
//! candidate set starts as one-dimensional terms and is enriched on-the-fly
//! with rank-2 interaction children of selected terms, following the
//! statistical heredity principle.

use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{Candidate, PathEngine, StepStatus};
use crate::error::{PceError, Result};
use crate::inputs::{ExperimentalDesign, InputModel};
use crate::lar::{
    assemble_model, constant_model, select_most_correlated, LarOptions, PathTermination,
    SparsePceModel,
};
use crate::multiindex::{MultiIndex, TruncationSpec};
use crate::polynomials::{self, MAX_DEGREE};
use crate::regression;

/// Enrichment never generates interactions above rank 2.
pub const MAX_CHILD_RANK: usize = 2;

/// Truncation applied to generated interaction children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChildTruncation {
    /// Keep children whose per-dimension degrees are each at most `p`.
    PerDimension,
    /// Keep children with total degree at most `p`.
    TotalDegree,
    /// Keep children with `qnorm(q) ≤ p`.
    QNorm,
}

#[derive(Debug, Clone, Copy)]
pub struct HeredityConfig {
    /// Maximum univariate degree of the initial candidates (and the bound
    /// the child truncation refers to).
    pub p: u32,
    /// Hyperbolic exponent for [`ChildTruncation::QNorm`]; 1 when absent.
    pub q: Option<f64>,
    pub child_mode: ChildTruncation,
    pub lar: LarOptions,
}

impl HeredityConfig {
    pub fn new(p: u32) -> Self {
        Self {
            p,
            q: None,
            child_mode: ChildTruncation::PerDimension,
            lar: LarOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(PceError::InvalidTruncation(format!(
                "p must be >= 1, got {}",
                self.p
            )));
        }
        if self.p > MAX_DEGREE {
            return Err(PceError::DegreeOverflow {
                degree: self.p,
                cap: MAX_DEGREE,
            });
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q <= 1.0) {
                return Err(PceError::InvalidTruncation(format!(
                    "q must lie in (0, 1], got {q}"
                )));
            }
        }
        Ok(())
    }

    fn admits_child(&self, a: u32, b: u32, child: &MultiIndex) -> bool {
        match self.child_mode {
            ChildTruncation::PerDimension => a.max(b) <= self.p,
            ChildTruncation::TotalDegree => a + b <= self.p,
            ChildTruncation::QNorm => {
                let spec = TruncationSpec {
                    p: self.p,
                    q: self.q.unwrap_or(1.0),
                    r: Some(MAX_CHILD_RANK),
                };
                spec.admits(child)
            }
        }
    }
}

/// Which form of the heredity principle a selection exhibited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeredityForm {
    /// Rank-1 selection; heredity does not apply.
    None,
    /// Rank-2 selection with both parents active.
    Strong,
    /// Rank-2 selection with at most one parent active.
    Weak,
}

/// Per-iteration record of the h-LAR loop.
#[derive(Debug, Clone)]
pub struct HlarStep {
    pub selected: MultiIndex,
    pub form: HeredityForm,
    /// Exact-degree rank-1 parents of a rank-2 selection that were active
    /// when it was selected (0 for rank-1 selections).
    pub active_parents: usize,
    /// Both parents were members of the rank-1 generation pool (always true
    /// by construction; recorded for auditability).
    pub parents_in_seen_1d: bool,
    /// The selected term was generated in this very iteration and won the
    /// comparison against its parent.
    pub generated_this_iteration: bool,
    pub children_added: usize,
    pub candidate_set_size: usize,
    pub loo_error: f64,
    pub empirical_error: f64,
}

#[derive(Debug, Clone)]
pub struct HlarLog {
    pub steps: Vec<HlarStep>,
    pub best_step: Option<usize>,
    pub termination: PathTermination,
    /// Largest candidate-set size reached during the run.
    pub peak_candidates: usize,
    pub dropped_columns: Vec<MultiIndex>,
}

/// The initial candidate set: every rank-1 index with per-dimension degree
/// at most `p`, in canonical order. The constant term is handled outside the
/// competition, exactly as in the fixed-candidate path.
pub fn initial_candidates(m: usize, config: &HeredityConfig) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(m * config.p as usize);
    for dim in 0..m {
        for degree in 1..=config.p {
            out.push(MultiIndex::univariate(m, dim, degree));
        }
    }
    out.sort_unstable();
    out
}

/// Interaction children of a selected rank-1 term: for the selected degree
/// `a` in dimension `i`, every index with `α_i = a` and `α_j = b` for a
/// rank-1 partner `(j, b)` in `seen_1d`, `j ≠ i`, subject to the child
/// truncation mode. Returned in canonical order.
pub fn generate_children(
    selected: &MultiIndex,
    seen_1d: &[MultiIndex],
    config: &HeredityConfig,
) -> Result<Vec<MultiIndex>> {
    if selected.rank() != 1 {
        return Err(PceError::InvalidParent {
            rank: selected.rank(),
        });
    }
    let m = selected.dimension();
    let (dim_i, a) = selected.nonzero().next().expect("rank-1 index");
    let mut out = Vec::new();
    for partner in seen_1d {
        debug_assert_eq!(partner.rank(), 1);
        let (dim_j, b) = match partner.nonzero().next() {
            Some(p) => p,
            None => continue,
        };
        if dim_j == dim_i {
            continue;
        }
        let mut degrees = vec![0u32; m];
        degrees[dim_i] = a;
        degrees[dim_j] = b;
        let child = MultiIndex::new(degrees);
        if config.admits_child(a, b, &child) {
            out.push(child);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Exact-degree rank-1 parents of a rank-2 index.
fn parents_of(alpha: &MultiIndex) -> Vec<MultiIndex> {
    let m = alpha.dimension();
    alpha
        .nonzero()
        .map(|(dim, d)| MultiIndex::univariate(m, dim, d))
        .collect()
}

/// Fit a sparse PCE by the hierarchical adaptive scheme.
pub fn hlar_fit(
    ed: &ExperimentalDesign,
    config: &HeredityConfig,
    input_model: &InputModel,
) -> Result<SparsePceModel> {
    hlar_fit_with_log(ed, config, input_model).map(|(model, _)| model)
}

/// As [`hlar_fit`], additionally returning the per-iteration heredity log.
pub fn hlar_fit_with_log(
    ed: &ExperimentalDesign,
    config: &HeredityConfig,
    input_model: &InputModel,
) -> Result<(SparsePceModel, HlarLog)> {
    config.validate()?;
    if ed.len() < 3 {
        return Err(PceError::InvalidInput(format!(
            "need at least 3 design points, got {}",
            ed.len()
        )));
    }
    let m = input_model.dimension();
    if ed.dimension() != m {
        return Err(PceError::DimensionMismatch {
            expected: m,
            got: ed.dimension(),
        });
    }
    let truncation = TruncationSpec {
        p: config.p,
        q: config.q.unwrap_or(1.0),
        r: Some(MAX_CHILD_RANK),
    };
    if regression::variance_is_degenerate(regression::sample_variance(&ed.outputs), &ed.outputs) {
        let model = constant_model(ed, input_model, truncation, config.p);
        let log = HlarLog {
            steps: Vec::new(),
            best_step: None,
            termination: PathTermination::Exhausted,
            peak_candidates: 0,
            dropped_columns: Vec::new(),
        };
        return Ok((model, log));
    }

    let n = ed.len();
    let u = input_model.standardize_matrix(&ed.inputs)?;
    let families = input_model.families();

    // Univariate value columns per (dimension, degree); child columns are
    // elementwise products of two of these.
    let p = config.p as usize;
    let mut uni: Vec<Vec<DVector<f64>>> = vec![vec![DVector::zeros(n); p]; m];
    for j in 0..m {
        for i in 0..n {
            let table = polynomials::tabulate_unchecked(families[j], config.p, u[(i, j)]);
            for d in 1..=p {
                uni[j][d - 1][i] = table[d];
            }
        }
    }
    let column_of = |alpha: &MultiIndex| -> DVector<f64> {
        let mut nz = alpha.nonzero();
        let (j0, d0) = nz.next().expect("nonzero index");
        let mut col = uni[j0][d0 as usize - 1].clone();
        for (j, d) in nz {
            col.component_mul_assign(&uni[j][d as usize - 1]);
        }
        col
    };

    let seen_1d = initial_candidates(m, config);
    let seen_1d_set: HashSet<MultiIndex> = seen_1d.iter().cloned().collect();
    let mut seen_all: HashSet<MultiIndex> = seen_1d_set.clone();

    let mut dropped = Vec::new();
    let mut pool: Vec<Candidate> = Vec::new();
    for alpha in &seen_1d {
        match Candidate::build(alpha.clone(), &column_of(alpha)) {
            Some(c) => pool.push(c),
            None => dropped.push(alpha.clone()),
        }
    }

    let mut engine = PathEngine::new(&ed.outputs, config.lar.corrected_loo)?;
    let mut active_set: HashSet<MultiIndex> = HashSet::new();
    let mut heredity_steps: Vec<HlarStep> = Vec::new();
    let mut peak = pool.len();
    let max_terms = config
        .lar
        .max_terms
        .unwrap_or(usize::MAX)
        .min(n.saturating_sub(1));

    let termination = loop {
        if engine.n_active() >= max_terms {
            break PathTermination::MaxTerms;
        }
        if pool.is_empty() {
            break PathTermination::Exhausted;
        }
        let mut corr: Vec<f64> = pool
            .iter()
            .map(|c| c.correlation(engine.residual()))
            .collect();
        let Some(top) = select_most_correlated(&pool, &corr)? else {
            break PathTermination::Exhausted;
        };

        // Heredity enrichment: a most-relevant 1-D term spawns interaction
        // children, which immediately compete with it for this selection.
        let mut children_added = 0usize;
        let (sel_idx, generated_now) = if pool[top].alpha.rank() == 1 {
            let child_alphas = generate_children(&pool[top].alpha, &seen_1d, config)?;
            let parent_corr = corr[top].abs();
            let base = pool.len();
            let mut winner: Option<usize> = None; // pool index of the best child
            for alpha in child_alphas {
                if !seen_all.insert(alpha.clone()) {
                    continue; // already a candidate, active, or dropped
                }
                let cand = match Candidate::build(alpha.clone(), &column_of(&alpha)) {
                    Some(c) => c,
                    None => {
                        dropped.push(alpha);
                        continue;
                    }
                };
                let c = cand.correlation(engine.residual());
                if !c.is_finite() {
                    return Err(PceError::NonFiniteCorrelation { index: pool.len() });
                }
                pool.push(cand);
                corr.push(c);
                children_added += 1;
                let better_than_winner = match winner {
                    None => true,
                    Some(w) => {
                        c.abs() > corr[w].abs()
                            || (c.abs() == corr[w].abs()
                                && pool[pool.len() - 1].alpha < pool[w].alpha)
                    }
                };
                if better_than_winner {
                    winner = Some(pool.len() - 1);
                }
            }
            debug_assert_eq!(pool.len(), base + children_added);
            // the parent keeps exact ties
            match winner {
                Some(w) if corr[w].abs() > parent_corr => (w, true),
                _ => (top, false),
            }
        } else {
            (top, false)
        };

        peak = peak.max(pool.len());
        let selected = pool.remove(sel_idx);
        corr.remove(sel_idx);
        let alpha = selected.alpha.clone();

        let (form, active_parents, parents_seen) = if alpha.rank() >= MAX_CHILD_RANK {
            let parents = parents_of(&alpha);
            let active_parents = parents.iter().filter(|p| active_set.contains(*p)).count();
            let parents_seen = parents.iter().all(|p| seen_1d_set.contains(p));
            let form = if active_parents == parents.len() {
                HeredityForm::Strong
            } else {
                HeredityForm::Weak
            };
            (form, active_parents, parents_seen)
        } else {
            (HeredityForm::None, 0, true)
        };
        debug_assert!(parents_seen, "rank-2 candidate with unseen parent: {alpha}");

        match engine.advance(selected, &pool, &corr) {
            StepStatus::Recorded => {}
            StepStatus::RejectedRankDeficient => break PathTermination::RankDeficientStep,
            StepStatus::RejectedSaturated => break PathTermination::SaturatedLeverage,
        }
        active_set.insert(alpha.clone());
        let recorded = engine.steps.last().expect("step was recorded");
        heredity_steps.push(HlarStep {
            selected: alpha,
            form,
            active_parents,
            parents_in_seen_1d: parents_seen,
            generated_this_iteration: generated_now,
            children_added,
            candidate_set_size: pool.len(),
            loo_error: recorded.loo_error,
            empirical_error: recorded.empirical_error,
        });
        if engine.steps_since_improvement() >= config.lar.early_stop_window {
            break PathTermination::EarlyStop;
        }
    };

    let best_step = engine.best_step();
    let active: Vec<MultiIndex> = match best_step {
        Some(idx) => heredity_steps[..=idx]
            .iter()
            .map(|s| s.selected.clone())
            .collect(),
        None => Vec::new(),
    };
    let model = assemble_model(ed, input_model, truncation, config.p, &active, config.lar.corrected_loo)?;
    let log = HlarLog {
        steps: heredity_steps,
        best_step,
        termination,
        peak_candidates: peak,
        dropped_columns: dropped,
    };
    Ok((model, log))
}
