//! Multi-indices and candidate-set generation under the standard, hyperbolic
//! and low-rank truncation schemes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};

/// Relative tolerance for q-norm boundary membership, so that indices with
/// `qnorm == p` exactly are admitted deterministically across platforms.
const QNORM_REL_TOL: f64 = 1e-9;

/// Per-dimension polynomial degrees identifying one tensor-product basis
/// function.
///
/// Equality is componentwise; the `Ord` implementation is graded
/// lexicographic (total degree first, then lexicographic on the degree
/// tuple), which is the canonical iteration order everywhere in this crate.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    degrees: Vec<u32>,
}

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        Self { degrees }
    }

    /// The zero index (constant basis function) in `m` dimensions.
    pub fn zero(m: usize) -> Self {
        Self {
            degrees: vec![0; m],
        }
    }

    /// A rank-1 index with `degree` in dimension `dim` and zeros elsewhere.
    pub fn univariate(m: usize, dim: usize, degree: u32) -> Self {
        let mut degrees = vec![0; m];
        degrees[dim] = degree;
        Self { degrees }
    }

    pub fn dimension(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, dim: usize) -> u32 {
        self.degrees[dim]
    }

    /// `‖α‖₁`, the total degree.
    pub fn total_degree(&self) -> u32 {
        self.degrees.iter().sum()
    }

    /// `‖α‖₀`, the number of nonzero components (interaction order).
    pub fn rank(&self) -> usize {
        self.degrees.iter().filter(|&&d| d > 0).count()
    }

    /// `(Σ αᵢ^q)^{1/q}` for `0 < q ≤ 1`; `qnorm(1)` equals the total degree.
    pub fn qnorm(&self, q: f64) -> f64 {
        if q == 1.0 {
            return f64::from(self.total_degree());
        }
        let sum: f64 = self
            .degrees
            .iter()
            .filter(|&&d| d > 0)
            .map(|&d| f64::from(d).powf(q))
            .sum();
        sum.powf(1.0 / q)
    }

    pub fn is_zero(&self) -> bool {
        self.degrees.iter().all(|&d| d == 0)
    }

    /// Iterator over `(dimension, degree)` pairs with nonzero degree,
    /// ascending in dimension.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.degrees
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, &d)| (i, d))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.degrees.cmp(&other.degrees))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.degrees.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Truncation parameters: maximum degree `p`, hyperbolic exponent `q`, and
/// maximum rank `r` (`None` for unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub p: u32,
    pub q: f64,
    pub r: Option<usize>,
}

impl TruncationSpec {
    pub fn new(p: u32, q: f64, r: Option<usize>) -> Result<Self> {
        let spec = Self { p, q, r };
        spec.validate()?;
        Ok(spec)
    }

    /// The standard total-degree scheme: `q = 1`, rank unbounded.
    pub fn standard(p: u32) -> Self {
        Self { p, q: 1.0, r: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(PceError::InvalidTruncation(format!(
                "p must be >= 1, got {}",
                self.p
            )));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(PceError::InvalidTruncation(format!(
                "q must lie in (0, 1], got {}",
                self.q
            )));
        }
        if let Some(r) = self.r {
            if r < 1 {
                return Err(PceError::InvalidTruncation(
                    "r must be >= 1 when bounded".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Whether `alpha` satisfies both the q-norm and the rank condition.
    pub fn admits(&self, alpha: &MultiIndex) -> bool {
        let r_max = self.r.unwrap_or(alpha.dimension());
        if alpha.rank() > r_max {
            return false;
        }
        if self.q == 1.0 {
            alpha.total_degree() <= self.p
        } else {
            let budget = f64::from(self.p).powf(self.q) * (1.0 + QNORM_REL_TOL);
            let sum: f64 = alpha
                .nonzero()
                .map(|(_, d)| f64::from(d).powf(self.q))
                .sum();
            sum <= budget
        }
    }
}

/// Enumerate every multi-index in `ℕ^m` admitted by `spec`, in canonical
/// (graded lexicographic) order. The zero index is always present and comes
/// first.
///
/// The enumeration is a recursive descent over dimensions with early pruning
/// on the partial q-norm sum and the rank count, so high-dimensional sparse
/// specs never touch the full `(p+1)^m` grid.
pub fn generate_candidate_set(m: usize, spec: &TruncationSpec) -> Result<Vec<MultiIndex>> {
    spec.validate()?;
    if m == 0 {
        return Err(PceError::InvalidInput(
            "dimension must be >= 1".to_string(),
        ));
    }
    let r_max = spec.r.unwrap_or(m).min(m);
    // Contribution of degree d to Σ αᵢ^q; index 0 unused.
    let powers: Vec<f64> = (0..=spec.p).map(|d| f64::from(d).powf(spec.q)).collect();
    let budget = if spec.q == 1.0 {
        f64::from(spec.p)
    } else {
        f64::from(spec.p).powf(spec.q) * (1.0 + QNORM_REL_TOL)
    };

    let mut out = Vec::new();
    let mut current = vec![0u32; m];
    descend(m, spec.p, r_max, &powers, budget, 0, 0, 0.0, &mut current, &mut out);
    out.sort_unstable();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    m: usize,
    p: u32,
    r_max: usize,
    powers: &[f64],
    budget: f64,
    dim: usize,
    rank_used: usize,
    qsum: f64,
    current: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if dim == m {
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    // degree 0 in this dimension
    current[dim] = 0;
    descend(m, p, r_max, powers, budget, dim + 1, rank_used, qsum, current, out);
    if rank_used == r_max {
        return;
    }
    for d in 1..=p {
        let next = qsum + powers[d as usize];
        if next > budget {
            break; // powers are increasing in d
        }
        current[dim] = d;
        descend(m, p, r_max, powers, budget, dim + 1, rank_used + 1, next, current, out);
    }
    current[dim] = 0;
}

/// Order-preserving subset of `set` with rank exactly `k`.
pub fn filter_rank(set: &[MultiIndex], k: usize) -> Vec<MultiIndex> {
    set.iter().filter(|a| a.rank() == k).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        let k = k.min(n - k);
        let mut acc = 1u64;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    /// Exhaustive-scan oracle over the full grid `αᵢ ≤ p`.
    fn brute_force(m: usize, spec: &TruncationSpec) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let total = (spec.p as usize + 1).pow(m as u32);
        for code in 0..total {
            let mut rem = code;
            let mut degrees = vec![0u32; m];
            for d in degrees.iter_mut() {
                *d = (rem % (spec.p as usize + 1)) as u32;
                rem /= spec.p as usize + 1;
            }
            let alpha = MultiIndex::new(degrees);
            if spec.admits(&alpha) {
                out.push(alpha);
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn norms_and_rank() {
        let a = MultiIndex::new(vec![2, 0, 3]);
        assert_eq!(a.total_degree(), 5);
        assert_eq!(a.rank(), 2);
        assert_eq!(a.qnorm(1.0), 5.0);
        let q = 0.5;
        let expected = (2f64.powf(q) + 3f64.powf(q)).powf(1.0 / q);
        assert!((a.qnorm(q) - expected).abs() < 1e-14);
    }

    #[test]
    fn canonical_order_is_graded_lex() {
        let mut set = vec![
            MultiIndex::new(vec![3, 0]),
            MultiIndex::new(vec![0, 1]),
            MultiIndex::new(vec![0, 3]),
            MultiIndex::new(vec![1, 2]),
            MultiIndex::new(vec![0, 0]),
            MultiIndex::new(vec![1, 0]),
        ];
        set.sort_unstable();
        let shown: Vec<String> = set.iter().map(|a| a.to_string()).collect();
        assert_eq!(shown, vec!["(0,0)", "(0,1)", "(1,0)", "(0,3)", "(1,2)", "(3,0)"]);
    }

    #[test]
    fn standard_scheme_cardinality() {
        let set = generate_candidate_set(2, &TruncationSpec::new(5, 1.0, Some(2)).unwrap()).unwrap();
        assert_eq!(set.len(), 21); // C(7,5)
        assert!(set[0].is_zero());
    }

    #[test]
    fn low_rank_cardinality_m8_p3() {
        let set = generate_candidate_set(8, &TruncationSpec::new(3, 1.0, Some(2)).unwrap()).unwrap();
        assert_eq!(set.len(), 109);
        assert_eq!(set, brute_force(8, &TruncationSpec::new(3, 1.0, Some(2)).unwrap()));
    }

    #[test]
    fn hyperbolic_set_matches_exhaustive_scan() {
        // p=5, q=0.75, r=2 in two dimensions: 1 constant, 10 univariate,
        // and the five pairs (1,1),(1,2),(1,3),(2,1),(3,1).
        let spec = TruncationSpec::new(5, 0.75, Some(2)).unwrap();
        let set = generate_candidate_set(2, &spec).unwrap();
        assert_eq!(set, brute_force(2, &spec));
        assert_eq!(set.len(), 16);
    }

    #[test]
    fn qnorm_boundary_is_included() {
        // (5,0) has qnorm exactly 5 for every q; it must be admitted.
        let spec = TruncationSpec::new(5, 0.75, Some(2)).unwrap();
        assert!(spec.admits(&MultiIndex::new(vec![5, 0])));
    }

    #[test]
    fn monotone_in_q_p_r() {
        let m = 3;
        let base = generate_candidate_set(m, &TruncationSpec::new(4, 0.5, Some(2)).unwrap()).unwrap();
        for (p, q, r) in [(4, 0.75, Some(2)), (5, 0.5, Some(2)), (4, 0.5, Some(3)), (6, 1.0, None)] {
            let bigger = generate_candidate_set(m, &TruncationSpec::new(p, q, r).unwrap()).unwrap();
            for alpha in &base {
                assert!(bigger.contains(alpha), "{alpha} missing from ({p},{q},{r:?})");
            }
        }
    }

    #[test]
    fn standard_counts_match_binomial() {
        for m in 1..=6usize {
            for p in 1..=8u32 {
                let set = generate_candidate_set(m, &TruncationSpec::standard(p)).unwrap();
                assert_eq!(set.len() as u64, binomial((m as u32 + p) as u64, p as u64));
            }
        }
    }

    #[test]
    fn no_duplicates_and_deterministic() {
        let spec = TruncationSpec::new(6, 0.6, Some(3)).unwrap();
        let a = generate_candidate_set(4, &spec).unwrap();
        let b = generate_candidate_set(4, &spec).unwrap();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
    }

    #[test]
    fn filter_rank_partitions_the_set() {
        let spec = TruncationSpec::new(5, 1.0, Some(2)).unwrap();
        let set = generate_candidate_set(2, &spec).unwrap();
        let r0 = filter_rank(&set, 0);
        let r1 = filter_rank(&set, 1);
        let r2 = filter_rank(&set, 2);
        assert_eq!(r0, vec![MultiIndex::zero(2)]);
        assert_eq!(r1.len(), 10);
        assert_eq!(r2.len(), 10);
        let mut rebuilt: Vec<_> = r0.into_iter().chain(r1).chain(r2).collect();
        rebuilt.sort_unstable();
        assert_eq!(rebuilt, set);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TruncationSpec::new(0, 1.0, None).is_err());
        assert!(TruncationSpec::new(3, 0.0, None).is_err());
        assert!(TruncationSpec::new(3, 1.5, None).is_err());
        assert!(TruncationSpec::new(3, 1.0, Some(0)).is_err());
    }
}
