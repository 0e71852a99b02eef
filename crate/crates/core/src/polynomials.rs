//! Orthonormal univariate bases (Legendre and probabilists' Hermite) and
//! their tensor-product multivariate evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::multiindex::MultiIndex;

/// Hard cap on the univariate degree; the recurrences are stable well beyond
/// the degrees any fit here reaches.
pub const MAX_DEGREE: u32 = 50;

/// Univariate orthonormal polynomial family.
///
/// `Legendre` is orthonormal with respect to the uniform density 1/2 on
/// [-1, 1]; `Hermite` (probabilists' convention) with respect to the standard
/// normal density on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    Legendre,
    Hermite,
}

/// Evaluate the degree-`k` orthonormal polynomial at the standardized
/// coordinate `u`.
///
/// Both families are evaluated through the three-term recurrence written
/// directly on the normalized polynomials, so no separate normalization
/// factor (and no factorial overflow) ever appears.
pub fn eval_univariate(family: PolyFamily, degree: u32, u: f64) -> Result<f64> {
    if degree > MAX_DEGREE {
        return Err(PceError::DegreeOverflow {
            degree,
            cap: MAX_DEGREE,
        });
    }
    if !u.is_finite() {
        return Err(PceError::InvalidInput(format!(
            "non-finite coordinate {u}"
        )));
    }
    Ok(eval_unchecked(family, degree, u))
}

/// Recurrence without the argument checks; callers guarantee `degree` is
/// within the cap and `u` is finite.
pub(crate) fn eval_unchecked(family: PolyFamily, degree: u32, u: f64) -> f64 {
    match family {
        PolyFamily::Legendre => legendre_orthonormal(degree, u),
        PolyFamily::Hermite => hermite_orthonormal(degree, u),
    }
}

/// ψ̃_k(u) = √(2k+1) P_k(u), via
/// ψ̃_{k+1} = (u ψ̃_k − a_{k−1} ψ̃_{k−1}) / a_k with a_k = (k+1)/√((2k+1)(2k+3)).
fn legendre_orthonormal(degree: u32, u: f64) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 3f64.sqrt() * u;
    for k in 1..degree {
        let k = f64::from(k);
        let a_k = (k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0)).sqrt();
        let a_km1 = k / ((2.0 * k - 1.0) * (2.0 * k + 1.0)).sqrt();
        let next = (u * cur - a_km1 * prev) / a_k;
        prev = cur;
        cur = next;
    }
    cur
}

/// ψ̃_k(u) = He_k(u)/√(k!), via ψ̃_{k+1} = (u ψ̃_k − √k ψ̃_{k−1}) / √(k+1).
fn hermite_orthonormal(degree: u32, u: f64) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = u;
    for k in 1..degree {
        let k = f64::from(k);
        let next = (u * cur - k.sqrt() * prev) / (k + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// All values ψ̃_0(u) … ψ̃_max_degree(u) from a single pass of the
/// recurrence, for callers that tabulate whole columns.
pub(crate) fn tabulate_unchecked(family: PolyFamily, max_degree: u32, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree as usize + 1);
    out.push(1.0);
    if max_degree == 0 {
        return out;
    }
    match family {
        PolyFamily::Legendre => {
            out.push(3f64.sqrt() * u);
            for k in 1..max_degree {
                let k = f64::from(k);
                let a_k = (k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0)).sqrt();
                let a_km1 = k / ((2.0 * k - 1.0) * (2.0 * k + 1.0)).sqrt();
                let next = (u * out[out.len() - 1] - a_km1 * out[out.len() - 2]) / a_k;
                out.push(next);
            }
        }
        PolyFamily::Hermite => {
            out.push(u);
            for k in 1..max_degree {
                let k = f64::from(k);
                let next =
                    (u * out[out.len() - 1] - k.sqrt() * out[out.len() - 2]) / (k + 1.0).sqrt();
                out.push(next);
            }
        }
    }
    out
}

/// Evaluate the tensor-product basis function `ψ̃_α(u) = Π_i ψ̃_{α_i}(u_i)`.
///
/// Zero-degree factors contribute exactly 1 and are skipped; the remaining
/// factors multiply in ascending dimension order.
pub fn eval_multivariate(families: &[PolyFamily], alpha: &MultiIndex, u: &[f64]) -> Result<f64> {
    if alpha.dimension() != u.len() {
        return Err(PceError::DimensionMismatch {
            expected: alpha.dimension(),
            got: u.len(),
        });
    }
    if families.len() != u.len() {
        return Err(PceError::DimensionMismatch {
            expected: families.len(),
            got: u.len(),
        });
    }
    let mut product = 1.0;
    for (dim, degree) in alpha.nonzero() {
        product *= eval_univariate(families[dim], degree, u[dim])?;
    }
    Ok(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SQRT_3: f64 = 1.732050807568877_2;

    #[test]
    fn constant_basis_is_one() {
        assert_eq!(eval_univariate(PolyFamily::Legendre, 0, 0.3).unwrap(), 1.0);
        assert_eq!(eval_univariate(PolyFamily::Hermite, 0, -2.4).unwrap(), 1.0);
    }

    #[test]
    fn legendre_degree_one_at_endpoint() {
        let v = eval_univariate(PolyFamily::Legendre, 1, 1.0).unwrap();
        assert_relative_eq!(v, SQRT_3, max_relative = 1e-15);
    }

    #[test]
    fn hermite_degree_two_at_origin() {
        // He_2(0) = -1, normalized by √(2!).
        let v = eval_univariate(PolyFamily::Hermite, 2, 0.0).unwrap();
        assert_relative_eq!(v, -std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
    }

    #[test]
    fn matches_closed_forms_up_to_degree_three() {
        let legendre = [
            |_: f64| 1.0,
            |u: f64| 3f64.sqrt() * u,
            |u: f64| 5f64.sqrt() * (3.0 * u * u - 1.0) / 2.0,
            |u: f64| 7f64.sqrt() * (5.0 * u * u * u - 3.0 * u) / 2.0,
        ];
        let hermite = [
            |_: f64| 1.0,
            |u: f64| u,
            |u: f64| (u * u - 1.0) / 2f64.sqrt(),
            |u: f64| (u * u * u - 3.0 * u) / 6f64.sqrt(),
        ];
        for i in 0..=40 {
            let u = -1.0 + 0.05 * i as f64;
            for k in 0..4u32 {
                let got = eval_univariate(PolyFamily::Legendre, k, u).unwrap();
                assert!((got - legendre[k as usize](u)).abs() < 1e-12, "legendre k={k} u={u}");
            }
            let u = -4.0 + 0.2 * i as f64;
            for k in 0..4u32 {
                let got = eval_univariate(PolyFamily::Hermite, k, u).unwrap();
                assert!((got - hermite[k as usize](u)).abs() < 1e-12, "hermite k={k} u={u}");
            }
        }
    }

    #[test]
    fn degree_cap_and_non_finite_are_errors() {
        assert!(matches!(
            eval_univariate(PolyFamily::Legendre, MAX_DEGREE + 1, 0.0),
            Err(PceError::DegreeOverflow { .. })
        ));
        assert!(matches!(
            eval_univariate(PolyFamily::Hermite, 3, f64::NAN),
            Err(PceError::InvalidInput(_))
        ));
        // the cap itself is fine
        assert!(eval_univariate(PolyFamily::Legendre, MAX_DEGREE, 0.5).is_ok());
    }

    #[test]
    fn multivariate_constant_term() {
        let families = [PolyFamily::Legendre, PolyFamily::Hermite];
        let v = eval_multivariate(&families, &MultiIndex::zero(2), &[0.4, -1.3]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn multivariate_reduces_to_univariate() {
        let families = [PolyFamily::Legendre, PolyFamily::Legendre];
        let v = eval_multivariate(&families, &MultiIndex::new(vec![1, 0]), &[1.0, 0.7]).unwrap();
        assert_relative_eq!(v, SQRT_3, max_relative = 1e-15);
        let v = eval_multivariate(&families, &MultiIndex::new(vec![1, 1]), &[1.0, 1.0]).unwrap();
        assert_relative_eq!(v, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn multivariate_is_exactly_the_factor_product() {
        let families = [PolyFamily::Legendre, PolyFamily::Hermite, PolyFamily::Legendre];
        let alpha = MultiIndex::new(vec![4, 2, 0]);
        let u = [0.3, -0.9, 0.1];
        let expected = eval_univariate(PolyFamily::Legendre, 4, 0.3).unwrap()
            * eval_univariate(PolyFamily::Hermite, 2, -0.9).unwrap();
        let got = eval_multivariate(&families, &alpha, &u).unwrap();
        assert_eq!(got, expected); // identical factor order, bit-for-bit
    }

    #[test]
    fn tabulation_matches_single_evaluations() {
        for family in [PolyFamily::Legendre, PolyFamily::Hermite] {
            let table = tabulate_unchecked(family, 12, 0.37);
            for (k, v) in table.iter().enumerate() {
                assert_eq!(*v, eval_univariate(family, k as u32, 0.37).unwrap());
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let families = [PolyFamily::Legendre];
        assert!(matches!(
            eval_multivariate(&families, &MultiIndex::zero(2), &[0.0]),
            Err(PceError::DimensionMismatch { .. })
        ));
    }
}
