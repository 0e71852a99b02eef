//! Design matrices, ordinary least squares and the analytic leave-one-out
//! error used for model selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::multiindex::MultiIndex;
use crate::par;
use crate::polynomials::{self, PolyFamily, MAX_DEGREE};

/// Singular values below this fraction of the largest are treated as zero
/// when deciding the numerical rank.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Leverages at or above `1 - LEVERAGE_TOL` mean the fit interpolates the
/// corresponding point and the LOO residual is undefined.
pub const LEVERAGE_TOL: f64 = 1e-10;

/// Evaluated regressors: `values[(i, j)] = ψ̃_{α_j}(u_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub columns: Vec<MultiIndex>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Normalized errors of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub loo_error: f64,
    pub empirical_error: f64,
}

/// Unbiased sample variance; zero for fewer than two observations.
pub(crate) fn sample_variance(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.mean();
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
}

/// Whether `var` is numerically zero relative to the magnitude of `y`.
pub(crate) fn variance_is_degenerate(var: f64, y: &DVector<f64>) -> bool {
    let scale = y.norm_squared() / y.len().max(1) as f64;
    var <= f64::EPSILON * f64::EPSILON * scale || var == 0.0
}

/// Evaluate every basis function at every standardized point.
///
/// Rows are filled independently (in parallel with the `parallel` feature);
/// per row the univariate recurrences run once per dimension up to the
/// largest degree the basis requests there.
pub fn build_design_matrix(
    points: &DMatrix<f64>,
    basis: &[MultiIndex],
    families: &[PolyFamily],
) -> Result<DesignMatrix> {
    let m = points.ncols();
    if families.len() != m {
        return Err(PceError::DimensionMismatch {
            expected: m,
            got: families.len(),
        });
    }
    let mut max_degree = vec![0u32; m];
    for alpha in basis {
        if alpha.dimension() != m {
            return Err(PceError::DimensionMismatch {
                expected: m,
                got: alpha.dimension(),
            });
        }
        for (dim, d) in alpha.nonzero() {
            if d > MAX_DEGREE {
                return Err(PceError::DegreeOverflow {
                    degree: d,
                    cap: MAX_DEGREE,
                });
            }
            max_degree[dim] = max_degree[dim].max(d);
        }
    }
    if points.iter().any(|u| !u.is_finite()) {
        return Err(PceError::InvalidInput(
            "non-finite standardized coordinate".to_string(),
        ));
    }

    let n = points.nrows();
    let rows: Vec<Vec<f64>> = par::map_range(n, |i| {
        let tables: Vec<Vec<f64>> = (0..m)
            .map(|j| polynomials::tabulate_unchecked(families[j], max_degree[j], points[(i, j)]))
            .collect();
        basis
            .iter()
            .map(|alpha| {
                alpha
                    .nonzero()
                    .map(|(dim, d)| tables[dim][d as usize])
                    .product::<f64>()
            })
            .collect()
    });

    let values = DMatrix::from_fn(n, basis.len(), |i, j| rows[i][j]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PceError::InvalidInput(
            "non-finite basis evaluation".to_string(),
        ));
    }
    Ok(DesignMatrix {
        values,
        columns: basis.to_vec(),
    })
}

/// Least-squares coefficients through a rank-revealing SVD.
pub fn ols_solve(psi: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    solve_matrix(&psi.values, y)
}

pub(crate) fn solve_matrix(values: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, k) = (values.nrows(), values.ncols());
    if y.len() != n {
        return Err(PceError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if k > n {
        return Err(PceError::InvalidInput(format!(
            "underdetermined system: {k} columns, {n} rows"
        )));
    }
    let svd = values.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = RANK_REL_TOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(PceError::RankDeficient { rank });
    }
    svd.solve(y, tol)
        .map_err(|_| PceError::RankDeficient { rank })
}

/// Diagonal of the hat matrix `Ψ(ΨᵀΨ)⁻¹Ψᵀ`, via the thin Q factor.
pub fn leverages(psi: &DesignMatrix) -> Result<DVector<f64>> {
    let (n, k) = (psi.nrows(), psi.ncols());
    if k > n {
        return Err(PceError::InvalidInput(format!(
            "underdetermined system: {k} columns, {n} rows"
        )));
    }
    let q = psi.values.clone().qr().q();
    Ok(DVector::from_fn(n, |i, _| q.row(i).norm_squared()))
}

/// Normalized leave-one-out error of the fit `(Ψ, y, c)`:
/// `(1/N) Σ [(yᵢ − ŷᵢ)/(1 − hᵢ)]² / Var[y]`, the exact LOO residual identity
/// for linear least squares.
pub fn loo_error(psi: &DesignMatrix, y: &DVector<f64>, coefficients: &DVector<f64>) -> Result<f64> {
    let h = leverages(psi)?;
    let var = sample_variance(y);
    if variance_is_degenerate(var, y) {
        return Err(PceError::DegenerateOutput);
    }
    let residual = y - &psi.values * coefficients;
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        if h[i] >= 1.0 - LEVERAGE_TOL {
            return Err(PceError::SaturatedLeverage { index: i });
        }
        let r = residual[i] / (1.0 - h[i]);
        acc += r * r;
    }
    Ok(acc / n as f64 / var)
}

/// Finite-sample LOO correction factor `N/(N−P) · (1 + tr[(ΨᵀΨ)⁻¹])`,
/// which grows with the number of retained terms and counteracts the
/// optimism of the plain LOO estimate when models are selected by it.
pub fn loo_correction_factor(psi: &DesignMatrix) -> Result<f64> {
    let (n, p) = (psi.nrows() as f64, psi.ncols() as f64);
    if n - p < 1.0 {
        return Ok(f64::INFINITY);
    }
    let svd = psi.values.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let tol = RANK_REL_TOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < psi.ncols() {
        return Err(PceError::RankDeficient { rank });
    }
    let trace: f64 = svd.singular_values.iter().map(|s| 1.0 / (s * s)).sum();
    Ok(n / (n - p) * (1.0 + trace))
}

/// Normalized mean-square residual `(1/N)‖y − Ψc‖² / Var[y]`.
pub fn empirical_error(
    psi: &DesignMatrix,
    y: &DVector<f64>,
    coefficients: &DVector<f64>,
) -> Result<f64> {
    let var = sample_variance(y);
    if variance_is_degenerate(var, y) {
        return Err(PceError::DegenerateOutput);
    }
    let residual = y - &psi.values * coefficients;
    Ok(residual.norm_squared() / y.len() as f64 / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inputs::InputModel;
    use crate::multiindex::{generate_candidate_set, TruncationSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_design(seed: u64, n: usize, k: usize) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignMatrix {
            values: DMatrix::from_fn(n, k, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
            columns: (0..k).map(|j| MultiIndex::univariate(k, j, 1)).collect(),
        }
    }

    fn random_vector(seed: u64, n: usize) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| rng.gen::<f64>() * 4.0 - 2.0)
    }

    /// Brute-force oracle: N explicit refits through the normal equations,
    /// independent of the hat-matrix identity under test.
    fn loo_refit_oracle(psi: &DesignMatrix, y: &DVector<f64>) -> f64 {
        let (n, k) = (psi.nrows(), psi.ncols());
        let mut acc = 0.0;
        for i in 0..n {
            let mut xs = DMatrix::zeros(n - 1, k);
            let mut ys = DVector::zeros(n - 1);
            let mut t = 0;
            for r in 0..n {
                if r == i {
                    continue;
                }
                for c in 0..k {
                    xs[(t, c)] = psi.values[(r, c)];
                }
                ys[t] = y[r];
                t += 1;
            }
            let beta = (xs.transpose() * &xs).try_inverse().unwrap() * (xs.transpose() * ys);
            let pred = (psi.values.row(i) * &beta)[(0, 0)];
            acc += (y[i] - pred) * (y[i] - pred);
        }
        acc / n as f64 / sample_variance(y)
    }

    #[test]
    fn constant_basis_gives_ones_matrix() {
        let points = DMatrix::from_row_slice(3, 1, &[0.1, -0.4, 0.9]);
        let psi =
            build_design_matrix(&points, &[MultiIndex::zero(1)], &[PolyFamily::Legendre]).unwrap();
        assert_eq!(psi.values, DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn linear_column_matches_univariate_values() {
        let points = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.0, 0.5, -1.0, -0.3]);
        let basis = vec![MultiIndex::new(vec![1, 0])];
        let psi =
            build_design_matrix(&points, &basis, &[PolyFamily::Legendre; 2]).unwrap();
        let s3 = 3f64.sqrt();
        for (i, expected) in [s3, 0.0, -s3].iter().enumerate() {
            assert!((psi.values[(i, 0)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn lhs_design_columns_are_nearly_centered() {
        let model = InputModel::uniform(2, 0.0, 1.0).unwrap();
        let x = model.lhs_sample(50, 19);
        let u = model.standardize_matrix(&x).unwrap();
        let basis = generate_candidate_set(2, &TruncationSpec::standard(5)).unwrap();
        assert_eq!(basis.len(), 21);
        let psi = build_design_matrix(&u, &basis, &model.families()).unwrap();
        for j in 0..psi.ncols() {
            let mean = psi.values.column(j).mean();
            if psi.columns[j].is_zero() {
                assert_eq!(mean, 1.0);
            } else {
                assert!(mean.abs() < 0.2, "column {j} mean {mean}");
            }
        }
    }

    #[test]
    fn ones_column_recovers_the_mean() {
        let psi = DesignMatrix {
            values: DMatrix::from_element(3, 1, 1.0),
            columns: vec![MultiIndex::zero(1)],
        };
        let y = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let c = ols_solve(&psi, &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_coefficients_are_recovered() {
        let psi = random_design(3, 20, 5);
        let c_true = DVector::from_vec(vec![1.5, -2.0, 0.25, 3.0, -0.75]);
        let y = &psi.values * &c_true;
        let c = ols_solve(&psi, &y).unwrap();
        assert!((&c - &c_true).norm() / c_true.norm() < 1e-10);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let psi = random_design(4, 20, 5);
        let y = random_vector(5, 20);
        let c = ols_solve(&psi, &y).unwrap();
        let xtx = psi.values.transpose() * &psi.values;
        let oracle = xtx.try_inverse().unwrap() * (psi.values.transpose() * &y);
        assert!((&c - &oracle).norm() / oracle.norm() < 1e-8);
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let psi = random_design(6, 30, 7);
        let y = random_vector(7, 30);
        let c = ols_solve(&psi, &y).unwrap();
        let residual = &y - &psi.values * &c;
        for j in 0..psi.ncols() {
            let dot = psi.values.column(j).dot(&residual);
            assert!(dot.abs() < 1e-8 * y.norm(), "column {j}: {dot}");
        }
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let mut psi = random_design(8, 12, 3);
        let dup = psi.values.column(0).into_owned();
        psi.values.set_column(2, &dup);
        let y = random_vector(9, 12);
        assert!(matches!(
            ols_solve(&psi, &y),
            Err(PceError::RankDeficient { rank: 2 })
        ));
    }

    #[test]
    fn perfect_fit_has_zero_loo() {
        let psi = random_design(10, 15, 3);
        let c = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = &psi.values * &c;
        let loo = loo_error(&psi, &y, &c).unwrap();
        assert!(loo.abs() < 1e-20);
    }

    #[test]
    fn constant_model_loo_matches_closed_form_and_oracle() {
        for n in [3usize, 5, 12] {
            let psi = DesignMatrix {
                values: DMatrix::from_element(n, 1, 1.0),
                columns: vec![MultiIndex::zero(1)],
            };
            let y = random_vector(n as u64, n);
            let c = ols_solve(&psi, &y).unwrap();
            let loo = loo_error(&psi, &y, &c).unwrap();
            let closed = n as f64 / (n as f64 - 1.0);
            assert!((loo - closed).abs() < 1e-10 * closed, "n={n}: {loo} vs {closed}");
            let oracle = loo_refit_oracle(&psi, &y);
            assert!((loo - oracle).abs() < 1e-10 * oracle);
        }
    }

    #[test]
    fn analytic_loo_matches_refit_oracle() {
        let psi = random_design(20, 30, 6);
        let y = random_vector(21, 30);
        let c = ols_solve(&psi, &y).unwrap();
        let loo = loo_error(&psi, &y, &c).unwrap();
        let oracle = loo_refit_oracle(&psi, &y);
        assert!((loo - oracle).abs() / oracle < 1e-8, "{loo} vs {oracle}");
    }

    #[test]
    fn loo_dominates_empirical_error() {
        let psi = random_design(30, 25, 4);
        let y = random_vector(31, 25);
        let c = ols_solve(&psi, &y).unwrap();
        let loo = loo_error(&psi, &y, &c).unwrap();
        let emp = empirical_error(&psi, &y, &c).unwrap();
        assert!(loo >= emp);
    }

    #[test]
    fn empirical_error_examples() {
        let psi = random_design(40, 20, 3);
        let c = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let y = &psi.values * &c;
        assert!(empirical_error(&psi, &y, &c).unwrap() < 1e-25);

        // constant prediction at the sample mean
        let n = 20;
        let y = random_vector(41, n);
        let ones = DesignMatrix {
            values: DMatrix::from_element(n, 1, 1.0),
            columns: vec![MultiIndex::zero(1)],
        };
        let c = DVector::from_vec(vec![y.mean()]);
        let err = empirical_error(&ones, &y, &c).unwrap();
        let expected = (n as f64 - 1.0) / n as f64;
        assert!((err - expected).abs() < 1e-12);

        // direct-formula oracle on a random problem
        let psi = random_design(42, 18, 4);
        let y = random_vector(43, 18);
        let c = ols_solve(&psi, &y).unwrap();
        let direct = (&y - &psi.values * &c).norm_squared() / 18.0 / sample_variance(&y);
        assert_eq!(empirical_error(&psi, &y, &c).unwrap(), direct);
    }

    #[test]
    fn leverages_are_bounded_and_sum_to_k() {
        let psi = random_design(50, 35, 6);
        let h = leverages(&psi).unwrap();
        let mut sum = 0.0;
        for i in 0..h.len() {
            assert!(h[i] >= -1e-12 && h[i] <= 1.0 + 1e-12);
            sum += h[i];
        }
        assert!((sum - 6.0).abs() < 1e-9, "trace {sum}");
    }

    #[test]
    fn square_system_saturates_leverage() {
        let psi = random_design(60, 4, 4);
        let y = random_vector(61, 4);
        let c = solve_matrix(&psi.values, &y).unwrap();
        assert!(matches!(
            loo_error(&psi, &y, &c),
            Err(PceError::SaturatedLeverage { .. })
        ));
    }

    #[test]
    fn constant_output_is_degenerate() {
        let psi = DesignMatrix {
            values: DMatrix::from_element(5, 1, 1.0),
            columns: vec![MultiIndex::zero(1)],
        };
        let y = DVector::from_element(5, 7.0);
        let c = DVector::from_vec(vec![7.0]);
        assert!(matches!(
            loo_error(&psi, &y, &c),
            Err(PceError::DegenerateOutput)
        ));
        assert!(matches!(
            empirical_error(&psi, &y, &c),
            Err(PceError::DegenerateOutput)
        ));
    }
}
