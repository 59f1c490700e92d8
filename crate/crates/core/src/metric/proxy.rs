use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::stats::average_ranks;

/// What the linear proxy is fitted to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyMode {
    /// Least squares on the classifier probabilities.
    #[default]
    Ols,
    /// Least squares on the ranks of the probabilities.
    Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Numerical rank of the design matrix, intercept column included.
    pub rank: usize,
    /// The design matrix was rank deficient and the minimum-norm solution
    /// was taken.
    pub rank_deficient: bool,
}

/// Least-squares fit of `target` on the columns of `rows` with an
/// intercept, via SVD (minimum-norm when rank deficient).
pub fn fit_linear_proxy(rows: &[Vec<f64>], target: &[f64], mode: ProxyMode) -> Result<ProxyFit> {
    if rows.len() != target.len() || rows.is_empty() {
        return Err(Error::InvalidInput("rows and target differ in length".into()));
    }
    let n = rows.len();
    let d = rows[0].len();
    let y: Vec<f64> = match mode {
        ProxyMode::Ols => target.to_vec(),
        ProxyMode::Rank => average_ranks(target),
    };
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let b = DVector::from_vec(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (n.max(d + 1) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let sol = svd
        .solve(&b, eps)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))?;
    Ok(ProxyFit {
        weights: sol.iter().skip(1).copied().collect(),
        intercept: sol[0],
        rank,
        rank_deficient: rank < d + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::stats::{pearson, spearman};

    fn design() -> Vec<Vec<f64>> {
        vec![
            vec![-1.5, 0.2, 1.0],
            vec![-0.5, -1.1, 0.0],
            vec![0.5, 0.9, -1.0],
            vec![1.5, 0.0, 0.5],
            vec![0.0, 0.4, -0.5],
            vec![-0.2, -0.4, 0.0],
        ]
    }

    #[test]
    fn recovers_exact_linear_target() {
        let x = design();
        let y: Vec<f64> = x.iter().map(|r| 0.4 + 0.25 * r[0]).collect();
        let fit = fit_linear_proxy(&x, &y, ProxyMode::Ols).unwrap();
        assert!((fit.weights[0] - 0.25).abs() < 1e-9);
        assert!(fit.weights[1].abs() < 1e-6 && fit.weights[2].abs() < 1e-6);
        assert!((fit.intercept - 0.4).abs() < 1e-9);
        assert!(!fit.rank_deficient);

        // normal-equations oracle
        let a = DMatrix::from_fn(6, 4, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let beta = (a.transpose() * &a)
            .try_inverse()
            .unwrap()
            * a.transpose()
            * DVector::from_vec(y);
        for (k, w) in fit.weights.iter().enumerate() {
            assert!((w - beta[k + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let fit = fit_linear_proxy(&design(), &[0.6; 6], ProxyMode::Ols).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn monotone_link_keeps_rank_order() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 - 4.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].powi(3)).collect();
        let fit = fit_linear_proxy(&x, &y, ProxyMode::Ols).unwrap();
        let combo: Vec<f64> = x.iter().map(|r| fit.intercept + fit.weights[0] * r[0]).collect();
        assert_eq!(spearman(&combo, &y).unwrap(), 1.0);
        assert!(pearson(&combo, &y).unwrap() < 1.0);
    }

    #[test]
    fn duplicate_columns_are_flagged_and_min_norm() {
        let x: Vec<Vec<f64>> = design().into_iter().map(|r| vec![r[0], r[0]]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let fit = fit_linear_proxy(&x, &y, ProxyMode::Ols).unwrap();
        assert!(fit.rank_deficient);
        assert!((fit.weights[0] - 1.0).abs() < 1e-9 && (fit.weights[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_mode_fits_ranks() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = [0.1, 0.2, 0.25, 0.9, 0.95];
        let fit = fit_linear_proxy(&x, &y, ProxyMode::Rank).unwrap();
        assert!((fit.weights[0] - 1.0).abs() < 1e-9);
    }
}
