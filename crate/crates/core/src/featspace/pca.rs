use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{AuditError, Result};

/// Rows per block when accumulating column sums and the covariance. Blocks
/// are reduced in index order, so results do not depend on the thread count.
const BLOCK_ROWS: usize = 512;

/// Principal axes of a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`; row `j` is mode `j + 1`.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance (divisor `n - 1`), descending.
    pub explained_variance: Vec<f64>,
    /// Sum of all column variances of the fit data.
    pub total_variance: f64,
    pub n_samples: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn modes(&self) -> usize {
        self.components.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// Scores of a single row.
    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(ci, (x, m))| ci * (x - m))
                    .sum()
            })
            .collect()
    }

    /// `mean + Σ_j scores_j · component_j`.
    pub fn reconstruct_row(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (s, c) in scores.iter().zip(&self.components) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += s * ci;
            }
        }
        out
    }
}

/// Fits `k` modes on every row of `x`.
pub fn pca_fit(x: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    pca_fit_rows(x, &rows, k)
}

/// Fits `k` modes on the listed rows of `x`.
///
/// Uses the `d × d` covariance when `d <= n` and the `n × n` Gram matrix of
/// the centered rows otherwise. Each component is signed so that its entry
/// of largest magnitude is positive.
pub fn pca_fit_rows(x: &FeatureMatrix, rows: &[usize], k: usize) -> Result<PcaModel> {
    let n = rows.len();
    let d = x.cols();
    if n < 2 {
        return Err(AuditError::Invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(AuditError::Invalid(format!(
            "PCA mode count {k} outside 1..={} for {n} rows and {d} columns",
            (n - 1).min(d)
        )));
    }
    let mean = column_means(x, rows);
    let denom = (n - 1) as f64;

    let (eigen, total_variance, mut components) = if d <= n {
        let cov = centered_cross_product(x, rows, &mean) / denom;
        let total: f64 = cov.diagonal().iter().sum();
        check_variance(total)?;
        let (values, vectors) = sorted_eigen(cov);
        let comps: Vec<Vec<f64>> = (0..k).map(|j| vectors.column(j).iter().copied().collect()).collect();
        (values, total, comps)
    } else {
        let xc = centered_block(x, rows, &mean);
        let gram = &xc * xc.transpose() / denom;
        let total: f64 = gram.diagonal().iter().sum();
        check_variance(total)?;
        let (values, vectors) = sorted_eigen(gram);
        let scale_tol = values[0] * 1e-12;
        let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            if values[j] > scale_tol {
                // v = Xcᵀ u / sqrt((n - 1) λ)
                let v = xc.tr_mul(&vectors.column(j)) / (denom * values[j]).sqrt();
                comps.push(v.iter().copied().collect());
            } else {
                comps.push(complete_basis(&comps, d));
            }
        }
        (values, total, comps)
    };
    for c in &mut components {
        orient(c);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: eigen.into_iter().take(k).map(|v| v.max(0.0)).collect(),
        total_variance,
        n_samples: n,
    })
}

/// Scores `(x - mean) · componentsᵀ` for every row of `x`, keeping row ids.
pub fn pca_project(model: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    pca_project_rows(model, x, &rows)
}

/// Scores for the listed rows of `x`, in the listed order.
pub fn pca_project_rows(model: &PcaModel, x: &FeatureMatrix, rows: &[usize]) -> Result<FeatureMatrix> {
    if x.cols() != model.dim() {
        return Err(AuditError::Invalid(format!(
            "feature matrix has {} columns, PCA model expects {}",
            x.cols(),
            model.dim()
        )));
    }
    let k = model.modes();
    let data: Vec<f64> = rows
        .par_iter()
        .flat_map_iter(|&r| model.project_row(x.row(r)))
        .collect();
    let ids = rows.iter().map(|&r| x.ids()[r].clone()).collect();
    debug_assert_eq!(data.len(), rows.len() * k);
    FeatureMatrix::new(ids, k, data)
}

fn check_variance(total: f64) -> Result<()> {
    if total > 0.0 {
        Ok(())
    } else {
        Err(AuditError::Degenerate(
            "PCA: every feature column has zero variance".into(),
        ))
    }
}

fn column_means(x: &FeatureMatrix, rows: &[usize]) -> Vec<f64> {
    let d = x.cols();
    let partial: Vec<Vec<f64>> = rows
        .par_chunks(BLOCK_ROWS)
        .map(|block| {
            let mut s = vec![0.0; d];
            for &r in block {
                for (acc, v) in s.iter_mut().zip(x.row(r)) {
                    *acc += v;
                }
            }
            s
        })
        .collect();
    let mut sum = vec![0.0; d];
    for p in partial {
        for (acc, v) in sum.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let n = rows.len() as f64;
    sum.into_iter().map(|s| s / n).collect()
}

fn centered_block(x: &FeatureMatrix, rows: &[usize], mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.cols(), |i, j| x.get(rows[i], j) - mean[j])
}

/// `Xcᵀ Xc`, accumulated block by block in row order.
fn centered_cross_product(x: &FeatureMatrix, rows: &[usize], mean: &[f64]) -> DMatrix<f64> {
    let d = x.cols();
    let partial: Vec<DMatrix<f64>> = rows
        .par_chunks(BLOCK_ROWS)
        .map(|block| {
            let xc = centered_block(x, block, mean);
            xc.tr_mul(&xc)
        })
        .collect();
    let mut acc = DMatrix::zeros(d, d);
    for p in partial {
        acc += p;
    }
    // exact symmetry for the eigensolver
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (acc[(i, j)] + acc[(j, i)]);
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    acc
}

/// Eigenpairs sorted by descending eigenvalue (ties keep solver order).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Unit vector orthogonal to `basis`, from Gram-Schmidt on the standard basis.
fn complete_basis(basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..d {
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
            best = Some((norm, v));
        }
        if norm > 0.5 {
            break;
        }
    }
    let (norm, v) = best.expect("d >= 1");
    v.into_iter().map(|x| x / norm).collect()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
