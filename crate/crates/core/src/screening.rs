//! Screening statistics: block-wise semi-partial correlation (CIS), marginal
//! correlation (SIS) and high-dimensional OLS projection (HOLP), plus the
//! ranking utilities shared by all three.
//!
//! The CIS fast path inverts each block Gram `G = X_S' X_S` once. With
//! `b = G^{-1} X_S' y`, the residual `e_j` of `x_j` on the rest of its block
//! satisfies `e_j' e_j = 1 / G^{-1}_jj` and `e_j' y = b_j / G^{-1}_jj`, so
//!
//! ```text
//! rho_j = e_j' y / (||e_j|| ||y||) = b_j / (sqrt(G^{-1}_jj) ||y||)
//! ```
//!
//! for every member of the block at once. [`semi_partial_oracle`] evaluates
//! the same quantity with an explicit projection and is used to check it.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov_block::BlockPartition;
use crate::data::{ActiveSet, Dataset, Method, SelectionResult, SelectionRule};
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-12;
const EIGEN_CUTOFF: f64 = 1e-10;
/// Above this estimated condition number a block switches to the spectral
/// pseudo-inverse.
const CONDITION_LIMIT: f64 = 1e10;
const HOLP_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenStats {
    pub method: Method,
    /// Absolute statistic per predictor.
    pub stats: Vec<f64>,
    pub partition: Option<BlockPartition>,
    pub warnings: Vec<String>,
}

impl ScreenStats {
    pub fn p(&self) -> usize {
        self.stats.len()
    }

    /// Indices ordered by descending statistic, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        rank_order(&self.stats)
    }

    /// 1-based rank of every predictor.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.p()];
        for (pos, j) in self.ranking().into_iter().enumerate() {
            ranks[j] = pos + 1;
        }
        ranks
    }

    pub fn top_k(&self, k: usize) -> ActiveSet {
        ActiveSet::from_unsorted(self.ranking().into_iter().take(k))
    }

    /// Applies a threshold (`stat > nu`) or top-k rule.
    pub fn select(&self, rule: SelectionRule) -> Result<SelectionResult> {
        let selected = match rule {
            SelectionRule::Threshold(nu) => {
                if !(nu > 0.0) {
                    return Err(Error::InvalidArgument(format!("threshold must be > 0, got {nu}")));
                }
                ActiveSet::from_unsorted(
                    self.stats
                        .iter()
                        .enumerate()
                        .filter(|&(_, &s)| s > nu)
                        .map(|(j, _)| j),
                )
            }
            SelectionRule::TopK(k) => {
                if k < 1 || k > self.p() {
                    return Err(Error::InvalidArgument(format!(
                        "top-k needs 1 <= k <= {}, got {k}",
                        self.p()
                    )));
                }
                self.top_k(k)
            }
            SelectionRule::Frequency(_) => {
                return Err(Error::InvalidArgument(
                    "frequency rules apply to selection frequencies, not screening stats".into(),
                ))
            }
        };
        Ok(SelectionResult {
            selected,
            method: self.method,
            rule,
        })
    }

    /// Smallest `k` such that the top-`k` variables contain `truth`.
    pub fn min_model_size(&self, truth: &ActiveSet) -> Result<usize> {
        if truth.is_empty() {
            return Err(Error::InvalidArgument("true model is empty".into()));
        }
        let ranks = self.ranks();
        truth
            .iter()
            .map(|j| {
                ranks.get(j).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("true index {j} out of range"))
                })
            })
            .try_fold(0, |acc, r| r.map(|r| acc.max(r)))
    }
}

pub(crate) fn rank_order(stats: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| match stats[b].total_cmp(&stats[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order
}

/// Default screening size `ceil(n / ln n)`.
pub fn default_screen_size(n: usize) -> usize {
    let n = n.max(2) as f64;
    (n / n.ln()).ceil() as usize
}

/// Explicit orthogonal projector onto the span of a set of columns.
pub struct Projector {
    basis: DMatrix<f64>,
}

impl Projector {
    /// Builds the projector from a thin SVD of `cols`, refusing
    /// rank-deficient input.
    pub fn new(cols: DMatrix<f64>) -> Result<Self> {
        if cols.ncols() == 0 {
            return Ok(Self {
                basis: DMatrix::zeros(cols.nrows(), 0),
            });
        }
        if cols.ncols() >= cols.nrows() {
            return Err(Error::RankDeficient {
                smallest_singular: 0.0,
            });
        }
        let svd = cols.svd(true, false);
        let sv = &svd.singular_values;
        let max = sv.max();
        let min = sv.min();
        if !(min > RANK_TOL * max.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient {
                smallest_singular: min,
            });
        }
        Ok(Self {
            basis: svd.u.expect("left singular vectors requested"),
        })
    }

    /// `(I - P) v`.
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.basis.ncols() == 0 {
            return v.clone();
        }
        let coef = self.basis.tr_mul(v);
        v - &self.basis * coef
    }
}

/// Pieces of the sample semi-partial correlation of `x_j` given the rest of
/// its block: `numerator = x_j'(I - P)y`, `x_residual_sq = x_j'(I - P)x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiPartialParts {
    pub numerator: f64,
    pub x_residual_sq: f64,
    pub y_norm: f64,
}

impl SemiPartialParts {
    pub fn value(&self) -> f64 {
        self.numerator / (self.x_residual_sq.sqrt() * self.y_norm)
    }
}

pub fn semi_partial_parts(d: &Dataset, block: &[usize], j: usize) -> Result<SemiPartialParts> {
    if !block.contains(&j) {
        return Err(Error::InvalidArgument(format!("variable {j} is not in the block")));
    }
    if block.len() >= d.n() {
        return Err(Error::Dimension(format!(
            "block size {} must be below n = {}",
            block.len(),
            d.n()
        )));
    }
    let others: Vec<usize> = block.iter().copied().filter(|&k| k != j).collect();
    let proj = Projector::new(d.x().select_columns(&others))?;
    let xj: DVector<f64> = d.x().column(j).into_owned();
    let e = proj.residualize(&xj);
    let x_residual_sq = e.dot(&xj);
    if x_residual_sq < RESIDUAL_TOL {
        return Err(Error::DegenerateResidual(j));
    }
    let y_norm = d.y().norm();
    if y_norm == 0.0 {
        return Err(Error::ZeroResponse);
    }
    Ok(SemiPartialParts {
        numerator: e.dot(d.y()),
        x_residual_sq,
        y_norm,
    })
}

/// Sample semi-partial correlation of `x_j` with `y` given the other members
/// of `block`, computed with an explicit projection.
pub fn semi_partial_oracle(d: &Dataset, block: &[usize], j: usize) -> Result<f64> {
    semi_partial_parts(d, block, j).map(|p| p.value())
}

struct BlockInverse {
    members: Vec<usize>,
    /// `G^{-1}` (or the spectral pseudo-inverse).
    inv: DMatrix<f64>,
}

/// Per-block inverse Grams for a fixed design and partition; evaluates CIS
/// statistics for any response without refactoring.
pub struct BlockSolver {
    blocks: Vec<BlockInverse>,
    p: usize,
    warnings: Vec<String>,
}

fn invert_gram(g: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let q = g.nrows();
    if let Some(chol) = g.clone().cholesky() {
        let inv = chol.inverse();
        let max_diag = (0..q).map(|i| inv[(i, i)]).fold(0.0, f64::max);
        let kappa = g.trace() * max_diag;
        if kappa.is_finite() && kappa < CONDITION_LIMIT {
            return (inv, false);
        }
    }
    let eig = SymmetricEigen::new(g.clone());
    let lmax = eig.eigenvalues.max();
    let cutoff = EIGEN_CUTOFF * lmax;
    let mut inv = DMatrix::zeros(q, q);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / l;
        }
    }
    (inv, true)
}

impl BlockSolver {
    pub fn new(d: &Dataset, part: &BlockPartition) -> Result<Self> {
        let p = d.p();
        if !part.is_partition_of(p) {
            return Err(Error::InvalidArgument(
                "partition does not cover the predictors".into(),
            ));
        }
        let n = d.n();
        let results: Vec<Result<(BlockInverse, bool)>> = part
            .blocks
            .par_iter()
            .enumerate()
            .map(|(g, members)| {
                if members.len() >= n {
                    return Err(Error::Block {
                        block: g,
                        source: Box::new(Error::Dimension(format!(
                            "block size {} must be below n = {n}",
                            members.len()
                        ))),
                    });
                }
                let xs = d.x().select_columns(members);
                let gram = xs.transpose() * &xs;
                let (inv, pseudo) = invert_gram(&gram);
                Ok((
                    BlockInverse {
                        members: members.clone(),
                        inv,
                    },
                    pseudo,
                ))
            })
            .collect();
        let mut blocks = Vec::with_capacity(results.len());
        let mut warnings = Vec::new();
        for (g, r) in results.into_iter().enumerate() {
            let (b, pseudo) = r?;
            if pseudo {
                warnings.push(format!(
                    "block {g} (size {}) is ill-conditioned; used spectral pseudo-inverse",
                    b.members.len()
                ));
            }
            blocks.push(b);
        }
        Ok(Self { blocks, p, warnings })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `|rho_j|` for every predictor against response `y`.
    pub fn stats(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
        let y_norm = y.norm();
        if !(y_norm > 0.0) {
            return Err(Error::ZeroResponse);
        }
        let xty = x.tr_mul(y);
        let mut stats = vec![0.0; self.p];
        for b in &self.blocks {
            let v = DVector::from_iterator(b.members.len(), b.members.iter().map(|&j| xty[j]));
            let beta = &b.inv * v;
            for (i, &j) in b.members.iter().enumerate() {
                let d = b.inv[(i, i)];
                stats[j] = if d > 0.0 {
                    (beta[i] / (d.sqrt() * y_norm)).abs()
                } else {
                    0.0
                };
            }
        }
        Ok(stats)
    }
}

/// Block-wise semi-partial correlations for every predictor.
pub fn semi_partial_all(d: &Dataset, part: &BlockPartition) -> Result<ScreenStats> {
    let solver = BlockSolver::new(d, part)?;
    let stats = solver.stats(d.x(), d.y())?;
    Ok(ScreenStats {
        method: Method::Cis,
        stats,
        partition: Some(part.clone()),
        warnings: solver.warnings,
    })
}

/// `|x_j' y| / (sqrt(n) ||y||)` for every column, against an arbitrary
/// response.
pub fn marginal_stats(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
    let y_norm = y.norm();
    if !(y_norm > 0.0) {
        return Err(Error::ZeroResponse);
    }
    let scale = (x.nrows() as f64).sqrt() * y_norm;
    Ok(x.tr_mul(y).iter().map(|v| v.abs() / scale).collect())
}

/// Marginal correlation magnitudes (SIS).
pub fn sis_stats(d: &Dataset) -> Result<ScreenStats> {
    d.require_standardized()?;
    Ok(ScreenStats {
        method: Method::Sis,
        stats: marginal_stats(d.x(), d.y())?,
        partition: None,
        warnings: Vec::new(),
    })
}

/// Signed HOLP coefficients `X'(XX')^{-1} y`, plus a flag for the ridge
/// fallback used when `p < n`.
pub fn holp_coefficients(d: &Dataset) -> Result<(DVector<f64>, bool)> {
    let n = d.n();
    let x = d.x();
    let mut xxt = x * x.transpose();
    let ridge = d.p() < n;
    if ridge {
        for i in 0..n {
            xxt[(i, i)] += HOLP_RIDGE * n as f64;
        }
    }
    let chol = xxt
        .cholesky()
        .ok_or_else(|| Error::Singular("XX' is not positive definite".into()))?;
    let z = chol.solve(d.y());
    Ok((x.tr_mul(&z), ridge))
}

/// HOLP statistics `|X'(XX')^{-1} y|`.
pub fn holp_stats(d: &Dataset) -> Result<ScreenStats> {
    d.require_standardized()?;
    let (coef, ridge) = holp_coefficients(d)?;
    let mut warnings = Vec::new();
    if ridge {
        warnings.push(format!(
            "p < n: added ridge {HOLP_RIDGE:e} * n * I to XX'"
        ));
    }
    Ok(ScreenStats {
        method: Method::Holp,
        stats: coef.iter().map(|v| v.abs()).collect(),
        partition: None,
        warnings,
    })
}
