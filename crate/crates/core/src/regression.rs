//! Least squares, ridge and (adaptive) Lasso fitting on a candidate subset.
//!
//! The Lasso solver minimises `(1/2n)||y - b0 - X b||^2 + lambda * sum_j w_j |b_j|`
//! by cyclic coordinate descent. The intercept `b0` is unpenalised and
//! handled by implicit centering; the gradient `X_c' r / n` is kept up to
//! date with Gram columns computed on demand, so a sweep costs `O(q)` plus
//! one `O(nq)` column per newly active variable.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ActiveSet;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;
const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Set when the design was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "X has {} rows but y has length {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }
    Ok(())
}

/// Least squares of `y` on the columns of `x` (no intercept).
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    check_finite(x, y)?;
    let q = x.ncols();
    if q == 0 {
        return Ok(OlsFit {
            coef: DVector::zeros(0),
            residuals: y.clone(),
            rank_deficient: false,
        });
    }
    if q < x.nrows() {
        // QR is much cheaper than SVD and enough for well-conditioned designs
        let qr = x.clone().qr();
        let r = qr.r();
        let diag = r.diagonal().map(f64::abs);
        if diag.min() > RANK_TOL * diag.max() {
            let qty = qr.q().tr_mul(y);
            if let Some(coef) = r.solve_upper_triangular(&qty) {
                let residuals = y - x * &coef;
                return Ok(OlsFit {
                    coef,
                    residuals,
                    rank_deficient: false,
                });
            }
        }
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let coef = svd
        .solve(y, eps)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let residuals = y - x * &coef;
    Ok(OlsFit {
        coef,
        residuals,
        rank_deficient: rank < q,
    })
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Ridge regression with an unpenalised intercept: minimises
/// `||y - b0 - X b||^2 + penalty ||b||^2`. Returns `(b, b0)`.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, penalty: f64) -> Result<(DVector<f64>, f64)> {
    check_finite(x, y)?;
    if !(penalty > 0.0) {
        return Err(Error::InvalidArgument(format!("ridge penalty must be > 0, got {penalty}")));
    }
    let (n, q) = x.shape();
    let xm = column_means(x);
    let ym = y.mean();
    let mut xc = x.clone();
    for (j, mut c) in xc.column_iter_mut().enumerate() {
        c.add_scalar_mut(-xm[j]);
    }
    let yc = y.add_scalar(-ym);
    let coef = if q <= n {
        let mut g = xc.transpose() * &xc;
        for i in 0..q {
            g[(i, i)] += penalty;
        }
        g.cholesky()
            .ok_or_else(|| Error::Singular("ridge normal equations".into()))?
            .solve(&xc.tr_mul(&yc))
    } else {
        let mut k = &xc * xc.transpose();
        for i in 0..n {
            k[(i, i)] += penalty;
        }
        let z = k
            .cholesky()
            .ok_or_else(|| Error::Singular("ridge dual system".into()))?
            .solve(&yc);
        xc.tr_mul(&z)
    };
    let intercept = ym - xm.dot(&coef);
    Ok((coef, intercept))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Record the objective after every sweep.
    pub trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub weights: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn support(&self) -> ActiveSet {
        ActiveSet::from_unsorted(
            self.beta
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(j, _)| j),
        )
    }

    pub fn df(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }

    pub fn residuals(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        (y - x * &self.beta).add_scalar(-self.intercept)
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate-descent state for one design/response pair; reusable across
/// a path of `lambda` values.
pub struct Lasso<'a> {
    x: &'a DMatrix<f64>,
    n: usize,
    weights: DVector<f64>,
    xmean: DVector<f64>,
    ymean: f64,
    /// Centered `x_j'x_j / n`.
    norms2: DVector<f64>,
    /// Centered `x_j'y / n`.
    xy: DVector<f64>,
    /// Centered `y'y / n`.
    yy: f64,
    gram: Vec<Option<DVector<f64>>>,
}

impl<'a> Lasso<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &DVector<f64>, weights: Option<&DVector<f64>>) -> Result<Self> {
        check_finite(x, y)?;
        let (n, q) = x.shape();
        let weights = match weights {
            Some(w) => {
                if w.len() != q {
                    return Err(Error::Dimension(format!(
                        "{} weights for {q} columns",
                        w.len()
                    )));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidArgument("weights must be finite and >= 0".into()));
                }
                w.clone()
            }
            None => DVector::from_element(q, 1.0),
        };
        let nf = n as f64;
        let xmean = column_means(x);
        let ymean = y.mean();
        let yc = y.add_scalar(-ymean);
        let xy = x.tr_mul(&yc) / nf;
        let norms2 = DVector::from_iterator(
            q,
            x.column_iter()
                .enumerate()
                .map(|(j, c)| (c.norm_squared() / nf - xmean[j] * xmean[j]).max(0.0)),
        );
        Ok(Self {
            x,
            n,
            weights,
            xmean,
            ymean,
            norms2,
            xy,
            yy: yc.norm_squared() / nf,
            gram: vec![None; q],
        })
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    /// Smallest `lambda` at which every penalised coefficient is zero
    /// (exact when no coefficient is unpenalised).
    pub fn lambda_max(&self) -> f64 {
        self.xy
            .iter()
            .zip(self.weights.iter())
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, w)| c.abs() / w)
            .fold(0.0, f64::max)
    }

    fn ensure_gram(&mut self, k: usize) {
        if self.gram[k].is_none() {
            let nf = self.n as f64;
            let mut col = self.x.tr_mul(&self.x.column(k)) / nf;
            col.axpy(-self.xmean[k], &self.xmean, 1.0);
            self.gram[k] = Some(col);
        }
    }

    /// `grad -= delta * G[:, k]`.
    fn update_grad(&mut self, k: usize, delta: f64, grad: &mut DVector<f64>) {
        self.ensure_gram(k);
        let col = self.gram[k].as_ref().expect("just filled");
        grad.axpy(-delta, col, 1.0);
    }

    fn objective_from(&self, beta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
        let mse = (self.yy - beta.dot(&self.xy) - beta.dot(grad)).max(0.0);
        let pen: f64 = beta
            .iter()
            .zip(self.weights.iter())
            .map(|(b, w)| w * b.abs())
            .sum();
        0.5 * mse + lambda * pen
    }

    /// One coordinate pass over `coords`; returns the largest change.
    fn sweep(&mut self, coords: &[usize], beta: &mut DVector<f64>, grad: &mut DVector<f64>, lambda: f64) -> f64 {
        let mut max_delta: f64 = 0.0;
        for &j in coords {
            let a = self.norms2[j];
            if a <= 0.0 {
                continue;
            }
            let old = beta[j];
            let z = grad[j] + a * old;
            let new = soft_threshold(z, lambda * self.weights[j]) / a;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                self.update_grad(j, delta, grad);
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Coordinate passes restricted to `active`, run on a compact copy of
    /// the active Gram block until the largest change drops below `tol`.
    /// Leaves `grad` current everywhere. Returns the number of sweeps and
    /// whether `max_sweeps` was hit.
    fn active_loop(
        &mut self,
        active: &[usize],
        beta: &mut DVector<f64>,
        grad: &mut DVector<f64>,
        lambda: f64,
        max_sweeps: usize,
        tol: f64,
        mut trace: Option<&mut Vec<f64>>,
    ) -> (usize, bool) {
        let m = active.len();
        for &k in active {
            self.ensure_gram(k);
        }
        let sub = DMatrix::from_fn(m, m, |a, b| self.gram[active[b]].as_ref().expect("filled")[active[a]]);
        let mut g = DVector::from_iterator(m, active.iter().map(|&k| grad[k]));
        let mut b = DVector::from_iterator(m, active.iter().map(|&k| beta[k]));
        let start = b.clone();
        let mut sweeps = 0;
        let mut capped = false;
        loop {
            if sweeps >= max_sweeps {
                capped = true;
                break;
            }
            let mut max_delta: f64 = 0.0;
            for a in 0..m {
                let j = active[a];
                let norm = self.norms2[j];
                if norm <= 0.0 {
                    continue;
                }
                let old = b[a];
                let new = soft_threshold(g[a] + norm * old, lambda * self.weights[j]) / norm;
                let delta = new - old;
                if delta != 0.0 {
                    b[a] = new;
                    g.axpy(-delta, &sub.column(a), 1.0);
                    max_delta = max_delta.max(delta.abs());
                }
            }
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                // off the active set beta is zero, so only active entries matter
                let mse = (self.yy - b.dot(&g) - active.iter().enumerate().map(|(a, &k)| b[a] * self.xy[k]).sum::<f64>())
                    .max(0.0);
                let pen: f64 = active.iter().enumerate().map(|(a, &k)| self.weights[k] * b[a].abs()).sum();
                t.push(0.5 * mse + lambda * pen);
            }
            if max_delta <= tol {
                break;
            }
        }
        for (a, &k) in active.iter().enumerate() {
            beta[k] = b[a];
        }
        for a in 0..m {
            let delta = b[a] - start[a];
            if delta != 0.0 {
                self.update_grad(active[a], delta, grad);
            }
        }
        (sweeps, capped)
    }

    pub fn fit(&mut self, lambda: f64, warm: Option<&DVector<f64>>, opts: &LassoOptions) -> Result<LassoFit> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let q = self.q();
        let mut beta = match warm {
            Some(b) if b.len() == q => b.clone(),
            Some(b) => {
                return Err(Error::Dimension(format!("warm start of length {} for {q} columns", b.len())))
            }
            None => DVector::zeros(q),
        };
        let mut grad = self.xy.clone();
        for k in 0..q {
            if beta[k] != 0.0 {
                self.update_grad(k, beta[k], &mut grad);
            }
        }
        let all: Vec<usize> = (0..q).collect();
        let mut trace = Vec::new();
        if opts.trace {
            trace.push(self.objective_from(&beta, &grad, lambda));
        }
        let mut sweeps = 0;
        let mut converged = false;
        'outer: while sweeps < opts.max_sweeps {
            let d = self.sweep(&all, &mut beta, &mut grad, lambda);
            sweeps += 1;
            if opts.trace {
                trace.push(self.objective_from(&beta, &grad, lambda));
            }
            if d <= opts.tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = (0..q).filter(|&j| beta[j] != 0.0).collect();
            let remaining = opts.max_sweeps - sweeps;
            let (used, capped) = self.active_loop(
                &active,
                &mut beta,
                &mut grad,
                lambda,
                remaining,
                opts.tol,
                opts.trace.then_some(&mut trace),
            );
            sweeps += used;
            if capped {
                break 'outer;
            }
        }
        // recompute the gradient from scratch so the objective carries no drift
        let resid = self.x * &beta;
        let fitted_mean = self.xmean.dot(&beta);
        let nf = self.n as f64;
        let xr = self.x.tr_mul(&resid) / nf;
        let exact = &self.xy - (&xr - &self.xmean * fitted_mean);
        let objective = self.objective_from(&beta, &exact, lambda);
        let intercept = self.ymean - self.xmean.dot(&beta);
        Ok(LassoFit {
            beta,
            intercept,
            lambda,
            weights: self.weights.clone(),
            sweeps,
            converged,
            objective,
            objective_trace: trace,
        })
    }

    /// Warm-started fits along `lambdas` (descending). Stops early once a
    /// fit has more than `max_df` nonzero coefficients; that fit is kept.
    pub fn path(&mut self, lambdas: &[f64], opts: &LassoOptions, max_df: Option<usize>) -> Result<Vec<LassoFit>> {
        let mut fits: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            let warm = fits.last().map(|f| f.beta.clone());
            let fit = self.fit(l, warm.as_ref(), opts)?;
            let df = fit.df();
            fits.push(fit);
            if max_df.is_some_and(|m| df > m) {
                break;
            }
        }
        Ok(fits)
    }
}

/// Single Lasso fit; `weights = None` means unit weights.
pub fn lasso_cd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    weights: Option<&DVector<f64>>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    Lasso::new(x, y, weights)?.fit(lambda, None, opts)
}

/// `(1/2n)||y - b0 - X b||^2 + lambda * sum w_j |b_j|` evaluated directly.
pub fn lasso_objective(x: &DMatrix<f64>, y: &DVector<f64>, fit: &LassoFit) -> f64 {
    let r = fit.residuals(x, y);
    let pen: f64 = fit
        .beta
        .iter()
        .zip(fit.weights.iter())
        .map(|(b, w)| w * b.abs())
        .sum();
    r.norm_squared() / (2.0 * x.nrows() as f64) + fit.lambda * pen
}

/// Largest violation of the Lasso optimality conditions, evaluated from
/// scratch on the data.
pub fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, fit: &LassoFit) -> f64 {
    let r = fit.residuals(x, y);
    let g = x.tr_mul(&r) / x.nrows() as f64;
    let mut worst = r.mean().abs();
    for j in 0..x.ncols() {
        let t = fit.lambda * fit.weights[j];
        let b = fit.beta[j];
        let v = if b != 0.0 {
            (g[j] - t * b.signum()).abs()
        } else {
            (g[j].abs() - t).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// `count` log-spaced values from `max` down to `max * min_ratio`.
pub fn log_grid(max: f64, min_ratio: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![max],
        _ => {
            let step = min_ratio.ln() / (count - 1) as f64;
            (0..count).map(|i| max * (step * i as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Ols,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLassoConfig {
    pub gamma: f64,
    pub weight_eps: f64,
    pub n_lambda: usize,
    pub min_ratio: f64,
    /// Ridge penalty for the initial estimate, as a multiple of `n`.
    pub ridge_scale: f64,
    /// Path is cut once the fit has more than this fraction of `n` nonzero
    /// coefficients, where BIC degenerates.
    pub max_df_fraction: f64,
}

impl Default for AdaptiveLassoConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            weight_eps: 1e-6,
            n_lambda: 50,
            min_ratio: 1e-4,
            ridge_scale: 1e-3,
            max_df_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveLassoFit {
    pub selected: ActiveSet,
    pub fit: LassoFit,
    pub residuals: DVector<f64>,
    pub init: DVector<f64>,
    pub init_kind: InitKind,
    pub bic: f64,
    /// `(lambda, df, bic)` for every fitted grid point.
    pub path: Vec<(f64, usize, f64)>,
}

fn bic(n: usize, rss: f64, df: usize) -> f64 {
    let nf = n as f64;
    let rss = rss.max(f64::MIN_POSITIVE * nf);
    nf * (rss / nf).ln() + df as f64 * nf.ln()
}

/// Adaptive Lasso with BIC-tuned `lambda`. Selected indices refer to the
/// columns of `x`.
pub fn adaptive_lasso(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &AdaptiveLassoConfig) -> Result<AdaptiveLassoFit> {
    check_finite(x, y)?;
    let (n, q) = x.shape();
    if n < 2 {
        return Err(Error::Dimension("adaptive lasso needs n >= 2".into()));
    }
    let (init, init_kind) = if 2 * q <= n {
        let xm = column_means(x);
        let mut xc = x.clone();
        for (j, mut c) in xc.column_iter_mut().enumerate() {
            c.add_scalar_mut(-xm[j]);
        }
        let ols = ols_fit(&xc, &y.add_scalar(-y.mean()))?;
        (ols.coef, InitKind::Ols)
    } else {
        let (b, _) = ridge(x, y, cfg.ridge_scale * n as f64)?;
        (b, InitKind::Ridge)
    };
    let weights = init.map(|b| 1.0 / (b.abs() + cfg.weight_eps).powf(cfg.gamma));
    let opts = LassoOptions::default();
    let mut solver = Lasso::new(x, y, Some(&weights))?;
    let lmax = solver.lambda_max();
    let null_fit = |solver: &Lasso| -> LassoFit {
        LassoFit {
            beta: DVector::zeros(q),
            intercept: solver.ymean,
            lambda: lmax,
            weights: weights.clone(),
            sweeps: 0,
            converged: true,
            objective: 0.5 * solver.yy,
            objective_trace: Vec::new(),
        }
    };
    if q == 0 || !(lmax > 0.0) {
        let fit = null_fit(&solver);
        let residuals = fit.residuals(x, y);
        let b = bic(n, residuals.norm_squared(), 0);
        return Ok(AdaptiveLassoFit {
            selected: ActiveSet::empty(),
            fit,
            residuals,
            init,
            init_kind,
            bic: b,
            path: vec![(lmax, 0, b)],
        });
    }
    let grid = log_grid(lmax, cfg.min_ratio, cfg.n_lambda);
    let max_df = (cfg.max_df_fraction * n as f64).floor() as usize;
    let fits = solver.path(&grid, &opts, Some(max_df))?;
    let mut path = Vec::with_capacity(fits.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in fits.iter().enumerate() {
        let df = f.df();
        let rss = f.residuals(x, y).norm_squared();
        let b = bic(n, rss, df);
        path.push((f.lambda, df, b));
        if df > max_df {
            continue;
        }
        if best.is_none_or(|(_, bb)| b < bb) {
            best = Some((i, b));
        }
    }
    let (idx, b) = best.expect("first grid point has df 0");
    let fit = fits.into_iter().nth(idx).expect("index from enumeration");
    let residuals = fit.residuals(x, y);
    Ok(AdaptiveLassoFit {
        selected: fit.support(),
        fit,
        residuals,
        init,
        init_kind,
        bic: b,
        path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoCvConfig {
    pub folds: usize,
    pub n_lambda: usize,
    pub min_ratio: f64,
    /// Path is truncated once df exceeds this fraction of `min(n, q)`.
    pub max_df_fraction: f64,
}

impl Default for LassoCvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            n_lambda: 50,
            min_ratio: 1e-2,
            max_df_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoCvFit {
    pub fit: LassoFit,
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
}

/// Plain Lasso tuned by K-fold cross-validation (lambda minimising the mean
/// held-out squared error), refitted on all rows.
pub fn lasso_cv<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &LassoCvConfig,
    rng: &mut R,
) -> Result<LassoCvFit> {
    let (n, q) = x.shape();
    if cfg.folds < 2 || cfg.folds > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= n, got {}",
            cfg.folds
        )));
    }
    let opts = LassoOptions::default();
    let mut full = Lasso::new(x, y, None)?;
    let grid = log_grid(full.lambda_max(), cfg.min_ratio, cfg.n_lambda);
    let max_df = (cfg.max_df_fraction * n.min(q) as f64).floor() as usize;
    let full_path = full.path(&grid, &opts, Some(max_df))?;
    let lambdas: Vec<f64> = grid[..full_path.len()].to_vec();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % cfg.folds;
    }
    let mut cv_error = vec![0.0; lambdas.len()];
    for f in 0..cfg.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = x.select_rows(&train);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let xv = x.select_rows(&test);
        let yv = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
        let mut solver = Lasso::new(&xt, &yt, None)?;
        let fits = solver.path(&lambdas, &opts, None)?;
        for (k, fit) in fits.iter().enumerate() {
            let r = fit.residuals(&xv, &yv);
            cv_error[k] += r.norm_squared() / n as f64;
        }
    }
    let best = cv_error
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let fit = full_path.into_iter().nth(best).expect("cv index within path");
    Ok(LassoCvFit {
        fit,
        lambdas,
        cv_error,
    })
}
