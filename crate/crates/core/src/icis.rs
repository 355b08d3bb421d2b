//! Iterative screening with bootstrap selection frequencies.
//!
//! Each resample alternates screening and adaptive-Lasso selection on
//! residuals; the fraction of resamples that select a variable is compared
//! against the same fraction under permuted responses to pick a frequency
//! threshold with a target false discovery rate.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov_block::{default_cap, default_delta, partition_dataset, BlockPartition};
use crate::data::{ActiveSet, Dataset, Method, SelectionResult, SelectionRule};
use crate::error::{Error, Result};
use crate::regression::{adaptive_lasso, ols_fit, AdaptiveLassoConfig};
use crate::rng::{derive_seed, substream, TaskKind};
use crate::screening::{default_screen_size, marginal_stats, rank_order, BlockSolver};

const MAX_REDRAWS: usize = 10;
/// Residual norm, relative to the response, treated as an exact fit.
const EXACT_FIT: f64 = 1e-10;

/// Statistic used for the screening steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Screener {
    Cis,
    Sis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcisParams {
    /// Number of bootstrap resamples.
    pub b: usize,
    pub max_iter: usize,
    /// Variables kept per screening step; `None` means `ceil(n / ln n)`.
    pub screen_k: Option<usize>,
    /// Threshold constant `c` in `delta = c sqrt(ln p / n)`.
    pub delta_c: f64,
    /// Explicit correlation threshold, overriding `delta_c`.
    pub delta: Option<f64>,
    /// Block size cap; `None` means `max(2, n / 2)`.
    pub cap: Option<usize>,
    pub seed: u64,
    pub screener: Screener,
    /// Reuse the partition of the original data for every resample.
    pub freeze_partition: bool,
    pub n_perm: usize,
    /// Resamples per permutation; `None` means `max(10, b / 5)`.
    pub b_null: Option<usize>,
    pub adaptive: AdaptiveLassoConfig,
}

impl Default for IcisParams {
    fn default() -> Self {
        Self {
            b: 50,
            max_iter: 5,
            screen_k: None,
            delta_c: 5.0,
            delta: None,
            cap: None,
            seed: 0,
            screener: Screener::Cis,
            freeze_partition: false,
            n_perm: 20,
            b_null: None,
            adaptive: AdaptiveLassoConfig::default(),
        }
    }
}

impl IcisParams {
    pub fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::InvalidArgument("number of resamples must be >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if self.screen_k == Some(0) {
            return Err(Error::InvalidArgument("screen_k must be >= 1".into()));
        }
        if self.n_perm < 1 {
            return Err(Error::InvalidArgument("n_perm must be >= 1".into()));
        }
        if self.b_null == Some(0) {
            return Err(Error::InvalidArgument("b_null must be >= 1".into()));
        }
        Ok(())
    }

    pub fn screen_k_for(&self, n: usize, p: usize) -> usize {
        self.screen_k.unwrap_or_else(|| default_screen_size(n)).min(p)
    }

    pub fn b_null(&self) -> usize {
        self.b_null.unwrap_or((self.b / 5).max(10))
    }

    pub fn delta_for(&self, n: usize, p: usize) -> Result<f64> {
        match self.delta {
            Some(d) => Ok(d),
            None => default_delta(n, p, self.delta_c),
        }
    }

    pub fn cap_for(&self, n: usize) -> usize {
        self.cap.unwrap_or_else(|| default_cap(n))
    }

    /// Block partition of `d` under these parameters.
    pub fn partition(&self, d: &Dataset) -> Result<BlockPartition> {
        partition_dataset(d, self.delta_for(d.n(), d.p())?, self.cap_for(d.n()))
    }
}

/// Outcome of one iterative pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IcisPass {
    pub selected: ActiveSet,
    /// Variables selected in each iteration.
    pub per_iteration: Vec<ActiveSet>,
    /// Union of all screened candidate sets.
    pub screened: ActiveSet,
}

enum Engine {
    Cis(BlockSolver),
    Sis,
}

impl Engine {
    fn stats(&self, d: &Dataset, r: &DVector<f64>) -> Result<Vec<f64>> {
        match self {
            Engine::Cis(s) => s.stats(d.x(), r),
            Engine::Sis => marginal_stats(d.x(), r),
        }
    }
}

/// One pass of screen, select, re-screen on residuals. `partition` is used
/// when given; otherwise it is computed from `d`.
pub fn icis_single(d: &Dataset, params: &IcisParams, partition: Option<&BlockPartition>) -> Result<IcisPass> {
    d.require_standardized()?;
    params.validate()?;
    let (n, p) = (d.n(), d.p());
    let engine = match params.screener {
        Screener::Sis => Engine::Sis,
        Screener::Cis => {
            let owned;
            let part = match partition {
                Some(part) => part,
                None => {
                    owned = params.partition(d)?;
                    &owned
                }
            };
            Engine::Cis(BlockSolver::new(d, part)?)
        }
    };
    let k = params.screen_k_for(n, p);
    let mut in_model = vec![false; p];
    let mut screened = vec![false; p];
    let mut selected: Vec<usize> = Vec::new();
    let mut per_iteration = Vec::new();
    let mut resid = d.y().clone();
    for _ in 0..params.max_iter {
        let stats = match engine.stats(d, &resid) {
            Ok(s) => s,
            Err(Error::ZeroResponse) => break,
            Err(e) => return Err(e),
        };
        let candidates: Vec<usize> = rank_order(&stats)
            .into_iter()
            .filter(|&j| !in_model[j])
            .take(k)
            .collect();
        if candidates.is_empty() {
            break;
        }
        for &j in &candidates {
            screened[j] = true;
        }
        let xs = d.x().select_columns(&candidates);
        let fit = adaptive_lasso(&xs, &resid, &params.adaptive)?;
        let new: Vec<usize> = fit.selected.iter().map(|i| candidates[i]).collect();
        if new.is_empty() {
            break;
        }
        for &j in &new {
            in_model[j] = true;
        }
        selected.extend(&new);
        per_iteration.push(ActiveSet::from_unsorted(new));
        resid = if selected.len() < n {
            let xsel = d.x().select_columns(&selected);
            ols_fit(&xsel, d.y())?.residuals
        } else {
            fit.residuals
        };
        let m = resid.mean();
        resid.add_scalar_mut(-m);
        if resid.norm() <= EXACT_FIT * d.y().norm() {
            break;
        }
    }
    Ok(IcisPass {
        selected: ActiveSet::from_unsorted(selected),
        per_iteration,
        screened: ActiveSet::from_unsorted((0..p).filter(|&j| screened[j])),
    })
}

/// Selection counts over `b` resamples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: Vec<usize>,
    pub b: usize,
}

impl FrequencyTable {
    pub fn psi_hat(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.b as f64).collect()
    }

    /// Number of variables with frequency at least `psi`.
    pub fn count_at(&self, psi: f64) -> usize {
        self.counts.iter().filter(|&&c| self.reaches(c, psi)).count()
    }

    fn reaches(&self, count: usize, psi: f64) -> bool {
        // integer comparison avoids 0.1 * 10 style rounding surprises
        count as f64 >= psi * self.b as f64 - 1e-9
    }
}

/// Draws a bootstrap sample of rows and re-standardizes it, redrawing when
/// a column turns constant.
fn bootstrap<R: Rng + ?Sized>(raw: &Dataset, index: usize, rng: &mut R) -> Result<Dataset> {
    let n = raw.n();
    for _ in 0..MAX_REDRAWS {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        match raw.select_rows(&rows).standardize() {
            Ok(d) => return Ok(d),
            Err(Error::ConstantColumn(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleExhausted(index))
}

fn resample_pass(d: &Dataset, params: &IcisParams, frozen: Option<&BlockPartition>, seed: u64, r: usize) -> Result<ActiveSet> {
    let mut rng = substream(seed, TaskKind::Resample, r as u64);
    let boot = bootstrap(d, r, &mut rng)?;
    Ok(icis_single(&boot, params, frozen)?.selected)
}

fn tabulate(p: usize, b: usize, sets: Vec<Result<ActiveSet>>) -> Result<FrequencyTable> {
    let mut counts = vec![0; p];
    for s in sets {
        for j in s?.iter() {
            counts[j] += 1;
        }
    }
    Ok(FrequencyTable { counts, b })
}

fn frozen_partition(d: &Dataset, params: &IcisParams) -> Result<Option<BlockPartition>> {
    if params.freeze_partition && params.screener == Screener::Cis {
        Ok(Some(params.partition(d)?))
    } else {
        Ok(None)
    }
}

/// Selection frequencies over `params.b` bootstrap resamples. Resample `r`
/// draws from substream `(params.seed, r)`, so the table does not depend on
/// the thread count.
pub fn icis_resample(d: &Dataset, params: &IcisParams) -> Result<FrequencyTable> {
    d.require_standardized()?;
    params.validate()?;
    let frozen = frozen_partition(d, params)?;
    let sets: Vec<Result<ActiveSet>> = (0..params.b)
        .into_par_iter()
        .map(|r| resample_pass(d, params, frozen.as_ref(), params.seed, r))
        .collect();
    tabulate(d.p(), params.b, sets)
}

pub fn select_by_frequency(f: &FrequencyTable, psi: f64) -> SelectionResult {
    let selected = ActiveSet::from_unsorted(
        f.counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| f.reaches(c, psi))
            .map(|(j, _)| j),
    );
    SelectionResult {
        selected,
        method: Method::Icis,
        rule: SelectionRule::Frequency(psi),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrCurve {
    /// `1/b, 2/b, ..., 1`.
    pub thresholds: Vec<f64>,
    /// Mean number of null variables at or above each threshold.
    pub null_mean: Vec<f64>,
    /// Observed number of variables at or above each threshold.
    pub observed: Vec<usize>,
    pub fdr_raw: Vec<f64>,
    /// Running minimum of `fdr_raw` from the lowest threshold upward.
    pub fdr_hat: Vec<f64>,
    pub chosen_psi: f64,
    pub q: f64,
}

/// Builds the FDR curve from observed and permutation null tables.
pub fn fdr_curve(observed: &FrequencyTable, nulls: &[FrequencyTable], q: f64) -> Result<FdrCurve> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    if nulls.is_empty() {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let b = observed.b;
    let thresholds: Vec<f64> = (1..=b).map(|i| i as f64 / b as f64).collect();
    let mut null_mean = Vec::with_capacity(b);
    let mut obs = Vec::with_capacity(b);
    let mut fdr_raw = Vec::with_capacity(b);
    for &psi in &thresholds {
        let nm = nulls.iter().map(|t| t.count_at(psi) as f64).sum::<f64>() / nulls.len() as f64;
        let o = observed.count_at(psi);
        null_mean.push(nm);
        obs.push(o);
        fdr_raw.push(nm / o.max(1) as f64);
    }
    let mut fdr_hat = fdr_raw.clone();
    for i in 1..b {
        fdr_hat[i] = fdr_hat[i].min(fdr_hat[i - 1]);
    }
    let chosen_psi = thresholds
        .iter()
        .zip(&fdr_hat)
        .find(|(_, &f)| f <= q)
        .map(|(&t, _)| t)
        .unwrap_or(1.0 + 1.0 / b as f64);
    Ok(FdrCurve {
        thresholds,
        null_mean,
        observed: obs,
        fdr_raw,
        fdr_hat,
        chosen_psi,
        q,
    })
}

/// Selection-frequency tables under `n_perm` permutations of the response,
/// each with `params.b_null()` resamples.
pub fn null_tables(d: &Dataset, params: &IcisParams) -> Result<Vec<FrequencyTable>> {
    d.require_standardized()?;
    params.validate()?;
    let frozen = frozen_partition(d, params)?;
    let b_null = params.b_null();
    let permuted: Vec<Dataset> = (0..params.n_perm)
        .map(|k| {
            let mut rng = substream(params.seed, TaskKind::Permutation, k as u64);
            let mut y: Vec<f64> = d.y().iter().copied().collect();
            y.shuffle(&mut rng);
            d.with_response(DVector::from_vec(y))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..params.n_perm)
        .flat_map(|k| (0..b_null).map(move |r| (k, r)))
        .collect();
    let sets: Vec<Result<ActiveSet>> = tasks
        .par_iter()
        .map(|&(k, r)| {
            let seed = derive_seed(params.seed, TaskKind::NullResample, k as u64);
            resample_pass(&permuted[k], params, frozen.as_ref(), seed, r)
        })
        .collect();
    let mut iter = sets.into_iter();
    (0..params.n_perm)
        .map(|_| tabulate(d.p(), b_null, iter.by_ref().take(b_null).collect()))
        .collect()
}

pub fn permutation_fdr(d: &Dataset, observed: &FrequencyTable, q: f64, params: &IcisParams) -> Result<FdrCurve> {
    fdr_curve(observed, &null_tables(d, params)?, q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcisOutcome {
    pub frequencies: FrequencyTable,
    pub fdr: FdrCurve,
    pub selection: SelectionResult,
}

/// Full pipeline: resample frequencies, permutation FDR, final selection.
pub fn run_icis(d: &Dataset, params: &IcisParams, q: f64) -> Result<IcisOutcome> {
    let frequencies = icis_resample(d, params)?;
    let fdr = permutation_fdr(d, &frequencies, q, params)?;
    let selection = select_by_frequency(&frequencies, fdr.chosen_psi);
    Ok(IcisOutcome {
        frequencies,
        fdr,
        selection,
    })
}
