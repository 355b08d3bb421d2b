//! Simulation designs: block AR(1) Gaussian predictors (models A-D) and the
//! rare/weak signal model with 4x4 correlation blocks (model E).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix4};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ActiveSet, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Block length of the AR(1) designs.
pub const AR_BLOCK: usize = 100;
const SIGNS_A: [f64; 10] = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
const SIGNS_B: [f64; 10] = [1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::A => "A",
            ModelKind::B => "B",
            ModelKind::C => "C",
            ModelKind::D => "D",
            ModelKind::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ModelKind::A),
            "B" => Ok(ModelKind::B),
            "C" => Ok(ModelKind::C),
            "D" => Ok(ModelKind::D),
            "E" => Ok(ModelKind::E),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected A, B, C, D or E)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    /// Sample size; ignored by model E, which uses `ceil(p^kappa)`.
    pub n: usize,
    pub p: usize,
    /// Number of AR(1) blocks for A, B and D (`p = 100 m`).
    pub m: usize,
    pub rho: f64,
    /// Coefficient magnitude for model D.
    pub beta_mag: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub pi: f64,
    pub theta: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model: ModelKind, n: usize, p: usize) -> Self {
        Self {
            model,
            n,
            p,
            m: p / AR_BLOCK,
            rho: if model == ModelKind::D { 0.9 } else { 0.5 },
            beta_mag: 1.0,
            sigma: 1.0,
            kappa: 0.975,
            pi: 0.2,
            theta: 0.35,
            seed: 0,
        }
    }

    /// Sample size actually generated.
    pub fn effective_n(&self) -> usize {
        match self.model {
            ModelKind::E => model_e_n(self.p, self.kappa),
            _ => self.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        match self.model {
            ModelKind::A | ModelKind::B | ModelKind::D => {
                if self.m < 2 {
                    return bad(format!("model {} needs m >= 2 blocks, got {}", self.model, self.m));
                }
                if self.p != AR_BLOCK * self.m {
                    return bad(format!(
                        "model {} needs p = {AR_BLOCK} * m, got p = {} and m = {}",
                        self.model, self.p, self.m
                    ));
                }
            }
            ModelKind::C => {
                if self.p < 12 {
                    return bad(format!("model C needs p >= 12, got {}", self.p));
                }
            }
            ModelKind::E => {
                if self.p < 4 || !self.p.is_multiple_of(4) {
                    return bad(format!("model E needs p divisible by 4, got {}", self.p));
                }
                if !(self.kappa > 0.0 && self.kappa <= 1.0) {
                    return bad(format!("kappa must lie in (0, 1], got {}", self.kappa));
                }
                if !(0.0..=1.0).contains(&self.pi) {
                    return bad(format!("pi must lie in [0, 1], got {}", self.pi));
                }
                if !(self.theta > 0.0) || 4.0 * (self.p as f64).powf(-self.theta) > 1.0 {
                    return bad(format!("theta {} gives a signal fraction above 1", self.theta));
                }
            }
        }
        if self.model != ModelKind::E {
            if !(self.rho > -1.0 && self.rho < 1.0) {
                return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
            }
            if !(self.beta_mag >= 0.0 && self.beta_mag.is_finite()) {
                return bad(format!("beta magnitude must be >= 0, got {}", self.beta_mag));
            }
        }
        if self.effective_n() < 2 {
            return bad(format!("n must be >= 2, got {}", self.effective_n()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub beta: DVector<f64>,
    pub support: ActiveSet,
    pub sigma: f64,
}

impl SimTruth {
    fn from_beta(beta: DVector<f64>, sigma: f64) -> Self {
        let support = ActiveSet::from_unsorted(
            beta.iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(j, _)| j),
        );
        Self {
            beta,
            support,
            sigma,
        }
    }
}

/// `sqrt(6 ln p)`.
pub fn tau_p(p: usize) -> f64 {
    (6.0 * (p as f64).ln()).sqrt()
}

/// `ceil(p^kappa)`.
pub fn model_e_n(p: usize, kappa: f64) -> usize {
    (p as f64).powf(kappa).ceil() as usize
}

/// Correlation inside one model-E block (1-based indices `j, k` in 1..=4).
pub fn model_e_entry(j: usize, k: usize) -> f64 {
    let gap = j.abs_diff(k);
    let s = (j + k) as f64;
    let sign = |v: f64| {
        assert!(v != 0.0, "sign(0) in block correlation");
        v.signum()
    };
    match gap {
        0 => 1.0,
        1 => 0.4 * sign(6.0 - s),
        g if g > 2 => 0.05 * sign(5.5 - s),
        _ => 0.0,
    }
}

pub fn model_e_block_corr() -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| model_e_entry(r + 1, c + 1))
}

/// 0-based support for models A and D.
pub fn support_a(m: usize) -> Vec<usize> {
    let mut s = vec![0, 1, m, m + 1];
    s.extend((2..8).map(|k| k * m));
    s
}

/// 0-based support for model B.
pub fn support_b(m: usize) -> Vec<usize> {
    (0..10).map(|k| k * m).collect()
}

/// Fills `x` (n x p) with independent AR(1) chains on consecutive runs of
/// `chain` columns.
fn fill_ar1<R: Rng + ?Sized>(x: &mut DMatrix<f64>, chain: usize, rho: f64, rng: &mut R) {
    let (n, p) = x.shape();
    let innov = (1.0 - rho * rho).sqrt();
    for i in 0..n {
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = if j % chain == 0 {
                z
            } else {
                rho * x[(i, j - 1)] + innov * z
            };
        }
    }
}

fn model_c_support<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<usize> {
    // j1, j2 start adjacent pairs; both pair members must stay in range
    loop {
        let j1 = rng.random_range(0..p - 1);
        let j2 = rng.random_range(0..p - 1);
        let pairs = [j1, j1 + 1, j2, j2 + 1];
        let mut sorted = pairs;
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let rest: Vec<usize> = (0..p).filter(|j| !pairs.contains(j)).collect();
        let picks = index::sample(rng, rest.len(), 6);
        let mut s = pairs.to_vec();
        s.extend(picks.iter().map(|i| rest[i]));
        return s;
    }
}

fn finish<R: Rng + ?Sized>(
    x: DMatrix<f64>,
    beta: DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<(Dataset, SimTruth)> {
    let n = x.nrows();
    let noise = DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let y = &x * &beta + noise;
    let d = Dataset::from_parts(y, x)?.standardize()?;
    Ok((d, SimTruth::from_beta(beta, sigma)))
}

/// Models A-D. The returned dataset is standardized.
pub fn gen_block_ar1<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<(Dataset, SimTruth)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut x = DMatrix::zeros(n, p);
    let mut beta = DVector::zeros(p);
    match spec.model {
        ModelKind::A | ModelKind::D => {
            fill_ar1(&mut x, AR_BLOCK, spec.rho, rng);
            let mag = if spec.model == ModelKind::D { spec.beta_mag } else { 1.0 };
            for (&j, s) in support_a(spec.m).iter().zip(SIGNS_A) {
                beta[j] = s * mag;
            }
        }
        ModelKind::B => {
            fill_ar1(&mut x, AR_BLOCK, spec.rho, rng);
            for (&j, s) in support_b(spec.m).iter().zip(SIGNS_B) {
                beta[j] = s;
            }
        }
        ModelKind::C => {
            let support = model_c_support(p, rng);
            fill_ar1(&mut x, p, spec.rho, rng);
            for (&j, s) in support.iter().zip(SIGNS_A) {
                beta[j] = s;
            }
        }
        ModelKind::E => {
            return Err(Error::InvalidArgument("model E has its own generator".into()));
        }
    }
    finish(x, beta, spec.sigma, rng)
}

/// Signal count per model-E block, in block order.
pub fn model_e_block_counts<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Vec<usize> {
    let g = spec.p / 4;
    let frac = 4.0 * (spec.p as f64).powf(-spec.theta);
    let expected = [
        (1.0 - frac) * g as f64,
        (1.0 - spec.pi) * frac * g as f64,
        spec.pi * frac * g as f64,
    ];
    // largest-remainder rounding to integers summing to g
    let mut counts: Vec<usize> = expected.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = expected[a] - expected[a].floor();
        let rb = expected[b] - expected[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = g - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    let mut cats: Vec<usize> = Vec::with_capacity(g);
    for (c, &k) in counts.iter().enumerate() {
        cats.extend(std::iter::repeat_n(c, k));
    }
    cats.shuffle(rng);
    cats.into_iter()
        .map(|c| match c {
            0 => 0,
            1 => 1,
            _ => rng.random_range(2..=4),
        })
        .collect()
}

/// Model E. The sample size is `ceil(p^kappa)`; `spec.n` is ignored.
pub fn gen_model_e<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<(Dataset, SimTruth)> {
    if spec.model != ModelKind::E {
        return Err(Error::InvalidArgument(format!("model {} is not E", spec.model)));
    }
    spec.validate()?;
    let p = spec.p;
    let n = spec.effective_n();
    let chol = model_e_block_corr()
        .cholesky()
        .ok_or_else(|| Error::Singular("model E block correlation".into()))?;
    let l = chol.l();
    let tau = tau_p(p);
    let mut beta = DVector::zeros(p);
    for (b, k) in model_e_block_counts(spec, rng).into_iter().enumerate() {
        for pos in index::sample(rng, 4, k).into_vec() {
            let mag = if rng.random_bool(0.8) {
                tau
            } else {
                let v: f64 = rng.sample::<f64, _>(StandardNormal).powi(2);
                tau * (1.0 + v / 6.0)
            };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            beta[4 * b + pos] = sign * mag;
        }
    }
    let x = model_e_design(n, p / 4, &l, rng);
    finish(x, beta, spec.sigma, rng)
}

fn model_e_design<R: Rng + ?Sized>(n: usize, blocks: usize, l: &Matrix4<f64>, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, 4 * blocks);
    for i in 0..n {
        for b in 0..blocks {
            let z = nalgebra::Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let v = l * z;
            for r in 0..4 {
                x[(i, 4 * b + r)] = v[r];
            }
        }
    }
    x
}

/// Generates any model from its own seed.
pub fn generate(spec: &ModelSpec) -> Result<(Dataset, SimTruth)> {
    let mut r = rng::stream(spec.seed);
    match spec.model {
        ModelKind::E => gen_model_e(spec, &mut r),
        _ => gen_block_ar1(spec, &mut r),
    }
}
