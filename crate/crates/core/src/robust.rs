//! Robust Gaussian location under contamination: the halfspace distance TV',
//! the Tukey-median distance, their projection estimators, and contaminated
//! data generation.
//!
//! Both distances take a sup over halfspaces; here the sup runs over a finite
//! [`DirectionBank`], so computed values never exceed the continuum value. In
//! the plane the Tukey distance can instead enumerate every combinatorially
//! distinct direction, which makes it exact.

use std::f64::consts::{PI, SQRT_2};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::empirical::EmpiricalSample;
use crate::error::{LabError, Result};
use crate::gauss::{normal_cdf, normal_quantile, GaussianModel};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::rng::{self, LabRng};
use crate::stats;

/// Finite set of unit directions standing in for the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBank {
    d: usize,
    /// Row-major `len × d`.
    dirs: Vec<f64>,
    planar_exact: bool,
}

/// `max(512, 50·d)`, or 2 (the two signs) when `d = 1`.
pub fn default_bank_size(d: usize) -> usize {
    if d == 1 {
        2
    } else {
        (50 * d).max(512)
    }
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut c = 2u64;
    while primes.len() < k {
        if primes
            .iter()
            .take_while(|&&p| p * p <= c)
            .all(|&p| !c.is_multiple_of(p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

impl DirectionBank {
    /// Default bank: `default_bank_size(d)` directions.
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        Self::with_size(d, default_bank_size(d), seed)
    }

    /// Bank of `m` directions closed under `v → -v`.
    ///
    /// Half the directions are sign-paired base points. Three quarters of the
    /// base points are deterministic (equally spaced angles in the plane; the
    /// coordinate axes followed by a Halton sequence pushed through the normal
    /// quantile in higher dimension) and the remainder are seeded uniform draws.
    pub fn with_size(d: usize, m: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(LabError::InvalidInput("direction bank needs d >= 1".into()));
        }
        if d == 1 {
            return Self::from_directions(&[vec![1.0], vec![-1.0]]);
        }
        if m < 2 {
            return Err(LabError::InvalidInput(
                "direction bank needs at least 2 directions".into(),
            ));
        }
        let half = m / 2;
        let fixed = (3 * half).div_ceil(4).max(1);
        let mut base: Vec<Vec<f64>> = Vec::with_capacity(half);
        if d == 2 {
            for k in 0..fixed {
                let t = PI * k as f64 / fixed as f64;
                base.push(vec![t.cos(), t.sin()]);
            }
        } else {
            for axis in 0..d.min(fixed) {
                let mut e = vec![0.0; d];
                e[axis] = 1.0;
                base.push(e);
            }
            let primes = first_primes(d);
            let mut idx = 1u64;
            while base.len() < fixed {
                let g: Vec<f64> = primes
                    .iter()
                    .map(|&p| normal_quantile(radical_inverse(idx, p)))
                    .collect();
                idx += 1;
                if let Some(v) = normalized(&g) {
                    base.push(v);
                }
            }
        }
        let mut r = rng::stream(seed, 0x6469_7273);
        while base.len() < half {
            let g: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();
            if let Some(v) = normalized(&g) {
                base.push(v);
            }
        }
        let mut rows = base.clone();
        rows.extend(
            base.iter()
                .map(|v| v.iter().map(|x| -x).collect::<Vec<f64>>()),
        );
        if m % 2 == 1 {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            rows.push(e);
        }
        let mut bank = Self::from_directions(&rows)?;
        bank.planar_exact = d == 2;
        Ok(bank)
    }

    /// Bank from explicit directions, each normalized to unit length.
    pub fn from_directions(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(LabError::InvalidInput("empty direction bank".into()));
        }
        let mut dirs = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(LabError::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            let v = normalized(r).ok_or_else(|| LabError::InvalidInput("zero direction".into()))?;
            dirs.extend(v);
        }
        Ok(DirectionBank {
            d,
            dirs,
            planar_exact: false,
        })
    }

    /// Same deterministic part, new random part.
    pub fn refresh(&self, seed: u64) -> Result<Self> {
        let mut b = Self::with_size(self.d, self.len(), seed)?;
        b.planar_exact = self.planar_exact;
        Ok(b)
    }

    /// Union of two banks (exact duplicates kept; they do not change a sup).
    pub fn extended(&self, other: &Self) -> Result<Self> {
        if other.d != self.d {
            return Err(LabError::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        let mut dirs = self.dirs.clone();
        dirs.extend_from_slice(&other.dirs);
        Ok(DirectionBank {
            d: self.d,
            dirs,
            planar_exact: self.planar_exact || other.planar_exact,
        })
    }

    /// In `d = 2`, makes the Tukey distance enumerate all distinct directions.
    pub fn with_planar_exact(mut self, on: bool) -> Self {
        self.planar_exact = on && self.d == 2;
        self
    }

    pub fn planar_exact(&self) -> bool {
        self.planar_exact
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.dirs.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.dirs[k * self.d..(k + 1) * self.d]
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.chunks_exact(self.d)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const BLOCK: usize = 32;
const PRUNE_MARGIN: f64 = 1e-12;

/// `max(floor, sup_b |F̂(b) - F(b)|)` with `F` the CDF of `N(m, σ²)` and `F̂`
/// the empirical CDF of `sorted`. Blocks whose endpoint bound cannot beat
/// `floor` are skipped, so the return value is exact whenever it exceeds `floor`.
#[allow(clippy::needless_range_loop)]
fn ks_against(sorted: &[f64], m: f64, sigma: f64, floor: f64) -> f64 {
    let n = sorted.len();
    let nf = n as f64;
    if sigma < 1e-12 {
        let below = sorted.partition_point(|&p| p < m);
        let above = n - sorted.partition_point(|&p| p <= m);
        return floor.max(below.max(above) as f64 / nf);
    }
    let cdf = |p: f64| normal_cdf((p - m) / sigma);
    let mut best = floor;
    let mut lo = 0;
    while lo < n {
        let hi = (lo + BLOCK).min(n);
        let f_lo = cdf(sorted[lo]);
        let f_hi = if hi - 1 == lo {
            f_lo
        } else {
            cdf(sorted[hi - 1])
        };
        let bound = (hi as f64 / nf - f_lo).max(f_hi - lo as f64 / nf);
        if bound + PRUNE_MARGIN > best {
            for i in lo..hi {
                let f = if i == lo {
                    f_lo
                } else if i == hi - 1 {
                    f_hi
                } else {
                    cdf(sorted[i])
                };
                let v = ((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
                if v > best {
                    best = v;
                }
            }
        }
        lo = hi;
    }
    best
}

/// A sample projected onto every bank direction, each projection sorted.
/// Build once and evaluate many candidate models against it.
#[derive(Debug)]
pub struct ProjectedSample {
    n: usize,
    bank: DirectionBank,
    sorted: Vec<Vec<f64>>,
    points: Vec<f64>,
    hint: AtomicUsize,
}

impl ProjectedSample {
    pub fn new(sample: &EmpiricalSample, bank: &DirectionBank) -> Result<Self> {
        if sample.d() != bank.dim() {
            return Err(LabError::DimensionMismatch {
                expected: bank.dim(),
                found: sample.d(),
            });
        }
        let sorted = bank
            .directions()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|v| {
                let mut p: Vec<f64> = sample.rows().map(|x| dot(x, v)).collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        Ok(ProjectedSample {
            n: sample.n(),
            bank: bank.clone(),
            sorted,
            points: sample.as_row_major().to_vec(),
            hint: AtomicUsize::new(0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bank(&self) -> &DirectionBank {
        &self.bank
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.bank.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.bank.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// Max over directions of the KS statistic against `N(vᵀμ, s(v)²)`.
    fn max_ks<S: Fn(&[f64]) -> f64>(&self, mean: &[f64], scale: S) -> f64 {
        let m = self.sorted.len();
        let start = self.hint.load(Ordering::Relaxed) % m.max(1);
        let mut best = 0.0;
        let mut arg = start;
        for step in 0..m {
            let k = (start + step) % m;
            let v = self.bank.direction(k);
            let val = ks_against(&self.sorted[k], dot(v, mean), scale(v), best);
            if val > best {
                best = val;
                arg = k;
            }
        }
        self.hint.store(arg, Ordering::Relaxed);
        best
    }

    /// TV' against `N(mean, I)`.
    pub fn tv_prime(&self, mean: &[f64]) -> Result<f64> {
        self.check_dim(mean.len())?;
        Ok(self.max_ks(mean, |_| 1.0))
    }

    /// TV' against `N(mean, cov)`: each projection is compared with
    /// `N(vᵀμ, vᵀΣv)`; a degenerate projection falls back to a step CDF.
    pub fn tv_prime_full(&self, mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
        self.check_dim(mean.len())?;
        self.check_dim(cov.nrows())?;
        let d = self.bank.dim();
        Ok(self.max_ks(mean, |v| {
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += v[i] * cov[(i, j)] * v[j];
                }
            }
            q.max(0.0).sqrt()
        }))
    }

    /// `max(0, max_v #{i: vᵀx_i > vᵀc}/n - 1/2)`.
    pub fn tukey(&self, candidate: &[f64]) -> Result<f64> {
        self.check_dim(candidate.len())?;
        let mut best = 0usize;
        for (k, v) in self.bank.directions().enumerate() {
            let s = dot(v, candidate);
            let sorted = &self.sorted[k];
            let count = sorted.len() - sorted.partition_point(|&p| p <= s);
            best = best.max(count);
        }
        if self.bank.planar_exact() {
            best = best.max(planar_max_count(&self.points, candidate));
        }
        Ok((best as f64 / self.n as f64 - 0.5).max(0.0))
    }
}

/// Largest number of points strictly inside an open halfplane bounded by a
/// line through `c`, over all line orientations.
fn planar_max_count(points: &[f64], c: &[f64]) -> usize {
    let mut theta: Vec<f64> = points
        .chunks_exact(2)
        .filter_map(|p| {
            let (x, y) = (p[0] - c[0], p[1] - c[1]);
            if x == 0.0 && y == 0.0 {
                None
            } else {
                Some(y.atan2(x).rem_euclid(2.0 * PI))
            }
        })
        .collect();
    if theta.is_empty() {
        return 0;
    }
    theta.sort_by(f64::total_cmp);
    let mut critical: Vec<f64> = theta
        .iter()
        .flat_map(|&t| {
            [
                (t + PI / 2.0).rem_euclid(2.0 * PI),
                (t - PI / 2.0).rem_euclid(2.0 * PI),
            ]
        })
        .collect();
    critical.sort_by(f64::total_cmp);
    critical.dedup();
    let count_open = |a: f64, b: f64| -> usize {
        // Points with angle in (a, b) modulo 2π, for b - a = π.
        let mut total = 0;
        for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
            let lo = a + shift;
            let hi = b + shift;
            let l = theta.partition_point(|&t| t <= lo);
            let h = theta.partition_point(|&t| t < hi);
            total += h.saturating_sub(l);
        }
        total
    };
    let k = critical.len();
    let mut best = 0;
    for i in 0..k {
        let next = if i + 1 < k {
            critical[i + 1]
        } else {
            critical[0] + 2.0 * PI
        };
        let mid = 0.5 * (critical[i] + next);
        best = best.max(count_open(mid - PI / 2.0, mid + PI / 2.0));
    }
    best
}

fn check_identity_model(model: &GaussianModel, d: usize) -> Result<()> {
    if model.dim() != d {
        return Err(LabError::DimensionMismatch {
            expected: d,
            found: model.dim(),
        });
    }
    if !model.has_identity_cov() {
        return Err(LabError::NonIdentityCovariance);
    }
    Ok(())
}

/// Halfspace distance between a sample and `N(μ, I)` over the bank directions.
pub fn tv_prime(
    sample: &EmpiricalSample,
    model: &GaussianModel,
    bank: &DirectionBank,
) -> Result<f64> {
    check_identity_model(model, sample.d())?;
    ProjectedSample::new(sample, bank)?.tv_prime(model.mean().as_slice())
}

/// Halfspace distance to an arbitrary-covariance Gaussian.
pub fn tv_prime_full(
    sample: &EmpiricalSample,
    model: &GaussianModel,
    bank: &DirectionBank,
) -> Result<f64> {
    ProjectedSample::new(sample, bank)?.tv_prime_full(model.mean().as_slice(), model.cov())
}

/// Population halfspace distance between `N(μ_p, I)` and `N(μ_q, I)` over the
/// bank: `max_v (2Φ(|vᵀΔμ|/2) - 1)`.
pub fn tv_prime_models(p: &GaussianModel, q: &GaussianModel, bank: &DirectionBank) -> Result<f64> {
    check_identity_model(p, bank.dim())?;
    check_identity_model(q, bank.dim())?;
    let delta: Vec<f64> = (p.mean() - q.mean()).iter().copied().collect();
    Ok(bank
        .directions()
        .map(|v| libm::erf(dot(v, &delta).abs() / (2.0 * SQRT_2)))
        .fold(0.0, f64::max))
}

/// Tukey-median distance of `candidate_mean`: one half minus its normalized depth.
pub fn tukey_distance(
    sample: &EmpiricalSample,
    candidate_mean: &[f64],
    bank: &DirectionBank,
) -> Result<f64> {
    ProjectedSample::new(sample, bank)?.tukey(candidate_mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationDistance {
    TvPrime,
    Tukey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    CoordinatewiseMedian,
    Mean,
    TrimmedMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationFitConfig {
    pub max_evals: usize,
    pub step: f64,
    pub xtol: f64,
    /// Fraction trimmed from each tail for the trimmed-mean start.
    pub trim: f64,
}

impl LocationFitConfig {
    /// `200·d` evaluations per start, initial step `3/√n` clamped to `[0.02, 0.5]`.
    pub fn for_sample(sample: &EmpiricalSample) -> Self {
        LocationFitConfig {
            max_evals: 200 * sample.d(),
            step: (3.0 / (sample.n() as f64).sqrt()).clamp(0.02, 0.5),
            xtol: 1e-4,
            trim: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub mean: DVector<f64>,
    pub objective: f64,
    pub start: StartKind,
    pub evals: usize,
    /// Final objective reached from each start.
    pub per_start: Vec<(StartKind, f64)>,
}

pub fn coordinatewise_median(sample: &EmpiricalSample) -> DVector<f64> {
    DVector::from_fn(sample.d(), |j, _| {
        let col: Vec<f64> = sample.rows().map(|r| r[j]).collect();
        stats::median(&col)
    })
}

/// Coordinatewise mean after dropping `⌊trim·n⌋` values from each tail.
pub fn trimmed_mean(sample: &EmpiricalSample, trim: f64) -> DVector<f64> {
    let n = sample.n();
    let cut = ((trim.clamp(0.0, 0.49) * n as f64).floor() as usize).min((n - 1) / 2);
    DVector::from_fn(sample.d(), |j, _| {
        let mut col: Vec<f64> = sample.rows().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        stats::mean(&col[cut..n - cut])
    })
}

/// Projection estimator: minimizes the chosen distance over `μ ∈ R^d`.
pub fn fit_location(
    sample: &EmpiricalSample,
    distance: LocationDistance,
    bank: &DirectionBank,
    cfg: &LocationFitConfig,
) -> Result<ProjectionResult> {
    let proj = ProjectedSample::new(sample, bank)?;
    fit_location_projected(&proj, sample, distance, cfg)
}

/// As [`fit_location`] with the projections already built.
pub fn fit_location_projected(
    proj: &ProjectedSample,
    sample: &EmpiricalSample,
    distance: LocationDistance,
    cfg: &LocationFitConfig,
) -> Result<ProjectionResult> {
    let starts = [
        (
            StartKind::CoordinatewiseMedian,
            coordinatewise_median(sample),
        ),
        (StartKind::Mean, sample.mean()),
        (StartKind::TrimmedMean, trimmed_mean(sample, cfg.trim)),
    ];
    let nm = NelderMeadConfig {
        max_evals: cfg.max_evals,
        step: cfg.step,
        xtol: cfg.xtol,
    };
    let outcomes: Vec<Result<_>> = starts
        .par_iter()
        .map(|(kind, x0)| {
            let objective = |x: &[f64]| match distance {
                LocationDistance::TvPrime => proj.tv_prime(x).unwrap_or(f64::INFINITY),
                LocationDistance::Tukey => proj.tukey(x).unwrap_or(f64::INFINITY),
            };
            nelder_mead(objective, x0.as_slice(), &nm).map(|m| (*kind, m))
        })
        .collect();
    let mut best: Option<(StartKind, crate::optim::Minimum)> = None;
    let mut per_start = Vec::new();
    let mut evals = 0;
    for o in outcomes.into_iter().flatten() {
        per_start.push((o.0, o.1.value));
        evals += o.1.evals;
        if best.as_ref().is_none_or(|b| o.1.value < b.1.value) {
            best = Some(o);
        }
    }
    let (start, m) = best.ok_or_else(|| LabError::OptimizerFailed("every start failed".into()))?;
    Ok(ProjectionResult {
        mean: DVector::from_vec(m.x),
        objective: m.value,
        start,
        evals,
        per_start,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutlierMode {
    PointMass(DVector<f64>),
    /// `N(location, I)`.
    ShiftedGaussian(DVector<f64>),
}

/// Oblivious contamination: `⌊εn⌋` rows replaced by outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationSpec {
    epsilon: f64,
    outlier: OutlierMode,
    true_mean: DVector<f64>,
    n: usize,
    seed: u64,
}

impl ContaminationSpec {
    pub fn new(
        epsilon: f64,
        outlier: OutlierMode,
        true_mean: DVector<f64>,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(LabError::InvalidInput(format!(
                "contamination fraction must lie in [0, 1/2), got {epsilon}"
            )));
        }
        if n == 0 || true_mean.is_empty() {
            return Err(LabError::InvalidInput(
                "contamination needs n, d >= 1".into(),
            ));
        }
        let loc = match &outlier {
            OutlierMode::PointMass(l) | OutlierMode::ShiftedGaussian(l) => l,
        };
        if loc.len() != true_mean.len() {
            return Err(LabError::DimensionMismatch {
                expected: true_mean.len(),
                found: loc.len(),
            });
        }
        Ok(ContaminationSpec {
            epsilon,
            outlier,
            true_mean,
            n,
            seed,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.true_mean.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn true_mean(&self) -> &DVector<f64> {
        &self.true_mean
    }

    pub fn outlier_count(&self) -> usize {
        ((self.epsilon * self.n as f64) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contaminated {
    pub sample: EmpiricalSample,
    pub true_mean: DVector<f64>,
    pub is_outlier: Vec<bool>,
}

pub fn contaminate(spec: &ContaminationSpec) -> Contaminated {
    let d = spec.dim();
    let n = spec.n;
    let mut r: LabRng = rng::stream(spec.seed, 0);
    let k = spec.outlier_count();
    let mut is_outlier = vec![false; n];
    for i in rand::seq::index::sample(&mut r, n, k) {
        is_outlier[i] = true;
    }
    let mut data = Vec::with_capacity(n * d);
    for &out in &is_outlier {
        let (center, noise) = match (&spec.outlier, out) {
            (_, false) => (&spec.true_mean, true),
            (OutlierMode::PointMass(l), true) => (l, false),
            (OutlierMode::ShiftedGaussian(l), true) => (l, true),
        };
        for j in 0..d {
            let z = if noise {
                rng::standard_normal(&mut r)
            } else {
                0.0
            };
            data.push(center[j] + z);
        }
    }
    Contaminated {
        sample: EmpiricalSample::from_row_major(data, n, d).expect("validated spec"),
        true_mean: spec.true_mean.clone(),
        is_outlier,
    }
}
