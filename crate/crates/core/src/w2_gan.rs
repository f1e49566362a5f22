//! W2-GAN estimators: the quadratic (moment) projection onto rank-r linear
//! generators, the naive sampled W2 objective, the isotropic scale fit, the
//! three-atom lower-bound law `Q_a`, and the cascade objective.

use nalgebra::{DMatrix, DVector};

use crate::empirical::{self, gauss_coupling_rho, EmpiricalSample};
use crate::error::{LabError, Result};
use crate::gauss::{normal_pdf, normal_sf_inverse, pca_truncate, GaussianModel};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::rng::{self, LabRng};
use crate::robust::{coordinatewise_median, DirectionBank, ProjectedSample};
use crate::stats;

/// Linear generator `g(Z) = A Z + b` with `Z ~ N(0, I_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRGenerator {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl RankRGenerator {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(LabError::DimensionMismatch {
                expected: b.len(),
                found: a.nrows(),
            });
        }
        if a.ncols() == 0 || a.ncols() > a.nrows() {
            return Err(LabError::RankOutOfRange {
                rank: a.ncols(),
                dim: a.nrows(),
            });
        }
        Ok(RankRGenerator { a, b })
    }

    /// `A = 0`: every draw equals `b`.
    pub fn point_mass(b: DVector<f64>, r: usize) -> Result<Self> {
        let d = b.len();
        Self::new(DMatrix::zeros(d, r), b)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `A Aᵀ`.
    pub fn cov(&self) -> DMatrix<f64> {
        crate::gauss::symmetrize(&(&self.a * self.a.transpose()))
    }

    /// The induced law `N(b, AAᵀ)`.
    pub fn law(&self) -> Result<GaussianModel> {
        GaussianModel::new(self.b.clone(), self.cov())
    }

    /// `m` draws `b + A z`.
    pub fn sample(&self, m: usize, rng: &mut LabRng) -> Result<EmpiricalSample> {
        let (d, r) = self.a.shape();
        let z = rng::standard_normal_matrix(rng, m, r);
        let mut data = Vec::with_capacity(m * d);
        for i in 0..m {
            let zi = &z[i * r..(i + 1) * r];
            for row in 0..d {
                let mut acc = self.b[row];
                for (c, zc) in zi.iter().enumerate() {
                    acc += self.a[(row, c)] * zc;
                }
                data.push(acc);
            }
        }
        EmpiricalSample::from_row_major(data, m, d)
    }
}

/// Rank-r projection of a Gaussian law under W̃₂: mean kept, covariance
/// replaced by its top-r spectral truncation.
pub fn quadratic_gan_fit_moments(moments: &GaussianModel, r: usize) -> Result<RankRGenerator> {
    let t = pca_truncate(moments.cov(), r)?;
    let mut a = t.components.clone();
    for (j, &lam) in t.variances.iter().enumerate() {
        a.column_mut(j).scale_mut(lam.max(0.0).sqrt());
    }
    RankRGenerator::new(a, moments.mean().clone())
}

/// `argmin_{g ∈ G_r} W̃₂(P_g, P̂ⁿ)` via the sample moments (1/n covariance).
pub fn quadratic_gan_fit(sample: &EmpiricalSample, r: usize) -> Result<RankRGenerator> {
    let d = sample.d();
    if r == 0 || r > d {
        return Err(LabError::RankOutOfRange { rank: r, dim: d });
    }
    quadratic_gan_fit_moments(&empirical::sample_moments(sample)?, r)
}

/// Sampled naive objective: W2 between `m = n` generator draws and the sample.
pub fn naive_w2_objective(
    sample: &EmpiricalSample,
    gen: &RankRGenerator,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if m != sample.n() {
        return Err(LabError::SizeMismatch {
            left: m,
            right: sample.n(),
        });
    }
    if gen.dim() != sample.d() {
        return Err(LabError::DimensionMismatch {
            expected: sample.d(),
            found: gen.dim(),
        });
    }
    let mut r = rng::stream(seed, 0);
    let draws = gen.sample(m, &mut r)?;
    empirical::w2_assignment(&draws, sample)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFit {
    /// Optimal scale of the generator `c·Z`.
    pub c_hat: f64,
    /// Estimated `sup_π E[Zᵀ X̂]`.
    pub rho: f64,
    /// `(1/n)Σ‖x_i‖² - ρ²/d`, the fitted squared W2.
    pub objective: f64,
}

/// Best isotropic scale `c` for the generator `c·Z` against the centered sample:
/// `W2²(cZ, P̂) = c²d + A - 2cρ`, minimized at `ĉ = ρ/d`.
pub fn naive_scale_fit(sample: &EmpiricalSample, reps: usize, seed: u64) -> Result<ScaleFit> {
    let centered = sample.centered();
    let d = sample.d() as f64;
    let second = stats::compensated_sum(
        centered
            .rows()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>()),
    ) / sample.n() as f64;
    let rho = gauss_coupling_rho(&centered, centered.n(), reps, seed)?;
    let (c_hat, rho) = if rho > 0.0 {
        (rho / d, rho)
    } else {
        (0.0, 0.0)
    };
    Ok(ScaleFit {
        c_hat,
        rho,
        objective: (second - rho * rho / d).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QaRatio {
    pub rho: f64,
    /// `W2(N(0,1), Q_a) / inf_c W2(N(0,c), Q_a) = √(2/(1+ρ_a))`.
    pub ratio: f64,
}

/// `Q_a = (1 - 1/a²)δ₀ + (1/2a²)(δ₋ₐ + δₐ)`, which has unit second moment.
pub fn qa_law(a: f64) -> Result<empirical::DiscreteDist1D> {
    check_a(a)?;
    let tail = 0.5 / (a * a);
    empirical::DiscreteDist1D::new(vec![-a, 0.0, a], vec![tail, 1.0 - 2.0 * tail, tail])
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(LabError::InvalidA(a));
    }
    Ok(())
}

/// `ρ_a = sup_π E[ZY]` for `Z ~ N(0,1)`, `Y ~ Q_a`, attained by the monotone
/// coupling. The outer quantile bands are `|Z| > τ` with `P(Z > τ) = 1/(2a²)`,
/// so `ρ_a = 2a·φ(τ)`.
pub fn qa_ratio(a: f64) -> Result<QaRatio> {
    check_a(a)?;
    let tau = normal_sf_inverse(0.5 / (a * a));
    let rho = 2.0 * a * normal_pdf(tau);
    Ok(QaRatio {
        rho,
        ratio: (2.0 / (1.0 + rho)).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    lambda: f64,
    rank: usize,
    pub max_evals: usize,
    pub step: f64,
    pub xtol: f64,
}

impl CascadeConfig {
    pub fn new(lambda: f64, rank: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LabError::InvalidInput(format!(
                "cascade weight must be positive, got {lambda}"
            )));
        }
        if rank == 0 {
            return Err(LabError::RankOutOfRange { rank, dim: 0 });
        }
        Ok(CascadeConfig {
            lambda,
            rank,
            max_evals: 0,
            step: 0.1,
            xtol: 1e-5,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn budget(&self, params: usize) -> usize {
        if self.max_evals > 0 {
            self.max_evals
        } else {
            400 * params
        }
    }
}

#[derive(Debug, Clone)]
pub struct CascadeFit {
    /// Full-rank Gaussian closest in TV' to the sample.
    pub inner: GaussianModel,
    /// Rank-r projection of `inner`.
    pub outer: RankRGenerator,
    pub tv_term: f64,
    /// `‖Σ'^{1/2} - Σ'_r^{1/2}‖_F`.
    pub pca_term: f64,
    pub objective: f64,
    /// Running best objective over all evaluations of all starts.
    pub trace: Vec<f64>,
}

fn unpack(theta: &[f64], d: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mean = theta[..d].to_vec();
    let mut l = DMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = theta[k];
            k += 1;
        }
    }
    let cov = crate::gauss::symmetrize(&(&l * l.transpose()));
    (mean, cov)
}

fn pack(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Vec<f64> {
    let d = mean.len();
    let jitter = 1e-9 * (1.0 + cov.trace());
    let l = (cov + DMatrix::identity(d, d) * jitter)
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::identity(d, d));
    let mut theta: Vec<f64> = mean.iter().copied().collect();
    for i in 0..d {
        for j in 0..=i {
            theta.push(l[(i, j)]);
        }
    }
    theta
}

fn cascade_parts(
    proj: &ProjectedSample,
    theta: &[f64],
    d: usize,
    r: usize,
) -> Result<(f64, f64, DMatrix<f64>, Vec<f64>)> {
    let (mean, cov) = unpack(theta, d);
    let tv = proj.tv_prime_full(&mean, &cov)?;
    let pca = pca_truncate(&cov, r)?.pca_error;
    Ok((tv, pca, cov, mean))
}

/// Minimizes `TV'(P̂, N(μ', Σ')) + λ·‖Σ'^{1/2} - Σ'_r^{1/2}‖_F` over full
/// Gaussians, parameterized by `μ'` and a lower-triangular factor of `Σ'`.
/// Two starts: sample moments, and coordinatewise median with a diagonal
/// MAD-based covariance.
pub fn cascade_fit(
    sample: &EmpiricalSample,
    cfg: &CascadeConfig,
    bank: &DirectionBank,
) -> Result<CascadeFit> {
    let d = sample.d();
    let r = cfg.rank;
    if r > d {
        return Err(LabError::RankOutOfRange { rank: r, dim: d });
    }
    let proj = ProjectedSample::new(sample, bank)?;
    let moments = empirical::sample_moments(sample)?;
    let median = coordinatewise_median(sample);
    let mad = DVector::from_fn(d, |j, _| {
        let dev: Vec<f64> = sample.rows().map(|x| (x[j] - median[j]).abs()).collect();
        (1.4826 * stats::median(&dev)).powi(2).max(1e-12)
    });
    let starts = [
        pack(moments.mean(), moments.cov()),
        pack(&median, &DMatrix::from_diagonal(&mad)),
    ];
    let params = starts[0].len();
    let nm = NelderMeadConfig {
        max_evals: cfg.budget(params),
        step: cfg.step,
        xtol: cfg.xtol,
    };
    let objective = |theta: &[f64]| match cascade_parts(&proj, theta, d, r) {
        Ok((tv, pca, _, _)) => tv + cfg.lambda * pca,
        Err(_) => f64::INFINITY,
    };
    let mut best: Option<crate::optim::Minimum> = None;
    let mut trace = Vec::new();
    for s in &starts {
        let m = nelder_mead(objective, s, &nm)?;
        let floor = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.extend(m.trace.iter().map(|&v: &f64| v.min(floor)));
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best
        .ok_or_else(|| LabError::OptimizerFailed("cascade search found no finite point".into()))?;
    let (tv, pca, cov, mean) = cascade_parts(&proj, &best.x, d, r)?;
    let inner = GaussianModel::new(DVector::from_vec(mean), cov)?;
    let outer = quadratic_gan_fit_moments(&inner, r)?;
    Ok(CascadeFit {
        inner,
        outer,
        tv_term: tv,
        pca_term: pca,
        objective: tv + cfg.lambda * pca,
        trace,
    })
}

/// Largest principal angle between the column spans of `a` and `b`.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(LabError::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let qa = qa.columns(0, a.ncols().min(qa.ncols()));
    let qb = qb.columns(0, b.ncols().min(qb.ncols()));
    let s = (qa.transpose() * qb).svd(false, false).singular_values;
    let smin = s
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0);
    Ok(smin.acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{w2_quantile_1d, DiscreteDist1D};
    use crate::gauss::{gauss_w2, normal_quantile};
    use crate::robust::{contaminate, ContaminationSpec, OutlierMode};

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
    }

    #[test]
    fn population_fits() {
        let truth =
            GaussianModel::new(DVector::from_vec(vec![1.0, -2.0]), diag(&[4.0, 1.0])).unwrap();
        let full = quadratic_gan_fit_moments(&truth, 2).unwrap();
        assert_eq!(gauss_w2(&full.law().unwrap(), &truth).unwrap(), 0.0);

        let g = quadratic_gan_fit_moments(&truth, 1).unwrap();
        assert_eq!(g.cov(), diag(&[4.0, 0.0]));
        assert!((gauss_w2(&g.law().unwrap(), &truth).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            quadratic_gan_fit_moments(&truth, 3),
            Err(LabError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn full_rank_fit_is_moment_matching() {
        let mut r = rng::stream(1, 0);
        let s = EmpiricalSample::standard_normal(300, 3, &mut r).unwrap();
        let g = quadratic_gan_fit(&s, 3).unwrap();
        let m = empirical::sample_moments(&s).unwrap();
        assert!((g.b() - m.mean()).norm() < 1e-10);
        assert!((g.cov() - m.cov()).norm() < 1e-10);
        assert!(matches!(
            quadratic_gan_fit(&s, 0),
            Err(LabError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn sampled_rank_one_fit_within_band() {
        let mut r = rng::stream(2, 0);
        let truth = GaussianModel::new(DVector::zeros(2), diag(&[4.0, 1.0])).unwrap();
        let s = EmpiricalSample::draw_gaussian(&truth, 10_000, &mut r).unwrap();
        let g = quadratic_gan_fit(&s, 1).unwrap();
        assert!(gauss_w2(&g.law().unwrap(), &truth).unwrap() <= 1.1);
    }

    #[test]
    fn naive_objective_point_mass() {
        let mut r = rng::stream(3, 0);
        let s = EmpiricalSample::standard_normal(40, 3, &mut r).unwrap();
        let xbar = s.mean();
        let g = RankRGenerator::point_mass(xbar.clone(), 2).unwrap();
        let v = naive_w2_objective(&s, &g, 40, 0).unwrap();
        let msd: f64 = s
            .rows()
            .map(|x| {
                x.iter()
                    .zip(xbar.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 40.0;
        assert!((v - msd.sqrt()).abs() < 1e-12);
        assert!(matches!(
            naive_w2_objective(&s, &g, 39, 0),
            Err(LabError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn scale_fit_examples() {
        let mut r = rng::stream(4, 0);
        let s = EmpiricalSample::standard_normal(512, 5, &mut r).unwrap();
        let fit = naive_scale_fit(&s, 4, 7).unwrap();
        assert!(fit.c_hat > 0.5 && fit.c_hat < 1.0, "{}", fit.c_hat);

        let zero = EmpiricalSample::from_row_major(vec![0.0; 30], 10, 3).unwrap();
        assert_eq!(naive_scale_fit(&zero, 2, 0).unwrap().c_hat, 0.0);
    }

    /// `E[ZY]` under the monotone coupling by Simpson quadrature of
    /// `2a·∫_τ^∞ zφ(z)dz`, with `τ` located by bisection on the upper tail.
    fn rho_by_quadrature(a: f64) -> f64 {
        let target = 0.5 / (a * a);
        let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if libm::erfc(mid / 2f64.sqrt()) / 2.0 > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        let upper = tau + 12.0;
        let m = 20_000;
        let h = (upper - tau) / m as f64;
        let f = |z: f64| z * normal_pdf(z);
        let mut acc = f(tau) + f(upper);
        for k in 1..m {
            acc += f(tau + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        2.0 * a * acc * h / 3.0
    }

    #[test]
    fn qa_ratio_matches_quadrature_and_limits() {
        for a in [1.5, 2.0, 10.0, 1e2, 1e3] {
            let q = qa_ratio(a).unwrap();
            let oracle = rho_by_quadrature(a);
            assert!(
                (q.rho - oracle).abs() < 1e-9 * oracle.max(1e-3),
                "a={a}: {} vs {oracle}",
                q.rho
            );
            assert!(q.rho > 0.0);
        }
        assert!(qa_ratio(1e3).unwrap().ratio >= 1.40);
        assert!((qa_ratio(1e5).unwrap().ratio - 2f64.sqrt()).abs() < 0.01);
        let grid: Vec<f64> = [10.0, 1e2, 1e3, 1e4]
            .iter()
            .map(|&a| qa_ratio(a).unwrap().ratio)
            .collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        for bad in [1.0, 0.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(qa_ratio(bad), Err(LabError::InvalidA(_))));
        }
        assert!((qa_law(3.0).unwrap().second_moment() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qa_best_variance_by_search() {
        let k = 40_000;
        let base: Vec<f64> = (0..k)
            .map(|i| normal_quantile((i as f64 + 0.5) / k as f64))
            .collect();
        let m2 = base.iter().map(|x| x * x).sum::<f64>() / k as f64;
        for a in [1.5, 3.0, 10.0] {
            let qa = qa_law(a).unwrap();
            let w2sq = |c: f64| {
                let atoms: Vec<f64> = base
                    .iter()
                    .map(|z| c.max(0.0).sqrt() * z / m2.sqrt())
                    .collect();
                w2_quantile_1d(&DiscreteDist1D::uniform(&atoms).unwrap(), &qa).powi(2)
            };
            let (c, v) = crate::optim::golden_section(w2sq, 0.0, 2.0, 1e-6);
            let q = qa_ratio(a).unwrap();
            assert!(
                (v - (1.0 - q.rho * q.rho)).abs() < 5e-3,
                "a={a}: {v} vs {}",
                1.0 - q.rho * q.rho
            );
            assert!(
                (c - q.rho * q.rho).abs() < 2e-2,
                "a={a}: c {c} vs {}",
                q.rho * q.rho
            );
            let at_one = w2sq(1.0);
            assert!((at_one.sqrt() / v.sqrt() - q.ratio).abs() < 5e-3);
        }
    }

    #[test]
    fn principal_angle_basics() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 3.0]);
        assert!(principal_angle(&e1, &e1).unwrap() < 1e-12);
        assert!((principal_angle(&e1, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn cascade_rejects_outliers_orthogonal_to_signal() {
        let n = 2000;
        let mut r = rng::stream(5, 0);
        let clean = GaussianModel::new(DVector::zeros(2), diag(&[4.0, 0.01])).unwrap();
        let base = EmpiricalSample::draw_gaussian(&clean, n, &mut r).unwrap();
        let spec = ContaminationSpec::new(
            0.05,
            OutlierMode::PointMass(DVector::from_vec(vec![0.0, 20.0])),
            DVector::zeros(2),
            n,
            6,
        )
        .unwrap();
        let flags = contaminate(&spec).is_outlier;
        let rows: Vec<Vec<f64>> = base
            .rows()
            .zip(&flags)
            .map(|(x, &o)| if o { vec![0.0, 20.0] } else { x.to_vec() })
            .collect();
        let s = EmpiricalSample::from_rows(&rows).unwrap();
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);

        let naive = quadratic_gan_fit(&s, 1).unwrap();
        assert!(principal_angle(naive.a(), &e1).unwrap() > 0.3);

        let bank = DirectionBank::new(2, 0).unwrap();
        let cfg = CascadeConfig::new(1.0, 1).unwrap();
        let fit = cascade_fit(&s, &cfg, &bank).unwrap();
        assert!(principal_angle(fit.outer.a(), &e1).unwrap() < 0.15);
        assert!(fit.tv_term >= 0.0 && fit.pca_term >= 0.0);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((fit.objective - fit.trace.last().unwrap()).abs() < 1e-12);
        assert!(CascadeConfig::new(0.0, 1).is_err());
    }
}
