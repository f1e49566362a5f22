//! Admissible surrogate distances on finite alphabets.
//!
//! Scale convention: the reference distance is the integral probability metric
//! over test functions with `‖f‖_∞ ≤ 1`, i.e. `L(p, q) = Σ|p_x - q_x| = 2·TV`.
//! Witnesses take values in `{-1, +1}`, so both the surrogate `L'` built from a
//! covering and the reference `L` live on the same (2·TV) scale, and the
//! covering radius `ε` is measured in `L`.

use crate::error::{LabError, Result};
use crate::stats::compensated_sum;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(LabError::InvalidInput("empty alphabet".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(LabError::InvalidInput(
                "probabilities must be finite and >= 0".into(),
            ));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(FiniteDist { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = compensated_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(LabError::InvalidInput(
                "weights must have positive mass".into(),
            ));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Put the rounding residue on the largest entry.
        let resid = 1.0 - compensated_sum(probs.iter().copied());
        if let Some(k) = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])) {
            probs[k] += resid;
        }
        Self::new(probs)
    }

    /// Empirical distribution of observed symbol counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_weights(&w)
    }

    pub fn alphabet(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn check_alphabet(p: &FiniteDist, q: &FiniteDist) -> Result<()> {
    if p.alphabet() != q.alphabet() {
        return Err(LabError::AlphabetMismatch {
            left: p.alphabet(),
            right: q.alphabet(),
        });
    }
    Ok(())
}

/// `TV(p, q) = ½ Σ|p_x - q_x|`.
pub fn tv_finite(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    check_alphabet(p, q)?;
    Ok(0.5 * compensated_sum(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs())))
}

/// The reference IPM `L = sup_{‖f‖_∞ ≤ 1} ∫ f d(p - q) = 2·TV`.
pub fn reference_ipm(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    tv_finite(p, q).map(|tv| 2.0 * tv)
}

/// Parameters `(c₁, c₂)` of an admissibility certificate plus the name of the
/// perturbation bound `L''`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleCert {
    pub c1: f64,
    pub c2: f64,
    pub l_double_prime: String,
}

impl AdmissibleCert {
    pub fn new(c1: f64, c2: f64, l_double_prime: impl Into<String>) -> Result<Self> {
        if !(c1 > 0.0) || !(c2 >= 0.0) {
            return Err(LabError::InvalidInput(format!(
                "certificate requires c1 > 0 and c2 >= 0 (got {c1}, {c2})"
            )));
        }
        Ok(AdmissibleCert {
            c1,
            c2,
            l_double_prime: l_double_prime.into(),
        })
    }

    /// Certificate of the covering surrogate: `(1, 4ε, L')`.
    pub fn covering(eps: f64) -> Result<Self> {
        Self::new(1.0, 4.0 * eps, "covering surrogate")
    }
}

/// Witness functions separating members of an ε-net of the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorSet {
    alphabet: usize,
    functions: Vec<Vec<f64>>,
    provenance: Vec<(usize, usize)>,
    net: Vec<usize>,
}

impl DiscriminatorSet {
    /// A witness set from explicit test functions (`|f(x)| ≤ 1`).
    pub fn from_functions(alphabet: usize, functions: Vec<Vec<f64>>) -> Result<Self> {
        for f in &functions {
            if f.len() != alphabet {
                return Err(LabError::AlphabetMismatch {
                    left: alphabet,
                    right: f.len(),
                });
            }
            if f.iter().any(|v| !(v.abs() <= 1.0)) {
                return Err(LabError::InvalidInput(
                    "witness values must lie in [-1, 1]".into(),
                ));
            }
        }
        let provenance = vec![(usize::MAX, usize::MAX); functions.len()];
        Ok(DiscriminatorSet {
            alphabet,
            functions,
            provenance,
            net: Vec::new(),
        })
    }

    /// All `2^k` sign vectors: the unrestricted ‖f‖_∞ ≤ 1 class on `k` symbols.
    pub fn all_sign_vectors(alphabet: usize) -> Result<Self> {
        if alphabet > 20 {
            return Err(LabError::TooLarge {
                size: alphabet,
                limit: 20,
            });
        }
        let functions = (0..(1usize << alphabet))
            .map(|mask| {
                (0..alphabet)
                    .map(|x| if mask >> x & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Self::from_functions(alphabet, functions)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn functions(&self) -> &[Vec<f64>] {
        &self.functions
    }

    /// Net indices `(i, j)` that produced each witness.
    pub fn provenance(&self) -> &[(usize, usize)] {
        &self.provenance
    }

    /// Indices (into the generator list) of the ε-net members.
    pub fn net(&self) -> &[usize] {
        &self.net
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Greedy farthest-point ε-net under `L`, returned as generator indices.
pub fn greedy_net(generators: &[FiniteDist], eps: f64) -> Result<Vec<usize>> {
    let first = generators
        .first()
        .ok_or_else(|| LabError::InvalidInput("no generators".into()))?;
    for g in generators {
        check_alphabet(first, g)?;
    }
    let mut net = vec![0usize];
    let mut dist: Vec<f64> = generators
        .iter()
        .map(|g| reference_ipm(g, first))
        .collect::<Result<_>>()?;
    loop {
        let (far, &radius) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if radius <= eps {
            break;
        }
        net.push(far);
        for (k, g) in generators.iter().enumerate() {
            let dk = reference_ipm(g, &generators[far])?;
            if dk < dist[k] {
                dist[k] = dk;
            }
        }
    }
    Ok(net)
}

/// Builds `F_ε`: for every ordered pair of distinct net members the witness
/// `f_ij(x) = +1` where `p_i(x) > p_j(x)` and `-1` otherwise.
pub fn build_covering_discriminators(
    generators: &[FiniteDist],
    eps: f64,
) -> Result<DiscriminatorSet> {
    if !(eps > 0.0) {
        return Err(LabError::InvalidInput("eps must be positive".into()));
    }
    let net = greedy_net(generators, eps)?;
    let alphabet = generators[0].alphabet();
    let mut functions: Vec<Vec<f64>> = Vec::new();
    let mut provenance = Vec::new();
    for &i in &net {
        for &j in &net {
            if i == j {
                continue;
            }
            let f: Vec<f64> = generators[i]
                .probs
                .iter()
                .zip(&generators[j].probs)
                .map(|(a, b)| if a > b { 1.0 } else { -1.0 })
                .collect();
            if !functions.contains(&f) {
                functions.push(f);
                provenance.push((i, j));
            }
        }
    }
    Ok(DiscriminatorSet {
        alphabet,
        functions,
        provenance,
        net,
    })
}

/// `L'(p, q) = max(0, max_f Σ f(x)(p_x - q_x))`; zero for an empty set.
pub fn weakened_ipm(dset: &DiscriminatorSet, p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    check_alphabet(p, q)?;
    if p.alphabet() != dset.alphabet && !dset.is_empty() {
        return Err(LabError::AlphabetMismatch {
            left: dset.alphabet,
            right: p.alphabet(),
        });
    }
    let best = dset
        .functions
        .iter()
        .map(|f| {
            compensated_sum(
                f.iter()
                    .zip(p.probs.iter().zip(&q.probs))
                    .map(|(w, (a, b))| w * (a - b)),
            )
        })
        .fold(0.0_f64, f64::max);
    Ok(best)
}

/// Outcome of an exhaustive projection over a finite generator list.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProjection {
    pub index: usize,
    pub objective: f64,
    /// Second-best objective minus the best (infinite for a single generator).
    pub runner_up_gap: f64,
    pub objectives: Vec<f64>,
}

/// Exhaustive argmin over the generators; ties go to the lowest index.
pub fn project_by<F>(
    generators: &[FiniteDist],
    target: &FiniteDist,
    mut objective: F,
) -> Result<FiniteProjection>
where
    F: FnMut(&FiniteDist, &FiniteDist) -> Result<f64>,
{
    if generators.is_empty() {
        return Err(LabError::InvalidInput("no generators".into()));
    }
    let objectives = generators
        .iter()
        .map(|g| objective(g, target))
        .collect::<Result<Vec<f64>>>()?;
    let mut index = 0;
    for (k, &v) in objectives.iter().enumerate() {
        if v < objectives[index] {
            index = k;
        }
    }
    let best = objectives[index];
    let runner_up = objectives
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != index)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    Ok(FiniteProjection {
        index,
        objective: best,
        runner_up_gap: runner_up - best,
        objectives,
    })
}

/// `g̃ = argmin_g L'(g, target)`.
pub fn project_weakened(
    dset: &DiscriminatorSet,
    generators: &[FiniteDist],
    target: &FiniteDist,
) -> Result<FiniteProjection> {
    project_by(generators, target, |g, t| weakened_ipm(dset, g, t))
}

/// Report of a projection-bound check on one finite instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `min_g L(g, target)`.
    pub opt: f64,
    /// Index of `g'' = argmin_g L'(g, target_hat)`.
    pub chosen: usize,
    /// `L(g'', target)`.
    pub achieved: f64,
    /// `(1 + 2c₁)·OPT + 2c₁·L''(target, target_hat) + c₂`.
    pub bound: f64,
    pub slack: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.slack >= -1e-12
    }
}

const PREMISE_TOL: f64 = 1e-12;

/// Checks the projection bound on a finite instance.
///
/// `surrogate` is `L'`, `reference` is `L`, `perturbation` is `L''`. The
/// admissibility premises are verified on the instance first: resolution for
/// every ordered generator pair, and robustness for every generator against
/// the pair `(target, target_hat)`. A failed premise is reported as
/// [`LabError::CertificateViolated`] instead of a pass.
pub fn verify_admissible_bound<S, R, P>(
    surrogate: S,
    reference: R,
    perturbation: P,
    generators: &[FiniteDist],
    target: &FiniteDist,
    target_hat: &FiniteDist,
    cert: &AdmissibleCert,
) -> Result<BoundReport>
where
    S: Fn(&FiniteDist, &FiniteDist) -> Result<f64>,
    R: Fn(&FiniteDist, &FiniteDist) -> Result<f64>,
    P: Fn(&FiniteDist, &FiniteDist) -> Result<f64>,
{
    if generators.is_empty() {
        return Err(LabError::InvalidInput("no generators".into()));
    }
    for (a, g1) in generators.iter().enumerate() {
        for (b, g2) in generators.iter().enumerate() {
            let lhs = cert.c1 * (surrogate(g1, g2)? - surrogate(g2, g2)?);
            let rhs = reference(g1, g2)? - cert.c2;
            if lhs < rhs - PREMISE_TOL {
                return Err(LabError::CertificateViolated(format!(
                    "resolution fails for generators ({a}, {b}): {lhs} < {rhs}"
                )));
            }
        }
    }
    let l2 = perturbation(target, target_hat)?;
    let l_ref = reference(target, target_hat)?;
    if l2 > l_ref + PREMISE_TOL {
        return Err(LabError::CertificateViolated(format!(
            "perturbation bound {l2} exceeds the reference distance {l_ref}"
        )));
    }
    for (a, g) in generators.iter().enumerate() {
        let diff = (surrogate(g, target)? - surrogate(g, target_hat)?).abs();
        if diff > l2 + PREMISE_TOL {
            return Err(LabError::CertificateViolated(format!(
                "robustness fails for generator {a}: {diff} > {l2}"
            )));
        }
    }

    let opt = generators
        .iter()
        .map(|g| reference(g, target))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let proj = project_by(generators, target_hat, &surrogate)?;
    let achieved = reference(&generators[proj.index], target)?;
    let bound = (1.0 + 2.0 * cert.c1) * opt + 2.0 * cert.c1 * l2 + cert.c2;
    Ok(BoundReport {
        opt,
        chosen: proj.index,
        achieved,
        bound,
        slack: bound - achieved,
    })
}

/// Bound check for the covering surrogate with `c₁ = 1, c₂ = 4ε, L'' = L'`:
/// `L(g̃, P) ≤ 3·OPT + 2·L'(P, P̂) + 4ε`.
pub fn verify_covering_bound(
    generators: &[FiniteDist],
    eps: f64,
    target: &FiniteDist,
    target_hat: &FiniteDist,
) -> Result<BoundReport> {
    let dset = build_covering_discriminators(generators, eps)?;
    let cert = AdmissibleCert::covering(eps)?;
    let lp = |p: &FiniteDist, q: &FiniteDist| weakened_ipm(&dset, p, q);
    verify_admissible_bound(lp, reference_ipm, lp, generators, target, target_hat, &cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn fd(p: &[f64]) -> FiniteDist {
        FiniteDist::new(p.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = fd(&[0.2, 0.8]);
        assert_eq!(tv_finite(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_finite(&fd(&[1.0, 0.0]), &fd(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(
            tv_finite(&fd(&[0.5, 0.5, 0.0]), &fd(&[0.25, 0.25, 0.5])).unwrap(),
            0.5
        );
        assert!(matches!(
            tv_finite(&fd(&[1.0]), &fd(&[0.5, 0.5])),
            Err(LabError::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn dist_validation() {
        assert!(FiniteDist::new(vec![]).is_err());
        assert!(FiniteDist::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteDist::new(vec![1.5, -0.5]).is_err());
        assert!(AdmissibleCert::new(0.0, 0.0, "x").is_err());
        assert!(AdmissibleCert::new(1.0, -1.0, "x").is_err());
    }

    #[test]
    fn single_generator_gives_trivial_surrogate() {
        let gens = vec![fd(&[0.3, 0.7])];
        let dset = build_covering_discriminators(&gens, 0.1).unwrap();
        assert!(dset.len() <= 1);
        let a = fd(&[0.9, 0.1]);
        let b = fd(&[0.1, 0.9]);
        assert_eq!(weakened_ipm(&dset, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn two_point_generators_give_one_witness_up_to_sign() {
        let gens = vec![fd(&[1.0, 0.0]), fd(&[0.0, 1.0])];
        let dset = build_covering_discriminators(&gens, 0.1).unwrap();
        assert_eq!(dset.net(), &[0, 1]);
        for f in dset.functions() {
            assert!(f == &vec![1.0, -1.0] || f == &vec![-1.0, 1.0]);
        }
        let a = fd(&[0.7, 0.3]);
        let b = fd(&[0.2, 0.8]);
        assert!(
            (weakened_ipm(&dset, &a, &b).unwrap() - 2.0 * tv_finite(&a, &b).unwrap()).abs() < 1e-15
        );
    }

    #[test]
    fn grid_covering_property() {
        let gens: Vec<FiniteDist> = (0..20)
            .map(|i| {
                let t = i as f64 / 19.0;
                fd(&[t, 1.0 - t])
            })
            .collect();
        let eps = 0.05;
        let dset = build_covering_discriminators(&gens, eps).unwrap();
        // Diameter of the family under L is 2.
        let bound = (2.0_f64 / (2.0 * eps)).ceil() as usize + 1;
        assert!(dset.net().len() <= bound);
        for g in &gens {
            let nearest = dset
                .net()
                .iter()
                .map(|&k| reference_ipm(g, &gens[k]).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= eps);
        }

        // Dense grid: greedy net is a packing, so |net| ≤ diam/ε + 1.
        let dense: Vec<FiniteDist> = (0..400)
            .map(|i| {
                let t = i as f64 / 399.0;
                fd(&[t, 1.0 - t])
            })
            .collect();
        let net = greedy_net(&dense, eps).unwrap();
        assert!(net.len() <= (2.0 / eps) as usize + 1);
        for g in &dense {
            let nearest = net
                .iter()
                .map(|&k| reference_ipm(g, &dense[k]).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= eps);
        }
    }

    #[test]
    fn weakened_ipm_examples() {
        let full = DiscriminatorSet::all_sign_vectors(2).unwrap();
        let p = fd(&[0.35, 0.65]);
        let q = fd(&[0.8, 0.2]);
        assert_eq!(weakened_ipm(&full, &p, &p).unwrap(), 0.0);
        assert!(
            (weakened_ipm(&full, &p, &q).unwrap() - 2.0 * tv_finite(&p, &q).unwrap()).abs() < 1e-15
        );

        let single = DiscriminatorSet::from_functions(3, vec![vec![1.0, -1.0, -1.0]]).unwrap();
        let a = fd(&[0.5, 0.0, 0.5]);
        let b = fd(&[0.5, 0.5, 0.0]);
        let restricted = weakened_ipm(&single, &a, &b).unwrap();
        assert!(restricted < 2.0 * tv_finite(&a, &b).unwrap());
        assert_eq!(restricted, 0.0);
    }

    #[test]
    fn projection_examples() {
        let gens = vec![fd(&[0.6, 0.4]), fd(&[0.1, 0.9]), fd(&[0.5, 0.5])];
        let full = DiscriminatorSet::all_sign_vectors(2).unwrap();
        let proj = project_weakened(&full, &gens, &gens[1]).unwrap();
        assert_eq!(proj.index, 1);
        assert_eq!(proj.objective, 0.0);
        assert!(proj.runner_up_gap > 0.0);

        let empty = DiscriminatorSet::from_functions(2, vec![]).unwrap();
        let proj = project_weakened(&empty, &gens, &fd(&[0.0, 1.0])).unwrap();
        assert_eq!(proj.index, 0);
        assert_eq!(proj.objective, 0.0);
    }

    #[test]
    fn population_case_reduces_to_three_opt() {
        let gens = vec![
            fd(&[0.7, 0.2, 0.1]),
            fd(&[0.2, 0.2, 0.6]),
            fd(&[0.3, 0.4, 0.3]),
        ];
        let target = fd(&[0.1, 0.5, 0.4]);
        let cert = AdmissibleCert::new(1.0, 0.0, "L").unwrap();
        let report = verify_admissible_bound(
            reference_ipm,
            reference_ipm,
            reference_ipm,
            &gens,
            &target,
            &target,
            &cert,
        )
        .unwrap();
        assert!((report.bound - 3.0 * report.opt).abs() < 1e-15);
        assert!(report.holds());
    }

    #[test]
    fn violated_premise_is_reported() {
        let gens = vec![fd(&[1.0, 0.0]), fd(&[0.0, 1.0])];
        let zero = |_: &FiniteDist, _: &FiniteDist| Ok(0.0);
        let cert = AdmissibleCert::new(1.0, 0.0, "zero").unwrap();
        let res =
            verify_admissible_bound(zero, reference_ipm, zero, &gens, &gens[0], &gens[0], &cert);
        assert!(matches!(res, Err(LabError::CertificateViolated(_))));
    }

    #[test]
    fn covering_bound_random_instances() {
        let mut r = rng::stream(2024, 0);
        for _ in 0..200 {
            let k = r.random_range(2..=5);
            let m = r.random_range(1..=8);
            let draw = |r: &mut rng::LabRng| {
                let w: Vec<f64> = (0..k)
                    .map(|_| -r.random::<f64>().max(1e-300).ln())
                    .collect();
                FiniteDist::from_weights(&w).unwrap()
            };
            let gens: Vec<FiniteDist> = (0..m).map(|_| draw(&mut r)).collect();
            let target = draw(&mut r);
            let n = r.random_range(5..200);
            let mut counts = vec![0usize; k];
            for _ in 0..n {
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut sym = k - 1;
                for (x, p) in target.probs().iter().enumerate() {
                    acc += p;
                    if u < acc {
                        sym = x;
                        break;
                    }
                }
                counts[sym] += 1;
            }
            let hat = FiniteDist::from_counts(&counts).unwrap();
            let eps = r.random_range(0.01..0.5);
            let report = verify_covering_bound(&gens, eps, &target, &hat).unwrap();
            assert!(report.holds(), "{report:?}");
        }
    }

    #[test]
    fn surrogate_never_exceeds_reference() {
        let mut r = rng::stream(77, 0);
        for _ in 0..100 {
            let k = r.random_range(2..=5);
            let draw = |r: &mut rng::LabRng| {
                let w: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 1e-3).collect();
                FiniteDist::from_weights(&w).unwrap()
            };
            let gens: Vec<FiniteDist> = (0..6).map(|_| draw(&mut r)).collect();
            let dset = build_covering_discriminators(&gens, 0.2).unwrap();
            let a = draw(&mut r);
            let b = draw(&mut r);
            assert!(
                weakened_ipm(&dset, &a, &b).unwrap() <= 2.0 * tv_finite(&a, &b).unwrap() + 1e-15
            );
        }
    }
}
