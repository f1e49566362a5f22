//! Derivative-free minimization (Nelder–Mead simplex) and 1-d golden-section search.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Initial simplex edge length along each coordinate.
    pub step: f64,
    /// Stop once the simplex diameter falls below this.
    pub xtol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 1000,
            step: 0.1,
            xtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Best objective seen after each evaluation.
    pub trace: Vec<f64>,
}

struct Tracked<F> {
    f: F,
    evals: usize,
    best: f64,
    best_x: Vec<f64>,
    trace: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Tracked<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        self.evals += 1;
        if v.is_finite() && (v < self.best || self.best_x.is_empty()) {
            self.best = v;
            self.best_x = x.to_vec();
        }
        self.trace.push(self.best);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` from `start`. Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    cfg: &NelderMeadConfig,
) -> Result<Minimum> {
    let n = start.len();
    if n == 0 {
        return Err(LabError::InvalidInput("empty start point".into()));
    }
    let mut t = Tracked {
        f,
        evals: 0,
        best: f64::INFINITY,
        best_x: Vec::new(),
        trace: Vec::new(),
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += cfg.step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| t.eval(p)).collect();

    while t.evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < cfg.xtol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let along = |s: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + s * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = t.eval(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = t.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        // Outside contraction if the reflection improved on the worst vertex.
        let xc = if fr < values[n] {
            along(0.5)
        } else {
            along(-0.5)
        };
        let fc = t.eval(&xc);
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for k in 1..=n {
            let p: Vec<f64> = simplex[k]
                .iter()
                .zip(&simplex[0])
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            values[k] = t.eval(&p);
            simplex[k] = p;
            if t.evals >= cfg.max_evals {
                break;
            }
        }
    }

    if t.best_x.is_empty() {
        return Err(LabError::OptimizerFailed(
            "objective was never finite".into(),
        ));
    }
    Ok(Minimum {
        x: t.best_x,
        value: t.best,
        evals: t.evals,
        trace: t.trace,
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}
