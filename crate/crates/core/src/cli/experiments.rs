//! One runner per experiment; each yields a table and, optionally, a plot.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::config::{DistanceKind, Experiment, ExperimentConfig};
use super::svg::{Plot, Style};
use super::table::{number, ResultTable};
use crate::dynamics::{self, FlowConfig, NaiveFlowState, SharedFlowState, SharedGame};
use crate::empirical::EmpiricalSample;
use crate::error::{LabError, Result};
use crate::gauss::{gauss_w2, GaussianModel};
use crate::matching::{
    self, AssignmentW2, GridCell, GridPoint, MomentW2, RateFit, RateModel, SampleDistance,
};
use crate::rng;
use crate::robust::{
    self, ContaminationSpec, DirectionBank, LocationDistance, LocationFitConfig, OutlierMode,
};
use crate::stats;
use crate::w2_gan::{self, CascadeConfig};

pub struct Output {
    pub table: ResultTable,
    pub plot: Option<Plot>,
}

fn bad_config(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Output> {
    match cfg.experiment {
        Experiment::Matching => matching(cfg),
        Experiment::NaiveVsQuadratic => naive_vs_quadratic(cfg),
        Experiment::Robust => robust_location(cfg),
        Experiment::Cascade => cascade(cfg),
        Experiment::DynamicsNaive => dynamics_naive(cfg),
        Experiment::DynamicsShared => dynamics_shared(cfg),
        Experiment::DualityTable => duality_table(cfg),
        Experiment::Sqrt2Ratio => sqrt2_ratio(cfg),
        Experiment::NnRate => nn_rate(cfg),
    }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
}

fn rate_output(
    cells: &[GridCell],
    model: RateModel,
    cfg: &ExperimentConfig,
    title: &str,
) -> Result<Output> {
    let points: Vec<GridPoint> = cells.iter().map(GridPoint::from).collect();
    let fit = matching::fit_rate(&points, model);
    let mut table = ResultTable::new(&["n", "d", "median", "q1", "q3", "fitted"]);
    for c in cells {
        let fitted = fit
            .as_ref()
            .map(|f| f.predict(c.n as f64, c.d))
            .unwrap_or(f64::NAN);
        table.push(vec![
            c.n as f64,
            c.d as f64,
            c.summary.median,
            c.summary.q1,
            c.summary.q3,
            fitted,
        ]);
    }
    match &fit {
        Ok(f) => {
            note_fit(&mut table, f);
            if let Some(eps) = cfg.eps {
                for &d in &cfg.d {
                    let p = matching::predict_sample_size(f, eps, d)?;
                    table.note(format!(
                        "predicted n for eps = {eps} at d = {d}: {} (exact {}, extrapolated {})",
                        p.n_required,
                        number(p.n_exact),
                        p.extrapolated
                    ));
                }
            }
        }
        Err(e) => table.note(format!("fit unavailable: {e}")),
    }

    let mut plot = Plot::new(title, "n", "median").log_log();
    for &d in &cfg.d {
        let cells_d: Vec<&GridCell> = cells.iter().filter(|c| c.d == d).collect();
        plot.add(
            &format!("d = {d}"),
            cells_d
                .iter()
                .map(|c| (c.n as f64, c.summary.median))
                .collect(),
            Style::Points,
        );
        if let Ok(f) = &fit {
            plot.add(
                &format!("fit d = {d}"),
                cells_d
                    .iter()
                    .map(|c| (c.n as f64, f.predict(c.n as f64, d)))
                    .collect(),
                Style::Line,
            );
        }
    }
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn note_fit(table: &mut ResultTable, f: &RateFit) {
    let model = match f.model {
        RateModel::PowerLaw => "C * d^beta * n^alpha",
        RateModel::DimScaled => "C * d^beta * n^(gamma/d)",
    };
    table.note(format!("fit model = {model}"));
    table.note(format!("fit n_exponent = {}", number(f.n_exponent)));
    match f.d_exponent {
        Some(b) => table.note(format!("fit d_exponent = {}", number(b))),
        None => table.note("fit d_exponent = none (single d)"),
    }
    table.note(format!("fit intercept = {}", number(f.intercept)));
    table.note(format!("fit r_squared = {}", number(f.r_squared)));
}

fn matching(cfg: &ExperimentConfig) -> Result<Output> {
    let (dist, model): (&dyn SampleDistance, RateModel) = match cfg.distance {
        DistanceKind::MomentW2 => (&MomentW2, RateModel::PowerLaw),
        DistanceKind::AssignmentW2 => (&AssignmentW2, RateModel::DimScaled),
    };
    let cells = matching::matching_grid(&cfg.n, &cfg.d, cfg.reps, dist, cfg.seed)?;
    rate_output(
        &cells,
        model,
        cfg,
        &format!("matching estimate, {}", dist.name()),
    )
}

fn nn_rate(cfg: &ExperimentConfig) -> Result<Output> {
    let cells = matching::nn_grid(&cfg.n, &cfg.d, cfg.reps, cfg.probes, cfg.seed)?;
    rate_output(
        &cells,
        RateModel::PowerLaw,
        cfg,
        "mean nearest-neighbour distance",
    )
}

fn naive_vs_quadratic(cfg: &ExperimentConfig) -> Result<Output> {
    let cells = matching::run_cells(&cfg.n, &cfg.d, cfg.reps, cfg.seed, |n, d, s| {
        let truth = GaussianModel::standard(d);
        let mut r = rng::stream(s, 0);
        let sample = EmpiricalSample::draw_gaussian(&truth, n, &mut r)?;
        let naive = w2_gan::naive_scale_fit(&sample, 1, rng::derive_seed(s, 1))?;
        let quad = w2_gan::quadratic_gan_fit(&sample, d)?;
        let quad_err = gauss_w2(&truth, &quad.law()?)?;
        Ok([
            naive.c_hat,
            (d as f64).sqrt() * (naive.c_hat - 1.0).abs(),
            quad_err,
        ])
    })?;
    let mut table = ResultTable::new(&[
        "n",
        "d",
        "naive_scale",
        "naive_w2_to_truth",
        "quadratic_w2_to_truth",
    ]);
    for c in &cells {
        let med = |j: usize| stats::median(&c.values.iter().map(|v| v[j]).collect::<Vec<_>>());
        table.push(vec![c.n as f64, c.d as f64, med(0), med(1), med(2)]);
    }
    table.note("values are medians over replicates; truth is N(0, I_d)");
    let mut plot = Plot::new("distance of the fitted law to the truth", "n", "W2").log_log();
    for &d in &cfg.d {
        let rows: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[1] == d as f64).collect();
        plot.add(
            &format!("naive d = {d}"),
            rows.iter().map(|r| (r[0], r[3])).collect(),
            Style::Line,
        );
        plot.add(
            &format!("quadratic d = {d}"),
            rows.iter().map(|r| (r[0], r[4])).collect(),
            Style::Line,
        );
    }
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn robust_location(cfg: &ExperimentConfig) -> Result<Output> {
    let eps = cfg.eps.unwrap_or(0.1);
    let cells = matching::run_cells(&cfg.n, &cfg.d, cfg.reps, cfg.seed, |n, d, s| {
        let mut outlier = DVector::zeros(d);
        outlier[0] = cfg.outlier;
        let spec = ContaminationSpec::new(
            eps,
            OutlierMode::PointMass(outlier),
            DVector::zeros(d),
            n,
            s,
        )?;
        let data = robust::contaminate(&spec);
        let bank = DirectionBank::new(d, rng::derive_seed(s, 1))?;
        let fit_cfg = LocationFitConfig::for_sample(&data.sample);
        let err = |m: &DVector<f64>| (m - &data.true_mean).norm();
        let tv = robust::fit_location(&data.sample, LocationDistance::TvPrime, &bank, &fit_cfg)?;
        let tk = robust::fit_location(&data.sample, LocationDistance::Tukey, &bank, &fit_cfg)?;
        Ok([
            err(&data.sample.mean()),
            err(&robust::coordinatewise_median(&data.sample)),
            err(&tv.mean),
            err(&tk.mean),
        ])
    })?;
    let mut table = ResultTable::new(&[
        "n",
        "d",
        "rep",
        "mean_error",
        "median_error",
        "tv_error",
        "tukey_error",
    ]);
    for c in &cells {
        for (rep, v) in c.values.iter().enumerate() {
            table.push(vec![
                c.n as f64, c.d as f64, rep as f64, v[0], v[1], v[2], v[3],
            ]);
        }
    }
    for (j, name) in [(3, "mean"), (4, "median"), (5, "tv"), (6, "tukey")] {
        let col: Vec<f64> = table.rows.iter().map(|r| r[j]).collect();
        table.note(format!(
            "median {name}_error = {}",
            number(stats::median(&col))
        ));
    }
    let mut plot = Plot::new("location error by replicate", "replicate", "error");
    for (j, name) in [(3, "sample mean"), (5, "TV'"), (6, "Tukey")] {
        plot.add(
            name,
            table
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (i as f64, r[j]))
                .collect(),
            Style::Points,
        );
    }
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn cascade(cfg: &ExperimentConfig) -> Result<Output> {
    let eps = cfg.eps.unwrap_or(0.05);
    let k = &cfg.k_diag;
    let d = k.len();
    if d < 2 || cfg.rank >= d {
        return Err(bad_config(
            "cascade needs at least two k_diag entries and rank < dim",
        ));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| k[j].total_cmp(&k[i]));
    let truth_basis = DMatrix::from_fn(d, cfg.rank, |i, j| if i == order[j] { 1.0 } else { 0.0 });
    let weakest = order[d - 1];
    let cascade_cfg = CascadeConfig::new(cfg.lambda, cfg.rank)?;

    let cells = matching::run_cells(&cfg.n, &[d], cfg.reps, cfg.seed, |n, _, s| {
        let clean = GaussianModel::new(DVector::zeros(d), diag(k))?;
        let mut r = rng::stream(s, 0);
        let base = EmpiricalSample::draw_gaussian(&clean, n, &mut r)?;
        let mut outlier = DVector::zeros(d);
        outlier[weakest] = cfg.outlier;
        let spec = ContaminationSpec::new(
            eps,
            OutlierMode::PointMass(outlier.clone()),
            DVector::zeros(d),
            n,
            rng::derive_seed(s, 1),
        )?;
        let flags = robust::contaminate(&spec).is_outlier;
        let rows: Vec<Vec<f64>> = base
            .rows()
            .zip(&flags)
            .map(|(x, &o)| {
                if o {
                    outlier.as_slice().to_vec()
                } else {
                    x.to_vec()
                }
            })
            .collect();
        let sample = EmpiricalSample::from_rows(&rows)?;
        let naive = w2_gan::quadratic_gan_fit(&sample, cfg.rank)?;
        let bank = DirectionBank::new(d, rng::derive_seed(s, 2))?;
        let fit = w2_gan::cascade_fit(&sample, &cascade_cfg, &bank)?;
        Ok([
            w2_gan::principal_angle(naive.a(), &truth_basis)?,
            w2_gan::principal_angle(fit.outer.a(), &truth_basis)?,
            fit.tv_term,
            fit.pca_term,
            fit.objective,
        ])
    })?;
    let mut table = ResultTable::new(&[
        "n",
        "rep",
        "naive_angle",
        "cascade_angle",
        "tv_term",
        "pca_term",
        "objective",
    ]);
    for c in &cells {
        for (rep, v) in c.values.iter().enumerate() {
            table.push(vec![c.n as f64, rep as f64, v[0], v[1], v[2], v[3], v[4]]);
        }
    }
    let mut plot = Plot::new(
        "principal angle to the clean top subspace",
        "replicate",
        "angle (rad)",
    );
    for (j, name) in [(2, "moment fit"), (3, "cascade fit")] {
        plot.add(
            name,
            table
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (i as f64, r[j]))
                .collect(),
            Style::Points,
        );
    }
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn record_stride(cfg: &ExperimentConfig) -> usize {
    ((0.05 / cfg.h).round() as usize).max(1)
}

fn dynamics_naive(cfg: &ExperimentConfig) -> Result<Output> {
    if cfg.k_diag.len() != 2 {
        return Err(bad_config(
            "dynamics-naive uses a 2x2 K; give two k_diag entries",
        ));
    }
    let e = cfg.eps.unwrap_or(1e-4);
    let k = diag(&cfg.k_diag);
    let a = DMatrix::from_row_slice(2, 2, &[1.0 + e, e, e, e]);
    let v = DVector::from_vec(vec![cfg.k_diag[0].sqrt() + e, -e]);
    let init = NaiveFlowState::new(a, v)?;
    let flow = FlowConfig::new(cfg.h, cfg.t_end)?.recording_every(record_stride(cfg));
    let tr = dynamics::naive_flow_run(&init, &k, &flow)?;
    let mut table = ResultTable::new(&["t", "a11", "a12", "a22", "v1", "v2", "objective"]);
    for (s, obj) in tr.states.iter().zip(&tr.objective) {
        table.push(vec![
            s.t,
            s.a[(0, 0)],
            s.a[(0, 1)],
            s.a[(1, 1)],
            s.v[0],
            s.v[1],
            *obj,
        ]);
    }
    table.note(format!(
        "integrator = {}, steps = {}",
        tr.integrator, tr.steps
    ));
    let mut plot = Plot::new("naive flow from a perturbed equilibrium", "t", "value");
    for (j, name) in [(1, "a11"), (2, "a12"), (3, "a22"), (4, "v1"), (5, "v2")] {
        plot.add(
            name,
            table.rows.iter().map(|r| (r[0], r[j])).collect(),
            Style::Line,
        );
    }
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn dynamics_shared(cfg: &ExperimentConfig) -> Result<Output> {
    let k = diag(&cfg.k_diag);
    let game = SharedGame::new(&k)?;
    let d = cfg.k_diag.len();
    let flow = FlowConfig::new(cfg.h, cfg.t_end)?.recording_every(record_stride(cfg));
    let mut table = ResultTable::new(&[
        "rep",
        "t",
        "alignment",
        "b",
        "lambda",
        "lyapunov",
        "objective",
        "saddle_distance",
    ]);
    let mut plot = Plot::new("Lyapunov value along the shared flow", "t", "L");
    for rep in 0..cfg.reps {
        let mut r = rng::stream(cfg.seed, rep as u64);
        let v = loop {
            let v = DVector::from_fn(d, |_, _| rng::standard_normal(&mut r));
            if v.norm() > 1e-6 && v.dot(game.v1()).abs() / v.norm() > 1e-6 {
                break v.normalize();
            }
        };
        let init = SharedFlowState::new(v, r.random_range(0.0..2.0), r.random_range(0.5..2.0))?;
        let tr = dynamics::shared_flow_run_game(&init, &game, &flow).map_err(|e| {
            LabError::CellFailed {
                cell: format!("rep = {rep}"),
                source: Box::new(e),
            }
        })?;
        for ((s, l), o) in tr.states.iter().zip(&tr.lyapunov).zip(&tr.objective) {
            table.push(vec![
                rep as f64,
                s.t,
                s.v.dot(game.v1()).abs(),
                s.b,
                s.lambda,
                *l,
                *o,
                dynamics::saddle_distance(s, &game),
            ]);
        }
        table.note(format!(
            "rep {rep}: max one-step Lyapunov increase = {}",
            number(tr.max_lyapunov_increase)
        ));
        if rep < 6 {
            plot.add(
                &format!("rep {rep}"),
                tr.states
                    .iter()
                    .zip(&tr.lyapunov)
                    .map(|(s, l)| (s.t, *l))
                    .collect(),
                Style::Line,
            );
        }
    }
    table.note(format!(
        "saddle: b = {}, lambda = 1, value = {}",
        game.lambda1(),
        game.value()
    ));
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn duality_table(cfg: &ExperimentConfig) -> Result<Output> {
    let k = diag(&cfg.k_diag);
    let minimax = dynamics::minimax_value(&k, cfg.rank)?;
    let maximin = dynamics::maximin_value_numeric(&k)?;
    let mut table = ResultTable::new(&["minimax", "maximin", "gap"]);
    table.push(vec![minimax, maximin, minimax - maximin]);
    let mut plot = Plot::new("game values", "0 = minimax, 1 = maximin, 2 = gap", "value");
    plot.add(
        "value",
        vec![(0.0, minimax), (1.0, maximin), (2.0, minimax - maximin)],
        Style::Points,
    );
    Ok(Output {
        table,
        plot: Some(plot),
    })
}

fn sqrt2_ratio(cfg: &ExperimentConfig) -> Result<Output> {
    let mut table = ResultTable::new(&["a", "rho", "ratio", "ratio_minus_sqrt2"]);
    for &a in &cfg.a {
        let q = w2_gan::qa_ratio(a)?;
        table.push(vec![a, q.rho, q.ratio, q.ratio - std::f64::consts::SQRT_2]);
    }
    let mut plot = Plot::new("W2 ratio against Q_a", "a", "ratio").log_x();
    plot.add(
        "ratio",
        table.rows.iter().map(|r| (r[0], r[2])).collect(),
        Style::Line,
    );
    plot.add(
        "sqrt 2",
        table
            .rows
            .iter()
            .map(|r| (r[0], std::f64::consts::SQRT_2))
            .collect(),
        Style::Line,
    );
    Ok(Output {
        table,
        plot: Some(plot),
    })
}
