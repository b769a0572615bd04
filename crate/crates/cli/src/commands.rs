//! The pipeline stages. Each reads its inputs from and writes its artifacts to
//! `config.out`; stage seeds are derived from the master seed by label.

use std::io::BufReader;
use std::path::PathBuf;

use sdeonet::pce_ref::{
    gbm_index_set, gbm_second_moment, gbm_table, ou_second_moment, ou_table, propagator_solve,
    propagator_solve_on, uniform_grid, AffineSdeCoeffs, CoefficientTable,
};
use sdeonet::sde_lab::{make_dataset, read_dataset, write_dataset, SdeSpec};
use sdeonet::sdeonet::{
    aligned_grid, energy_truncation_error, error_decomposition, evaluate as evaluate_operator, DecompositionOptions,
    EvalOptions, MetricsRow, PathOperator, PceSurrogate, ReferenceOperator, SdeonetModel,
};
use sdeonet::seed::derive_seed;

use crate::artifacts::*;
use crate::config::{ExperimentConfig, OperatorChoice, PceMethod, SdeKind};
use crate::error::CliError;

pub fn stage_seed(config: &ExperimentConfig, stage: &str) -> u64 {
    derive_seed(config.seed, stage)
}

fn path(config: &ExperimentConfig, name: &str) -> PathBuf {
    in_dir(&config.out, name)
}

/// Writes `dataset.csv`.
pub fn simulate(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    config.validate()?;
    let spec = config.sde.build()?;
    let samples = make_dataset(
        &spec,
        config.data.samples,
        config.model.basis_size,
        config.data.sim_level,
        stage_seed(config, "simulate"),
    )?;
    let target = path(config, DATASET);
    let features = config.model.basis_size * spec.dim();
    write_atomic(&target, |w| Ok(write_dataset(&samples, spec.dim(), features, w)?))?;
    Ok(target)
}

/// Trains on `dataset.csv`; writes `model.ckpt` and `loss_history.csv`.
pub fn train(config: &ExperimentConfig, mut log: impl FnMut(usize, f64)) -> Result<Vec<LossRow>, CliError> {
    config.validate()?;
    let spec = config.sde.build()?;
    let (samples, d, features) = read_dataset::<f64, _>(BufReader::new(open(&path(config, DATASET))?))?;
    if d != spec.dim() || features != config.model.basis_size * d {
        return Err(CliError::usage(format!(
            "dataset has d = {d} and {features} features; the config expects d = {} and {}",
            spec.dim(),
            config.model.basis_size * spec.dim()
        )));
    }
    let mut model = SdeonetModel::init(&config.architecture(), stage_seed(config, "init"))?;
    let report = sdeonet::sdeonet::train(
        &mut model,
        &samples,
        spec.x0(),
        &config.train_config(stage_seed(config, "train")),
        |epoch, loss, _| log(epoch, loss),
    )?;
    write_atomic(&path(config, CHECKPOINT), |mut w| Ok(model.write_checkpoint(&mut w)?))?;
    let rows: Vec<LossRow> = report.history.iter().enumerate().map(|(epoch, &loss)| LossRow { epoch, loss }).collect();
    write_rows(&path(config, LOSS_HISTORY), &rows)?;
    Ok(rows)
}

pub fn load_model(config: &ExperimentConfig) -> Result<SdeonetModel<f64>, CliError> {
    let file = open(&path(config, CHECKPOINT))?;
    Ok(SdeonetModel::read_checkpoint(&mut BufReader::new(file))?)
}

/// Mean and `3σ` of each metric over repeated evaluations.
pub fn bands(reports: &[Vec<MetricsRow>]) -> Vec<BandRow> {
    let r = reports.len() as f64;
    let stat = |k: usize, f: fn(&MetricsRow) -> f64| -> (f64, f64) {
        let mean = reports.iter().map(|rows| f(&rows[k])).sum::<f64>() / r;
        let var = if reports.len() > 1 {
            reports.iter().map(|rows| (f(&rows[k]) - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        (mean, 3.0 * var.sqrt())
    };
    (0..reports.first().map_or(0, Vec::len))
        .map(|k| {
            let (l2_mean, l2_3sig) = stat(k, |m| m.l2);
            let (rel_mean, rel_3sig) = stat(k, |m| m.rel_l2);
            let (w2_mean, w2_3sig) = stat(k, |m| m.w2);
            BandRow { t: reports[0][k].t, l2_mean, l2_3sig, rel_mean, rel_3sig, w2_mean, w2_3sig }
        })
        .collect()
}

/// Repeats the evaluation `realisations` times on fresh paths; writes `metrics.csv`.
pub fn evaluate(config: &ExperimentConfig) -> Result<Vec<BandRow>, CliError> {
    config.validate()?;
    let spec = config.sde.build()?;
    let operator: Box<dyn PathOperator<f64>> = match config.evaluate.operator {
        OperatorChoice::Exact => Box::new(ReferenceOperator::new(spec.clone())),
        _ => Box::new(load_model(config)?),
    };
    let grid = aligned_grid(spec.horizon(), config.evaluate.grid_points, config.data.sim_level)?;
    let options = EvalOptions {
        sim_level: config.data.sim_level,
        sinkhorn: config.evaluate.sinkhorn(),
        sinkhorn_max_points: config.evaluate.sinkhorn_max_points,
        ..EvalOptions::default()
    };
    let base = stage_seed(config, "evaluate");
    let reports = (0..config.evaluate.realisations)
        .map(|r| {
            let seed = derive_seed(base, &format!("realisation-{r}"));
            Ok(evaluate_operator(operator.as_ref(), &spec, &grid, config.evaluate.n_eval, seed, &options)?.rows)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = bands(&reports);
    write_rows(&path(config, METRICS), &rows)?;
    Ok(rows)
}

fn second_moment(spec: &SdeSpec<f64>, config: &ExperimentConfig) -> Result<Box<dyn Fn(f64) -> f64>, CliError> {
    let x0 = spec.x0()[0];
    let c = config.sde.clone();
    match c.kind {
        SdeKind::Gbm => Ok(Box::new(move |t| gbm_second_moment(t, c.mu, c.sigma(), x0))),
        SdeKind::Ou => Ok(Box::new(move |t| ou_second_moment(t, c.theta, c.mean, c.sigma(), x0))),
        SdeKind::Langevin => Err(CliError::usage("reference chaos coefficients are available for OU and GBM only")),
    }
}

/// Reference coefficients of the configured scalar SDE on `n` uniform times.
pub fn reference_table(config: &ExperimentConfig, n: usize) -> Result<CoefficientTable<f64>, CliError> {
    let spec = config.sde.build()?;
    let c = &config.sde;
    let (x0, horizon) = (spec.x0()[0], spec.horizon());
    let (p, m) = (config.pce.max_degree, config.pce.basis_size);
    let times = uniform_grid(horizon, n)?;
    let table = match (c.kind, config.pce.method) {
        (SdeKind::Gbm, PceMethod::ClosedForm) => gbm_table(c.mu, c.sigma(), x0, p, m, times)?,
        (SdeKind::Ou, PceMethod::ClosedForm) => ou_table(c.theta, c.mean, c.sigma(), x0, m, times)?,
        (SdeKind::Gbm, PceMethod::Propagator) => {
            let indices = gbm_index_set(p, m, horizon, &times)?;
            let coeffs = AffineSdeCoeffs::from_spec(&spec)?;
            propagator_solve_on(&coeffs, x0, indices, m, horizon, n, config.pce.ode_step)?
        }
        (SdeKind::Ou, PceMethod::Propagator) => {
            propagator_solve(&AffineSdeCoeffs::from_spec(&spec)?, x0, p, m, horizon, n, config.pce.ode_step)?
        }
        (SdeKind::Langevin, _) => {
            return Err(CliError::usage("reference chaos coefficients are available for OU and GBM only"))
        }
    };
    Ok(table)
}

/// Writes `coefficients.csv` and `parseval.csv`.
pub fn pce(config: &ExperimentConfig) -> Result<(CoefficientTable<f64>, Vec<ParsevalRow>), CliError> {
    config.validate()?;
    let spec = config.sde.build()?;
    let moment = second_moment(&spec, config)?;
    let table = reference_table(config, config.pce.grid_points)?;
    let rows = table
        .times()
        .iter()
        .map(|&t| {
            let second_moment = moment(t);
            Ok(ParsevalRow {
                t,
                retained_energy: table.truncation_energy(t)?,
                second_moment,
                defect: table.parseval_defect(t, second_moment)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_atomic(&path(config, COEFFICIENTS), |w| Ok(table.write_csv(w)?))?;
    write_rows(&path(config, PARSEVAL), &rows)?;
    Ok((table, rows))
}

/// Writes `decomposition.csv` and `truncation_sweep.csv`.
pub fn decompose(config: &ExperimentConfig) -> Result<(DecompositionRow, Vec<SweepRow>), CliError> {
    config.validate()?;
    let spec = config.sde.build()?;
    let moment = second_moment(&spec, config)?;
    let reference = reference_table(config, config.decompose.grid_points)?;
    let options = DecompositionOptions {
        n_times: config.decompose.grid_points,
        sim_level: config.data.sim_level,
        ..DecompositionOptions::default()
    };
    let seed = stage_seed(config, "decompose");
    let n = config.decompose.n_eval;
    let dec = match config.decompose.operator {
        OperatorChoice::Pce => {
            let p = config.model.terms;
            let stub = PceSurrogate::new(reference.top_energy(p)?, p)?;
            error_decomposition(&stub, &reference, &spec, n, seed, &options)?
        }
        _ => error_decomposition(&load_model(config)?, &reference, &spec, n, seed, &options)?,
    };
    let row = DecompositionRow {
        p: dec.selected.len(),
        e_trunc: dec.e_trunc,
        e_approx: dec.e_approx,
        e_recon: dec.e_recon,
        total: dec.total,
        total_se: dec.total_se,
        bound: dec.e_trunc + dec.e_approx + dec.e_recon + 3.0 * dec.total_se,
    };
    let sweep = config
        .decompose
        .p_sweep
        .iter()
        .map(|&p| Ok(SweepRow { p, e_trunc: energy_truncation_error(&reference, p, &moment)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    write_rows(&path(config, DECOMPOSITION), std::slice::from_ref(&row))?;
    write_rows(&path(config, TRUNCATION_SWEEP), &sweep)?;
    Ok((row, sweep))
}

/// Writes the resolved configuration as `config.toml`.
pub fn echo_config(config: &ExperimentConfig) -> Result<(), CliError> {
    let text = config.to_toml();
    write_atomic(&path(config, CONFIG_ECHO), |w| Ok(w.write_all(text.as_bytes())?))
}

/// Runs every stage; the chaos reference stages are skipped unless the SDE is scalar OU or GBM.
pub fn all(config: &ExperimentConfig, mut log: impl FnMut(&str)) -> Result<(), CliError> {
    config.validate()?;
    echo_config(config)?;
    let target = simulate(config)?;
    log(&format!("simulate: wrote {}", target.display()));
    train(config, |epoch, loss| log(&format!("train: epoch {epoch} loss {loss:.6e}")))?;
    let rows = evaluate(config)?;
    if let Some(last) = rows.last() {
        log(&format!("evaluate: rel L2 at T = {:.4}, W2 = {:.4}", last.rel_mean, last.w2_mean));
    }
    if config.sde.kind == SdeKind::Langevin || config.sde.dim() != 1 {
        log("pce, decompose: skipped, reference coefficients need a scalar OU or GBM");
        return Ok(());
    }
    let (_, parseval) = pce(config)?;
    let worst = parseval.iter().map(|r| r.defect).fold(0.0, f64::max);
    log(&format!("pce: max Parseval defect {worst:.4}"));
    let (row, _) = decompose(config)?;
    log(&format!("decompose: total {:.4e} <= bound {:.4e}", row.total, row.bound));
    Ok(())
}
