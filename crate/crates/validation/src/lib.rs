//! Acceptance criteria for the workspace. Each check returns a one-line
//! summary, `Ok` on pass and `Err` on failure; [`CRITERIA`] lists them with
//! their time budgets in seconds.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdeonet::chaos_basis::*;
use sdeonet::metrics::{sinkhorn_divergence, SampleCloud};
use sdeonet::neural::*;
use sdeonet::pce_ref::*;
use sdeonet::sde_lab::*;
use sdeonet::sdeonet::*;
use sdeonet::seed::derive_seed;

pub type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exactness() -> Check {
    let (nodes, weights) = common::gauss_hermite(64);
    let mut hermite = 0.0f64;
    for a in 0..=10 {
        for b in 0..=10 {
            let ip: f64 = nodes.iter().zip(&weights).map(|(&x, w)| w * hermite_eval(a, x) * hermite_eval(b, x)).sum();
            hermite = hermite.max((ip - f64::from(u8::from(a == b))).abs());
        }
    }
    let mut haar = 0.0f64;
    for horizon in [0.5, 1.0, 2.0] {
        for i in 0..64 {
            for j in 0..64 {
                let ip = haar_inner_product(HaarIndex::new(i), HaarIndex::new(j), horizon).map_err(|e| e.to_string())?;
                haar = haar.max((ip - f64::from(u8::from(i == j))).abs());
            }
        }
    }
    let mut recon = 0.0f64;
    for seed in 0..5 {
        let path = sample_brownian::<f64>(10, 1.0, 1, seed);
        for m in [2usize, 8, 64, 1024] {
            let g = encode_path(&path, m).map_err(|e| e.to_string())?;
            for k in 0..=m {
                let t = k as f64 / m as f64;
                let w = path.component(0)[k * (1024 / m)];
                recon = recon.max((reconstruct_path(g.as_slice(), t, 1.0).map_err(|e| e.to_string())? - w).abs());
            }
        }
    }
    let mut identities = true;
    for seed in 0..20u64 {
        let a = Mlp::<f64>::init(&[3, 4, 2], seed, InitScheme::FanInUniform).map_err(|e| e.to_string())?;
        let b = Mlp::<f64>::init(&[3, 5, 5, 1], seed + 100, InitScheme::FanInUniform).map_err(|e| e.to_string())?;
        let a = pad_to_depth(&a, b.depth()).map_err(|e| e.to_string())?;
        let p = parallelise(&a, &b).map_err(|e| e.to_string())?;
        identities &= p.nonzero_count() == a.nonzero_count() + b.nonzero_count();
        identities &= p.depth() == a.depth().max(b.depth());
        let x = [0.4, -0.9, 1.3];
        let mut expected = a.forward(&x).map_err(|e| e.to_string())?;
        expected.extend(b.forward(&x).map_err(|e| e.to_string())?);
        let got = p.forward(&x).map_err(|e| e.to_string())?;
        identities &= got.iter().zip(&expected).all(|(g, e)| (g - e).abs() < 1e-12);
        let single_a = Mlp::<f64>::init(&[3, 2], seed, InitScheme::FanInUniform).map_err(|e| e.to_string())?;
        let single_b = Mlp::<f64>::init(&[3, 4], seed + 1, InitScheme::FanInUniform).map_err(|e| e.to_string())?;
        let single = parallelise(&single_a, &single_b).map_err(|e| e.to_string())?;
        identities &= single.size() == single_a.size() + single_b.size();
    }
    ensure(
        hermite <= 1e-8 && haar <= 1e-12 && recon <= 1e-12 && identities,
        format!(
            "Hermite {hermite:.1e} (≤ 1e-8), Haar {haar:.1e} (≤ 1e-12), reconstruction {recon:.1e} (≤ 1e-12), size/depth/parallelisation identities {}",
            if identities { "exact" } else { "violated" }
        ),
    )
}

fn tail_bound() -> Check {
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for horizon in [0.5f64, 1.0, 2.0] {
        for level in 1..=8 {
            for k in 0..=32 {
                let t = horizon * k as f64 / 32.0;
                let tail = haar_tail_energy(level, t, horizon, 40).map_err(|e| e.to_string())?;
                let bound = 2.0 * horizon * (1.0 + t) * 2f64.powi(-(level as i32));
                worst_ratio = worst_ratio.max(tail / bound);
                violations += usize::from(tail > bound);
            }
        }
    }
    ensure(violations == 0, format!("{violations} violations over 792 cases, max tail/bound {worst_ratio:.3}"))
}

fn oracle_equivalence() -> Check {
    let err = |e: sdeonet::Error| e.to_string();
    let (mu, sigma) = (1.0, 0.3);
    let gbm = propagator_solve(&AffineSdeCoeffs::<f64>::geometric_brownian(mu, sigma), 1.0, 4, 8, 1.0, 17, 1e-3).map_err(err)?;
    let mut gbm_gap = 0.0f64;
    for (k, &t) in gbm.times().iter().enumerate() {
        for (j, alpha) in gbm.indices().iter().enumerate() {
            gbm_gap = gbm_gap.max((gbm.values()[[k, j]] - gbm_coeff(alpha, t, mu, sigma, 1.0, 1.0).map_err(err)?).abs());
        }
    }
    let ou = propagator_solve(&AffineSdeCoeffs::<f64>::ornstein_uhlenbeck(1.0, 1.2, 1.3), 1.0, 2, 8, 1.0, 17, 1e-3).map_err(err)?;
    let mut ou_gap = 0.0f64;
    for (k, &t) in ou.times().iter().enumerate() {
        for (j, alpha) in ou.indices().iter().enumerate() {
            ou_gap = ou_gap.max((ou.values()[[k, j]] - ou_coeff(alpha, t, 1.0, 1.2, 1.3, 1.0, 1.0).map_err(err)?).abs());
        }
    }
    let gbm_spec = SdeSpec::geometric_brownian(mu, sigma, 1.0, 1.0).map_err(err)?;
    let ou_spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 1.0, 1.0).map_err(err)?;
    let m = 4;
    let alphas = [
        MultiIndex::zeros(m),
        MultiIndex::unit(m, 0),
        MultiIndex::unit(m, 1),
        MultiIndex::new(vec![1, 1, 0, 0]),
        MultiIndex::new(vec![2, 0, 0, 0]),
    ];
    let times = [0.25, 0.5, 1.0];
    let options = McOptions { sim_level: 5, component: 0 };
    let mut hits = 0;
    for trial in 0..100u64 {
        let alpha = &alphas[trial as usize % alphas.len()];
        let t = times[(trial as usize / alphas.len()) % times.len()];
        let (spec, target) = if trial % 2 == 0 {
            (&gbm_spec, gbm_coeff(alpha, t, mu, sigma, 1.0, 1.0).map_err(err)?)
        } else {
            (&ou_spec, ou_coeff(alpha, t, 1.0, 1.2, 1.3, 1.0, 1.0).map_err(err)?)
        };
        let est = mc_project_coeff(spec, alpha, t, 2000, m, 1000 + trial, options).map_err(err)?;
        hits += usize::from(est.within(target, 3.0));
    }
    ensure(
        gbm_gap <= 1e-4 && ou_gap <= 1e-6 && hits >= 99,
        format!("GBM gap {gbm_gap:.1e} (≤ 1e-4), OU gap {ou_gap:.1e} (≤ 1e-6), MC within 3 SE {hits}/100 (≥ 99)"),
    )
}

fn parseval() -> Check {
    let err = |e: sdeonet::Error| e.to_string();
    let (mu, sigma) = (1.0, 0.3);
    let full = gbm_table(mu, sigma, 1.0, 6, 64, uniform_grid(1.0, 5).map_err(err)?).map_err(err)?;
    let mut worst = 0.0f64;
    let mut monotone = true;
    for t in [0.25, 0.5, 0.75] {
        let m2 = gbm_second_moment(t, mu, sigma, 1.0);
        worst = worst.max(full.parseval_defect(t, m2).map_err(err)?);
        let mut last = f64::INFINITY;
        for p in 0..=6 {
            let d = full.filter(|a| a.degree() <= p).map_err(err)?.parseval_defect(t, m2).map_err(err)?;
            monotone &= d <= last + 1e-15;
            last = d;
        }
        let mut last = f64::INFINITY;
        for m in [1usize, 2, 4, 8, 16, 32, 64] {
            let d = full.filter(|a| a.support().all(|(i, _)| i < m)).map_err(err)?.parseval_defect(t, m2).map_err(err)?;
            monotone &= d <= last + 1e-15;
            last = d;
        }
    }
    ensure(
        worst <= 0.05 && monotone,
        format!("max defect {:.3}% (≤ 5%), monotone under growth: {monotone}", 100.0 * worst),
    )
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(5, "gradient-cases"));
    let mut worst = 0.0f64;
    for case in 0..50 {
        let depth = rng.random_range(1..4);
        let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..7)).collect();
        let mut net = Mlp::<f64>::init(&dims, case, InitScheme::FanInUniform).map_err(|e| e.to_string())?;
        for layer in net.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = loop {
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            if common::kink_distance(&net, &x) > 1e-3 {
                break x;
            }
        };
        let u: Vec<f64> = (0..dims[depth]).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(common::gradient_error(&net, &x, &u));
    }
    ensure(worst <= 1e-5, format!("max relative error {worst:.1e} over 50 cases (≤ 1e-5)"))
}

fn statistics() -> Check {
    let (n, m) = (100_000u64, 8);
    let mut sums = vec![0.0; m];
    let mut cross = vec![vec![0.0; m]; m];
    for i in 0..n {
        let path = sample_brownian_with::<f64, _>(&mut path_rng(11, i), 6, 1.0, 1);
        let g = encode_path(&path, m).map_err(|e| e.to_string())?;
        let g = g.as_slice();
        for a in 0..m {
            sums[a] += g[a];
            for b in a..m {
                cross[a][b] += g[a] * g[b];
            }
        }
    }
    let nf = n as f64;
    let se = 1.0 / nf.sqrt();
    let mut worst_z = 0.0f64;
    let mut outside = 0;
    for a in 0..m {
        let z_mean = (sums[a] / nf).abs() / se;
        let z_var = (cross[a][a] / nf - 1.0).abs() / (2f64.sqrt() * se);
        worst_z = worst_z.max(z_mean).max(z_var);
        outside += usize::from(z_mean > 3.0) + usize::from(z_var > 3.0);
        for b in a + 1..m {
            let z = (cross[a][b] / nf).abs() / se;
            worst_z = worst_z.max(z);
            outside += usize::from(z > 3.0);
        }
    }
    let levels: Vec<u32> = (6..=12).collect();
    let errors = common::gbm_strong_errors(1.0, 0.3, &levels, 2000, 5);
    let log_dt: Vec<f64> = levels.iter().map(|&l| -(l as f64)).collect();
    let slope = common::slope(&log_dt, &errors);
    ensure(
        outside == 0 && (0.35..=0.65).contains(&slope),
        format!("{outside} moment statistics beyond 3 SE (max |z| {worst_z:.2}), EM strong slope {slope:.3} (∈ [0.35, 0.65])"),
    )
}

struct TrainedRun {
    model: SdeonetModel<f64>,
    history: Vec<f64>,
}

fn reference_architecture(d: usize) -> Architecture<f64> {
    Architecture { basis_size: 32, terms: 64, dim: d, horizon: 1.0, branch_hidden: vec![256, 256], trunk_hidden: vec![256, 256] }
}

fn reference_train_config(seed: u64) -> TrainConfig {
    TrainConfig { lr: 3e-4, epochs: 30, batch_size: 64, seed }
}

fn train_reference(spec: &SdeSpec<f64>, master: u64, mut on_epoch: impl FnMut(usize, f64, &SdeonetModel<f64>)) -> Result<TrainedRun, String> {
    let err = |e: sdeonet::Error| e.to_string();
    let data = make_dataset(spec, 20_000, 32, DEFAULT_SIM_LEVEL, derive_seed(master, "dataset")).map_err(err)?;
    let mut model = SdeonetModel::init(&reference_architecture(spec.dim()), derive_seed(master, "init")).map_err(err)?;
    let report = train(&mut model, &data, spec.x0(), &reference_train_config(derive_seed(master, "train")), &mut on_epoch).map_err(err)?;
    Ok(TrainedRun { model, history: report.history })
}

/// Per-time metrics averaged over `r` independent realisations of `n` paths.
fn averaged_metrics<O: PathOperator<f64>>(
    model: &O,
    spec: &SdeSpec<f64>,
    grid: &[f64],
    r: u64,
    n: usize,
    master: u64,
    options: &EvalOptions,
) -> Result<Vec<MetricsRow>, String> {
    let mut mean = vec![MetricsRow { t: 0.0, l2: 0.0, rel_l2: 0.0, w2: 0.0 }; grid.len()];
    for k in 0..r {
        let report = evaluate(model, spec, grid, n, derive_seed(master, "evaluate") + k, options).map_err(|e| e.to_string())?;
        for (acc, row) in mean.iter_mut().zip(report.rows) {
            acc.t = row.t;
            acc.l2 += row.l2 / r as f64;
            acc.rel_l2 += row.rel_l2 / r as f64;
            acc.w2 += row.w2 / r as f64;
        }
    }
    Ok(mean)
}

fn mean_rel_after(rows: &[MetricsRow], t_min: f64) -> f64 {
    let tail: Vec<f64> = rows.iter().filter(|r| r.t >= t_min - 1e-12).map(|r| r.rel_l2).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn initial_condition_error(model: &SdeonetModel<f64>, x0: &[f64], master: u64) -> Result<f64, String> {
    let batch = PathBatch::sample(x0.len(), 1.0, DEFAULT_SIM_LEVEL, 32, derive_seed(master, "initial-condition"), 0, 1000)
        .map_err(|e| e.to_string())?;
    let pred = PathOperator::predict(model, &batch, &[0.0]).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for i in 0..batch.len() {
        total += (0..x0.len()).map(|c| (pred[[0, i, c]] - x0[c]).powi(2)).sum::<f64>().sqrt();
    }
    Ok(total / batch.len() as f64)
}

fn ou_training() -> Check {
    let master = 7;
    let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 1.0, 1.0).map_err(|e| e.to_string())?;
    let run = train_reference(&spec, master, |_, _, _| ())?;
    let grid = aligned_grid(1.0, 33, DEFAULT_SIM_LEVEL).map_err(|e| e.to_string())?;
    let rows = averaged_metrics(&run.model, &spec, &grid, 10, 2000, master, &EvalOptions::default())?;
    let rel = mean_rel_after(&rows, 0.1);
    let w2 = rows.iter().map(|r| r.w2).fold(0.0f64, f64::max);
    let ic = initial_condition_error(&run.model, spec.x0(), master)?;
    let ic_bound = 0.05 * (1.0 + spec.x0()[0].abs());
    ensure(
        rel <= 0.15 && w2 <= 0.2 && ic <= ic_bound,
        format!(
            "mean rel L² {rel:.4} (≤ 0.15), max per-t W₂ {w2:.4} (≤ 0.2), initial-condition error {ic:.4} (≤ {ic_bound}), loss {:.4} → {:.4}",
            run.history[0],
            run.history.last().unwrap()
        ),
    )
}

fn gbm_training() -> Check {
    let master = 8;
    let spec = SdeSpec::geometric_brownian(1.0, 0.3, 1.0, 1.0).map_err(|e| e.to_string())?;
    let run = train_reference(&spec, master, |_, _, _| ())?;
    let grid = aligned_grid(1.0, 33, DEFAULT_SIM_LEVEL).map_err(|e| e.to_string())?;
    let rows = averaged_metrics(&run.model, &spec, &grid, 10, 2000, master, &EvalOptions::default())?;
    let rel = mean_rel_after(&rows, 0.1);
    ensure(
        rel <= 0.2,
        format!("mean rel L² {rel:.4} (≤ 0.2), loss {:.4} → {:.4}", run.history[0], run.history.last().unwrap()),
    )
}

/// Mean Sinkhorn divergence over `grid` between reference and model clouds.
fn mean_divergence(model: &SdeonetModel<f64>, spec: &SdeSpec<f64>, grid: &[f64], seed: u64) -> Result<f64, String> {
    let (truth, pred) = simulate_predictions(model, spec, grid, 500, seed, DEFAULT_SIM_LEVEL, 250).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for k in 0..grid.len() {
        let a = SampleCloud::new(truth.index_axis(ndarray::Axis(0), k).to_owned()).map_err(|e| e.to_string())?;
        let b = SampleCloud::new(pred.index_axis(ndarray::Axis(0), k).to_owned()).map_err(|e| e.to_string())?;
        total += sinkhorn_divergence(&a, &b, &Default::default()).map_err(|e| e.to_string())?.divergence;
    }
    Ok(total / grid.len() as f64)
}

fn langevin_training() -> Check {
    let master = 9;
    let d = 5;
    let mean = Array1::from_shape_fn(d, |j| 2.0 * if j % 2 == 0 { 1.0 } else { -1.0 } * j as f64);
    let spec = SdeSpec::gaussian_langevin(Array2::eye(d), mean, vec![0.0; d], 1.0).map_err(|e| e.to_string())?;
    let grid = aligned_grid(1.0, 9, DEFAULT_SIM_LEVEL).map_err(|e| e.to_string())?;
    let probe_seed = derive_seed(master, "sinkhorn-probe");
    let untrained = SdeonetModel::init(&reference_architecture(d), derive_seed(master, "init")).map_err(|e| e.to_string())?;
    let baseline = mean_divergence(&untrained, &spec, &grid, probe_seed)?;
    let mut trace = vec![baseline];
    let mut failure = None;
    let run = train_reference(&spec, master, |epoch, _, model| {
        if (epoch + 1) % 5 == 0 {
            match mean_divergence(model, &spec, &grid, probe_seed) {
                Ok(v) => trace.push(v),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let epochs: Vec<f64> = (0..trace.len()).map(|k| 5.0 * k as f64).collect();
    let log_trace: Vec<f64> = trace.iter().map(|v| v.max(1e-12).ln()).collect();
    let trend = common::slope(&epochs, &log_trace);
    let last = *trace.last().unwrap();
    let ratio = baseline / last;
    ensure(
        run.history.iter().all(|l| l.is_finite()) && trend < 0.0 && last < trace[1] && ratio >= 5.0,
        format!(
            "mean divergence at epochs 0, 5, …, 30: {:?}, log-trend {trend:.3}/epoch (< 0), untrained/final {ratio:.1}× (≥ 5×)",
            trace.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn decomposition() -> Check {
    let err = |e: sdeonet::Error| e.to_string();
    let options = DecompositionOptions { n_times: 33, sim_level: 10, chunk_size: 256 };
    let mut lines = Vec::new();
    let mut ok = true;
    let gbm = SdeSpec::geometric_brownian(1.0, 0.3, 1.0, 1.0).map_err(err)?;
    let gbm_ref = gbm_table(1.0, 0.3, 1.0, 4, 16, uniform_grid(1.0, 33).map_err(err)?).map_err(err)?;
    let ou = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 1.0, 1.0).map_err(err)?;
    let ou_ref = ou_table(1.0, 1.2, 1.3, 1.0, 16, uniform_grid(1.0, 33).map_err(err)?).map_err(err)?;
    let cases: Vec<(&str, &SdeSpec<f64>, &CoefficientTable<f64>, usize)> =
        vec![("GBM", &gbm, &gbm_ref, 8), ("GBM", &gbm, &gbm_ref, 32), ("OU", &ou, &ou_ref, 4)];
    for (name, spec, table, p) in cases {
        let stub = PceSurrogate::new(table.top_energy(p).map_err(err)?, p).map_err(err)?;
        let dec = error_decomposition(&stub, table, spec, 2000, derive_seed(10, name) + p as u64, &options).map_err(err)?;
        let bound = dec.e_trunc + dec.e_approx + dec.e_recon + 3.0 * dec.total_se;
        ok &= dec.total <= bound && dec.e_approx < 1e-10 && dec.e_recon < 1e-10;
        lines.push(format!("{name} p={p}: total {:.4} ≤ {bound:.4}", dec.total));
        let arch = Architecture { basis_size: 16, terms: p, dim: 1, horizon: 1.0, branch_hidden: vec![32], trunk_hidden: vec![32] };
        let untrained = SdeonetModel::init(&arch, derive_seed(10, "untrained") + p as u64).map_err(err)?;
        let dec = error_decomposition(&untrained, table, spec, 2000, derive_seed(10, name) + p as u64, &options).map_err(err)?;
        let bound = dec.e_trunc + dec.e_approx + dec.e_recon + 3.0 * dec.total_se;
        ok &= dec.total <= bound;
        lines.push(format!("untrained {name} p={p}: total {:.4} ≤ {bound:.4}", dec.total));
    }
    ensure(ok, lines.join("; "))
}

pub const CRITERIA: [(&str, f64, fn() -> Check); 10] = [
    ("exactness suite", 1.0, exactness),
    ("tail-bound suite", 1.0, tail_bound),
    ("oracle-equivalence suite", 30.0, oracle_equivalence),
    ("Parseval suite", 10.0, parseval),
    ("gradient suite", 5.0, gradients),
    ("statistical suites", 60.0, statistics),
    ("OU training rerun", 600.0, ou_training),
    ("GBM training rerun", 600.0, gbm_training),
    ("multi-d Langevin smoke", 900.0, langevin_training),
    ("decomposition consistency", 60.0, decomposition),
];
