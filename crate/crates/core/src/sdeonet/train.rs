use ndarray::Array2;
use rand::seq::SliceRandom;

use super::model::{BranchTrunk, SdeonetModel};
use crate::error::{usage, Error, Result};
use crate::neural::{AdamConfig, AdamState};
use crate::scalar::{from_usize, Scalar};
use crate::sde_lab::{path_rng, Sample};

/// Mini-batch Adam settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 3e-4, epochs: 30, batch_size: 64, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return usage(format!("learning rate must be finite and non-negative, got {}", self.lr));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return usage("epochs and batch size must be at least 1");
        }
        Ok(())
    }
}

/// Per-epoch sample-weighted mean training loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub history: Vec<f64>,
}

/// Branch inputs, targets and trunk times for a set of samples.
struct Batch<S> {
    features: Array2<S>,
    targets: Array2<S>,
    times: Vec<S>,
}

fn gather<S: Scalar>(model: &SdeonetModel<S>, samples: &[&Sample<S>]) -> Result<Batch<S>> {
    let (m, d) = (model.basis_size(), model.dim());
    let mut features = Array2::zeros((samples.len(), m * d));
    let mut targets = Array2::zeros((samples.len(), d));
    let mut times = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.g.len() != m * d || s.x.len() != d {
            return usage(format!(
                "sample {} has {} features and {} states, the model needs {} and {d}",
                s.path_id,
                s.g.len(),
                s.x.len(),
                m * d
            ));
        }
        model.check_time(s.t)?;
        features.row_mut(i).assign(&ndarray::ArrayView1::from(&s.g));
        targets.row_mut(i).assign(&ndarray::ArrayView1::from(&s.x));
        times.push(s.t);
    }
    Ok(Batch { features, targets, times })
}

/// Loss and, optionally, gradients of
/// `1/B Σ_i (‖X_{t_i} − X̃_{t_i}‖² + ‖x0 − X̃_0‖²)`.
fn loss_and_grads<S: Scalar>(
    model: &SdeonetModel<S>,
    batch: &Batch<S>,
    x0: &[S],
    want_grads: bool,
) -> Result<(S, Option<(crate::neural::MlpGrads<S>, crate::neural::MlpGrads<S>)>)> {
    let (p, d) = (model.terms(), model.dim());
    let b = batch.times.len();
    let horizon = model.horizon();
    let branch_cache = model.approximator().forward_cached(batch.features.view())?;
    // trunk rows: t_1/T, …, t_B/T, then the shared t = 0 row
    let trunk_in = Array2::from_shape_fn((b + 1, 1), |(i, _)| if i < b { batch.times[i] / horizon } else { S::zero() });
    let trunk_cache = model.trunk().forward_cached(trunk_in.view())?;
    let branch = branch_cache.output();
    let trunk = trunk_cache.output();
    let trunk0 = trunk.row(b);

    let scale = S::lit(2.0) / from_usize::<S>(b);
    let mut total = S::zero();
    let mut r_t = Array2::<S>::zeros((b, d));
    let mut r_0 = Array2::<S>::zeros((b, d));
    for i in 0..b {
        for c in 0..d {
            let (mut pt, mut p0) = (S::zero(), S::zero());
            for j in c * p..(c + 1) * p {
                pt += trunk[[i, j]] * branch[[i, j]];
                p0 += trunk0[j] * branch[[i, j]];
            }
            let (et, e0) = (pt - batch.targets[[i, c]], p0 - x0[c]);
            total += et * et + e0 * e0;
            r_t[[i, c]] = scale * et;
            r_0[[i, c]] = scale * e0;
        }
    }
    let loss = total / from_usize::<S>(b);
    if !want_grads {
        return Ok((loss, None));
    }
    let mut d_branch = Array2::<S>::zeros((b, p * d));
    let mut d_trunk = Array2::<S>::zeros((b + 1, p * d));
    for i in 0..b {
        for c in 0..d {
            let (rt, r0) = (r_t[[i, c]], r_0[[i, c]]);
            for j in c * p..(c + 1) * p {
                d_branch[[i, j]] = rt * trunk[[i, j]] + r0 * trunk0[j];
                d_trunk[[i, j]] = rt * branch[[i, j]];
                d_trunk[[b, j]] += r0 * branch[[i, j]];
            }
        }
    }
    let (g_branch, _) = model.approximator().backward(&branch_cache, d_branch.view(), false)?;
    let (g_trunk, _) = model.trunk().backward(&trunk_cache, d_trunk.view(), false)?;
    Ok((loss, Some((g_branch, g_trunk))))
}

/// Batch loss `1/B (Σ ‖X_{t_i} − X̃_{t_i}‖² + Σ ‖x0 − X̃_0‖²)`.
pub fn loss<S: Scalar>(model: &SdeonetModel<S>, batch: &[Sample<S>], x0: &[S]) -> Result<S> {
    if batch.is_empty() {
        return usage("loss of an empty batch");
    }
    if x0.len() != model.dim() {
        return usage(format!("x0 has {} entries, the model has dimension {}", x0.len(), model.dim()));
    }
    let refs: Vec<&Sample<S>> = batch.iter().collect();
    Ok(loss_and_grads(model, &gather(model, &refs)?, x0, false)?.0)
}

/// Gradients of [`loss`] with respect to the approximator and trunk parameters.
pub fn loss_gradients<S: Scalar>(
    model: &SdeonetModel<S>,
    batch: &[Sample<S>],
    x0: &[S],
) -> Result<(S, crate::neural::MlpGrads<S>, crate::neural::MlpGrads<S>)> {
    if batch.is_empty() || x0.len() != model.dim() {
        return usage("gradients need a nonempty batch and an x0 matching the model dimension");
    }
    let refs: Vec<&Sample<S>> = batch.iter().collect();
    let (l, g) = loss_and_grads(model, &gather(model, &refs)?, x0, true)?;
    let (gb, gt) = g.expect("requested");
    Ok((l, gb, gt))
}

/// Mini-batch Adam on [`loss`]. The data order is reshuffled every epoch
/// from `config.seed`; `on_epoch(epoch, mean_loss, model)` runs after each epoch.
pub fn train<S: Scalar>(
    model: &mut SdeonetModel<S>,
    dataset: &[Sample<S>],
    x0: &[S],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, &SdeonetModel<S>),
) -> Result<TrainReport> {
    config.validate()?;
    if dataset.is_empty() {
        return usage("training needs a nonempty dataset");
    }
    if x0.len() != model.dim() {
        return usage(format!("x0 has {} entries, the model has dimension {}", x0.len(), model.dim()));
    }
    let lengths: Vec<usize> = {
        let (a, t) = (model.approximator(), model.trunk());
        a.param_lengths().into_iter().chain(t.param_lengths()).collect()
    };
    let mut adam = AdamState::<S>::new(&lengths, AdamConfig::with_lr(config.lr));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut path_rng(config.seed, epoch as u64));
        let mut sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&Sample<S>> = chunk.iter().map(|&i| &dataset[i]).collect();
            let batch = gather(model, &samples)?;
            let (l, grads) = loss_and_grads(model, &batch, x0, true)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
            }
            sum += l.into_f64() * chunk.len() as f64;
            let (gb, gt) = grads.expect("requested");
            let (approximator, trunk) = model.networks_mut();
            let mut params = approximator.param_slices_mut();
            params.extend(trunk.param_slices_mut());
            let mut g = gb.param_slices();
            g.extend(gt.param_slices());
            adam.step(&mut params, &g)?;
        }
        let mean = sum / dataset.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean, model);
    }
    Ok(TrainReport { history })
}
