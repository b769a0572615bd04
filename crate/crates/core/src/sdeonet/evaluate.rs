use std::io::{Read, Write};

use ndarray::{Array2, Array3, Axis};

use super::model::{PathBatch, PathOperator};
use crate::error::{usage, Error, Result};
use crate::metrics::{mc_l2, sinkhorn_divergence, w2_1d, SampleCloud, SinkhornParams};
use crate::scalar::Scalar;
use crate::sde_lab::{SdeSpec, DEFAULT_SIM_LEVEL};

/// Path resolution, batching and distance settings for [`evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub sim_level: u32,
    pub chunk_size: usize,
    pub sinkhorn: SinkhornParams,
    /// Sinkhorn uses at most this many points per cloud.
    pub sinkhorn_max_points: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            sim_level: DEFAULT_SIM_LEVEL,
            chunk_size: 256,
            sinkhorn: SinkhornParams::default(),
            sinkhorn_max_points: 500,
        }
    }
}

/// Errors at one time. For `d > 1`, `w2` is the square root of the Sinkhorn
/// divergence between the predicted and reference clouds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub l2: f64,
    pub rel_l2: f64,
    pub w2: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub const HEADER: [&'static str; 4] = ["t", "l2", "rel_l2", "w2"];

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record([r.t, r.l2, r.rel_l2, r.w2].iter().map(ToString::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().ne(Self::HEADER) {
            return Err(Error::Parse(format!("metrics header must be {}", Self::HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let v = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != 4 {
                return Err(Error::Parse("metrics rows need four fields".into()));
            }
            rows.push(MetricsRow { t: v[0], l2: v[1], rel_l2: v[2], w2: v[3] });
        }
        Ok(MetricsReport { rows })
    }
}

/// Reference and predicted states `(times, paths, d)` on `n` fresh paths.
pub fn simulate_predictions<S: Scalar, O: PathOperator<S> + ?Sized>(
    model: &O,
    spec: &SdeSpec<S>,
    times: &[S],
    n: usize,
    seed: u64,
    sim_level: u32,
    chunk_size: usize,
) -> Result<(Array3<S>, Array3<S>)> {
    if model.dim() != spec.dim() {
        return usage(format!("model dimension {} differs from the SDE dimension {}", model.dim(), spec.dim()));
    }
    if chunk_size == 0 {
        return usage("chunk size must be positive");
    }
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    let mut first = 0;
    while first < n {
        let len = chunk_size.min(n - first);
        let batch = PathBatch::sample(spec.dim(), spec.horizon(), sim_level, model.basis_size(), seed, first as u64, len)?;
        truth.push(super::model::reference_states(spec, &batch, times)?);
        pred.push(model.predict(&batch, times)?);
        first += len;
    }
    let cat = |parts: Vec<Array3<S>>| {
        let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
        ndarray::concatenate(Axis(1), &views).expect("matching shapes")
    };
    Ok((cat(truth), cat(pred)))
}

/// Absolute and relative L² errors and W₂ distance per time on `n_eval`
/// fresh paths shared across the grid.
pub fn evaluate<S: Scalar, O: PathOperator<S> + ?Sized>(
    model: &O,
    spec: &SdeSpec<S>,
    t_grid: &[S],
    n_eval: usize,
    seed: u64,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if n_eval < 100 {
        return usage(format!("evaluation needs at least 100 paths, got {n_eval}"));
    }
    let (truth, pred) = simulate_predictions(model, spec, t_grid, n_eval, seed, options.sim_level, options.chunk_size)?;
    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let x = truth.index_axis(Axis(0), k).mapv(|v| v.into_f64());
            let y = pred.index_axis(Axis(0), k).mapv(|v| v.into_f64());
            metrics_at(t.into_f64(), &x, &y, options)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport { rows })
}

fn metrics_at(t: f64, x: &Array2<f64>, y: &Array2<f64>, options: &EvalOptions) -> Result<MetricsRow> {
    let err: Vec<f64> = x.outer_iter().zip(y.outer_iter()).map(|(a, b)| euclid(a.iter().zip(b.iter()).map(|(p, q)| p - q))).collect();
    let norm: Vec<f64> = x.outer_iter().map(|a| euclid(a.iter().copied())).collect();
    let l2 = mc_l2(&err)?;
    let rel_l2 = l2 / mc_l2(&norm)?;
    if y.iter().any(|v| !v.is_finite()) {
        return usage(format!("model produced non-finite predictions at t = {t}"));
    }
    let w2 = if x.ncols() == 1 {
        w2_1d(&SampleCloud::new(x.clone())?, &SampleCloud::new(y.clone())?)?
    } else {
        let take = options.sinkhorn_max_points.min(x.nrows());
        let a = SampleCloud::new(x.slice(ndarray::s![..take, ..]).to_owned())?;
        let b = SampleCloud::new(y.slice(ndarray::s![..take, ..]).to_owned())?;
        sinkhorn_divergence(&a, &b, &options.sinkhorn)?.divergence.sqrt()
    };
    Ok(MetricsRow { t, l2, rel_l2, w2 })
}

fn euclid(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|e| e * e).sum::<f64>().sqrt()
}
