use std::io::{BufRead, Write};

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::chaos_basis::{basis_levels, encode_path, HermiteCache, MultiIndex};
use crate::error::{usage, Error, Result};
use crate::neural::{read_mlp, write_mlp, InitScheme, Mlp};
use crate::pce_ref::CoefficientTable;
use crate::scalar::{from_usize, Scalar};
use crate::sde_lab::{path_rng, reference_trajectory, sample_brownian_with, DyadicPath, SdeSpec};
use crate::seed::derive_seed;

/// Sampled Brownian paths with their encoded features (`n × m·d`).
#[derive(Clone, Debug)]
pub struct PathBatch<S> {
    paths: Vec<DyadicPath<S>>,
    features: Array2<S>,
    basis_size: usize,
}

impl<S: Scalar> PathBatch<S> {
    pub fn new(paths: Vec<DyadicPath<S>>, basis_size: usize) -> Result<Self> {
        let Some(first) = paths.first() else {
            return usage("a path batch needs at least one path");
        };
        let (d, level, horizon) = (first.dim(), first.level(), first.horizon());
        if paths.iter().any(|p| p.dim() != d || p.level() != level || p.horizon() != horizon) {
            return usage("paths in a batch must share dimension, level and horizon");
        }
        let width = basis_size * d;
        let rows = paths
            .par_iter()
            .map(|p| encode_path(p, basis_size).map(|g| g.into_vec()))
            .collect::<Result<Vec<_>>>()?;
        let features =
            Array2::from_shape_vec((paths.len(), width), rows.into_iter().flatten().collect()).expect("row lengths");
        Ok(PathBatch { paths, features, basis_size })
    }

    /// Paths `first..first+n` of the stream family `seed`.
    pub fn sample(d: usize, horizon: S, level: u32, basis_size: usize, seed: u64, first: u64, n: usize) -> Result<Self> {
        let paths = (first..first + n as u64)
            .into_par_iter()
            .map(|i| sample_brownian_with(&mut path_rng(seed, i), level, horizon, d))
            .collect();
        Self::new(paths, basis_size)
    }

    pub fn paths(&self) -> &[DyadicPath<S>] {
        &self.paths
    }

    pub fn features(&self) -> ArrayView2<'_, S> {
        self.features.view()
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.paths[0].dim()
    }

    pub fn horizon(&self) -> S {
        self.paths[0].horizon()
    }

    pub fn level(&self) -> u32 {
        self.paths[0].level()
    }
}

/// Anything mapping Brownian paths to states: predictions for every path
/// of `batch` at every time, shaped `(times, paths, d)`.
pub trait PathOperator<S: Scalar>: Sync {
    fn dim(&self) -> usize;
    /// Number of Haar features per component the operator reads.
    fn basis_size(&self) -> usize;
    fn predict(&self, batch: &PathBatch<S>, times: &[S]) -> Result<Array3<S>>;
}

/// Branch/trunk factorisation `X̃_t[c] = Σ_j trunk(t)[c·p+j]·branch(G)[c·p+j]`.
pub trait BranchTrunk<S: Scalar>: Sync {
    fn basis_size(&self) -> usize;
    fn terms(&self) -> usize;
    fn dim(&self) -> usize;
    fn horizon(&self) -> S;
    /// Branch outputs for feature rows `n × m·d`, giving `n × p·d`.
    fn branch_batch(&self, features: ArrayView2<'_, S>) -> Result<Array2<S>>;
    /// Trunk outputs at physical times, giving `len × p·d`.
    fn trunk_batch(&self, times: &[S]) -> Result<Array2<S>>;
}

/// Predictions of a branch/trunk operator on every path and time.
pub fn predict_branch_trunk<S: Scalar, T: BranchTrunk<S> + ?Sized>(
    op: &T,
    batch: &PathBatch<S>,
    times: &[S],
) -> Result<Array3<S>> {
    if batch.basis_size() != op.basis_size() || batch.dim() != op.dim() {
        return usage("path batch does not match the operator's basis size or dimension");
    }
    let branch = op.branch_batch(batch.features())?;
    let trunk = op.trunk_batch(times)?;
    let (p, d) = (op.terms(), op.dim());
    let mut out = Array3::zeros((times.len(), batch.len(), d));
    for (k, trunk_row) in trunk.outer_iter().enumerate() {
        for (i, branch_row) in branch.outer_iter().enumerate() {
            for c in 0..d {
                let range = c * p..(c + 1) * p;
                out[[k, i, c]] = trunk_row
                    .slice(s![range.clone()])
                    .iter()
                    .zip(branch_row.slice(s![range]).iter())
                    .map(|(&a, &b)| a * b)
                    .sum();
            }
        }
    }
    Ok(out)
}

macro_rules! path_operator_via_branch_trunk {
    ($ty:ident) => {
        impl<S: Scalar> PathOperator<S> for $ty<S> {
            fn dim(&self) -> usize {
                BranchTrunk::dim(self)
            }

            fn basis_size(&self) -> usize {
                BranchTrunk::basis_size(self)
            }

            fn predict(&self, batch: &PathBatch<S>, times: &[S]) -> Result<Array3<S>> {
                predict_branch_trunk(self, batch, times)
            }
        }
    };
}

path_operator_via_branch_trunk!(SdeonetModel);
path_operator_via_branch_trunk!(PceSurrogate);

/// `Σ_j trunk[c·p+j]·branch[c·p+j]` per component.
pub fn reconstruct<S: Scalar>(branch: &[S], trunk: &[S], p: usize) -> Result<Vec<S>> {
    if branch.len() != trunk.len() || p == 0 || branch.len() % p != 0 {
        return usage(format!(
            "branch ({}) and trunk ({}) outputs must have equal length divisible by p = {p}",
            branch.len(),
            trunk.len()
        ));
    }
    Ok(branch.chunks(p).zip(trunk.chunks(p)).map(|(b, t)| b.iter().zip(t).map(|(&x, &y)| x * y).sum()).collect())
}

/// Layer widths of an SDEONet.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture<S> {
    pub basis_size: usize,
    pub terms: usize,
    pub dim: usize,
    pub horizon: S,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
}

/// Approximator (branch) and trunk networks with their shape metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeonetModel<S> {
    basis_size: usize,
    terms: usize,
    dim: usize,
    horizon: S,
    approximator: Mlp<S>,
    trunk: Mlp<S>,
}

impl<S: Scalar> SdeonetModel<S> {
    pub fn new(basis_size: usize, terms: usize, dim: usize, horizon: S, approximator: Mlp<S>, trunk: Mlp<S>) -> Result<Self> {
        basis_levels(basis_size)?;
        if terms == 0 || dim == 0 {
            return usage("an SDEONet needs p ≥ 1 and d ≥ 1");
        }
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return usage(format!("horizon must be positive, got {horizon}"));
        }
        if approximator.input_dim() != basis_size * dim || approximator.output_dim() != terms * dim {
            return usage(format!(
                "approximator maps {} → {}, expected {} → {}",
                approximator.input_dim(),
                approximator.output_dim(),
                basis_size * dim,
                terms * dim
            ));
        }
        if trunk.input_dim() != 1 || trunk.output_dim() != terms * dim {
            return usage(format!(
                "trunk maps {} → {}, expected 1 → {}",
                trunk.input_dim(),
                trunk.output_dim(),
                terms * dim
            ));
        }
        Ok(SdeonetModel { basis_size, terms, dim, horizon, approximator, trunk })
    }

    /// Freshly initialised networks; both derive their seeds from `seed`.
    pub fn init(arch: &Architecture<S>, seed: u64) -> Result<Self> {
        let (m, p, d) = (arch.basis_size, arch.terms, arch.dim);
        let branch_dims: Vec<usize> =
            std::iter::once(m * d).chain(arch.branch_hidden.iter().copied()).chain([p * d]).collect();
        let trunk_dims: Vec<usize> = std::iter::once(1).chain(arch.trunk_hidden.iter().copied()).chain([p * d]).collect();
        let approximator = Mlp::init(&branch_dims, derive_seed(seed, "branch"), InitScheme::FanInUniformBiased)?;
        let trunk = Mlp::init(&trunk_dims, derive_seed(seed, "trunk"), InitScheme::FanInUniformBiased)?;
        Self::new(m, p, d, arch.horizon, approximator, trunk)
    }

    pub fn approximator(&self) -> &Mlp<S> {
        &self.approximator
    }

    pub fn trunk(&self) -> &Mlp<S> {
        &self.trunk
    }

    pub(crate) fn networks_mut(&mut self) -> (&mut Mlp<S>, &mut Mlp<S>) {
        (&mut self.approximator, &mut self.trunk)
    }

    /// `X̃_t` for one feature vector.
    pub fn forward(&self, g: &[S], t: S) -> Result<Vec<S>> {
        if g.len() != self.basis_size * self.dim {
            return usage(format!("expected {} features, got {}", self.basis_size * self.dim, g.len()));
        }
        self.check_time(t)?;
        let branch = self.approximator.forward(g)?;
        let trunk = self.trunk.forward(&[t / self.horizon])?;
        reconstruct(&branch, &trunk, self.terms)
    }

    pub(crate) fn check_time(&self, t: S) -> Result<()> {
        if !(t >= S::zero() && t <= self.horizon) {
            return Err(Error::Domain(format!("time {t} lies outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// Text checkpoint: `sdeonet <m> <p> <d> <T>` followed by both networks.
    pub fn write_checkpoint<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "sdeonet {} {} {} {}", self.basis_size, self.terms, self.dim, self.horizon)?;
        write_mlp(&self.approximator, out)?;
        write_mlp(&self.trunk, out)
    }

    pub fn read_checkpoint<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad checkpoint header `{}`", header.trim_end()));
        if words.len() != 5 || words[0] != "sdeonet" {
            return Err(bad());
        }
        let m = words[1].parse().map_err(|_| bad())?;
        let p = words[2].parse().map_err(|_| bad())?;
        let d = words[3].parse().map_err(|_| bad())?;
        let horizon = words[4].parse::<S>().map_err(|_| bad())?;
        let approximator = read_mlp(input)?;
        let trunk = read_mlp(input)?;
        Self::new(m, p, d, horizon, approximator, trunk)
    }
}

impl<S: Scalar> BranchTrunk<S> for SdeonetModel<S> {
    fn basis_size(&self) -> usize {
        self.basis_size
    }

    fn terms(&self) -> usize {
        self.terms
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> S {
        self.horizon
    }

    fn branch_batch(&self, features: ArrayView2<'_, S>) -> Result<Array2<S>> {
        self.approximator.forward_batch(features)
    }

    /// The trunk sees `t/T`.
    fn trunk_batch(&self, times: &[S]) -> Result<Array2<S>> {
        for &t in times {
            self.check_time(t)?;
        }
        let scaled = Array2::from_shape_fn((times.len(), 1), |(k, _)| times[k] / self.horizon);
        self.trunk.forward_batch(scaled.view())
    }
}

/// Oracle operator returning the reference solution of `spec` on each path
/// (closed form where available, Euler–Maruyama otherwise).
#[derive(Clone, Debug)]
pub struct ReferenceOperator<S> {
    spec: SdeSpec<S>,
}

impl<S: Scalar> ReferenceOperator<S> {
    pub fn new(spec: SdeSpec<S>) -> Self {
        ReferenceOperator { spec }
    }
}

impl<S: Scalar> PathOperator<S> for ReferenceOperator<S> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Reads the paths directly; one feature keeps encoding cheap.
    fn basis_size(&self) -> usize {
        1
    }

    fn predict(&self, batch: &PathBatch<S>, times: &[S]) -> Result<Array3<S>> {
        reference_states(&self.spec, batch, times)
    }
}

/// Reference states `(times, paths, d)` on the paths of `batch`.
pub fn reference_states<S: Scalar>(spec: &SdeSpec<S>, batch: &PathBatch<S>, times: &[S]) -> Result<Array3<S>> {
    let ks = times
        .iter()
        .map(|&t| crate::sde_lab::grid_index(t, batch.horizon(), batch.level()))
        .collect::<Result<Vec<_>>>()?;
    let per_path = batch
        .paths()
        .par_iter()
        .map(|path| {
            let traj = reference_trajectory(spec, path)?;
            Ok(traj.select(Axis(0), &ks))
        })
        .collect::<Result<Vec<Array2<S>>>>()?;
    let d = spec.dim();
    let mut out = Array3::zeros((times.len(), batch.len(), d));
    for (i, states) in per_path.iter().enumerate() {
        out.slice_mut(s![.., i, ..]).assign(states);
    }
    Ok(out)
}

/// Truncated chaos expansion as a branch/trunk pair: branch output `j` is
/// `Ψ_{α_j}(G)` and trunk output `j` is `x_{α_j}(t)` for the table's indices.
#[derive(Clone, Debug)]
pub struct PceSurrogate<S> {
    table: CoefficientTable<S>,
    terms: usize,
}

impl<S: Scalar> PceSurrogate<S> {
    /// Uses every column of `table`; `terms ≥ columns` pads with zero pairs.
    pub fn new(table: CoefficientTable<S>, terms: usize) -> Result<Self> {
        if terms < table.indices().len() || terms == 0 {
            return usage(format!("{} table columns do not fit in {terms} terms", table.indices().len()));
        }
        Ok(PceSurrogate { table, terms })
    }

    pub fn table(&self) -> &CoefficientTable<S> {
        &self.table
    }
}

impl<S: Scalar> BranchTrunk<S> for PceSurrogate<S> {
    fn basis_size(&self) -> usize {
        self.table.basis_size()
    }

    fn terms(&self) -> usize {
        self.terms
    }

    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> S {
        self.table.horizon()
    }

    fn branch_batch(&self, features: ArrayView2<'_, S>) -> Result<Array2<S>> {
        let psi = chaos_matrix(features, self.table.indices())?;
        let mut out = Array2::zeros((features.nrows(), self.terms));
        out.slice_mut(s![.., ..psi.ncols()]).assign(&psi);
        Ok(out)
    }

    fn trunk_batch(&self, times: &[S]) -> Result<Array2<S>> {
        let mut out = Array2::zeros((times.len(), self.terms));
        for (k, &t) in times.iter().enumerate() {
            let c = self.table.coefficients_at(t)?;
            out.slice_mut(s![k, ..c.len()]).assign(&ndarray::ArrayView1::from(&c));
        }
        Ok(out)
    }
}

/// Chaos polynomials `Ψ_α(G)` for each feature row, giving `n × |indices|`.
pub(crate) fn chaos_matrix<S: Scalar>(features: ArrayView2<'_, S>, indices: &[MultiIndex]) -> Result<Array2<S>> {
    let max_degree = indices.iter().map(MultiIndex::degree).max().unwrap_or(0);
    let mut out = Array2::zeros((features.nrows(), indices.len()));
    for (row, mut dst) in features.outer_iter().zip(out.outer_iter_mut()) {
        let cache = HermiteCache::new(row.as_slice().expect("standard layout"), max_degree);
        for (j, alpha) in indices.iter().enumerate() {
            dst[j] = cache.eval(alpha)?;
        }
    }
    Ok(out)
}

/// `n` uniform times on `[0, T]` that lie on the level-`level` grid.
pub fn aligned_grid<S: Scalar>(horizon: S, n: usize, level: u32) -> Result<Vec<S>> {
    let steps = 1usize << level;
    if n < 2 || (steps % (n - 1)) != 0 {
        return usage(format!("{n} grid points do not divide the level-{level} path grid"));
    }
    let stride = steps / (n - 1);
    Ok((0..n).map(|k| horizon * from_usize::<S>(k * stride) / from_usize::<S>(steps)).collect())
}
