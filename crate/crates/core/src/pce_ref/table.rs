use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};

use crate::chaos_basis::{basis_levels, GaussianFeatures, HermiteCache, MultiIndex};
use crate::error::{domain, usage, Error, Result};
use crate::scalar::{from_usize, Scalar};

/// Chaos coefficients `x_α(t)` on a time grid over `[0, T]`. Column `j` of
/// `values` belongs to `indices[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable<S> {
    times: Vec<S>,
    basis_size: usize,
    indices: Vec<MultiIndex>,
    values: Array2<S>,
    position: HashMap<MultiIndex, usize>,
}

/// `n` equally spaced points from 0 to `horizon` inclusive.
pub fn uniform_grid<S: Scalar>(horizon: S, n: usize) -> Result<Vec<S>> {
    if n < 2 {
        return usage(format!("a time grid needs at least two points, got {n}"));
    }
    if !(horizon > S::zero()) || !horizon.is_finite() {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let last = from_usize::<S>(n - 1);
    Ok((0..n).map(|k| if k + 1 == n { horizon } else { horizon * from_usize::<S>(k) / last }).collect())
}

impl<S: Scalar> CoefficientTable<S> {
    /// `times` must start at 0 and increase strictly; every index has
    /// length `basis_size` and appears once.
    pub fn new(times: Vec<S>, basis_size: usize, indices: Vec<MultiIndex>, values: Array2<S>) -> Result<Self> {
        basis_levels(basis_size)?;
        if times.len() < 2 || times[0] != S::zero() {
            return usage("coefficient times must start at 0 and hold at least two points");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times[times.len() - 1].is_finite() {
            return usage("coefficient times must increase strictly");
        }
        if values.dim() != (times.len(), indices.len()) {
            return usage(format!(
                "values have shape {:?}, expected ({}, {})",
                values.dim(),
                times.len(),
                indices.len()
            ));
        }
        let mut position = HashMap::with_capacity(indices.len());
        for (j, alpha) in indices.iter().enumerate() {
            if alpha.len() != basis_size {
                return usage(format!("multi-index {alpha} does not have {basis_size} slots"));
            }
            if position.insert(alpha.clone(), j).is_some() {
                return usage(format!("multi-index {alpha} appears twice"));
            }
        }
        Ok(CoefficientTable { times, basis_size, indices, values, position })
    }

    /// Tabulates `coefficient(α, t)` over the grid.
    pub fn from_fn(
        times: Vec<S>,
        basis_size: usize,
        indices: Vec<MultiIndex>,
        mut coefficient: impl FnMut(&MultiIndex, S) -> S,
    ) -> Result<Self> {
        let values = Array2::from_shape_fn((times.len(), indices.len()), |(k, j)| coefficient(&indices[j], times[k]));
        Self::new(times, basis_size, indices, values)
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn horizon(&self) -> S {
        self.times[self.times.len() - 1]
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn values(&self) -> &Array2<S> {
        &self.values
    }

    pub fn column(&self, alpha: &MultiIndex) -> Option<ArrayView1<'_, S>> {
        self.position.get(alpha).map(|&j| self.values.column(j))
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Linearly interpolated coefficients at `t`, one per index.
    pub fn coefficients_at(&self, t: S) -> Result<Vec<S>> {
        let (k, w) = self.bracket(t)?;
        if w == S::zero() {
            return Ok(self.values.row(k).to_vec());
        }
        let (lo, hi) = (self.values.row(k), self.values.row(k + 1));
        Ok(lo.iter().zip(hi.iter()).map(|(&a, &b)| a + w * (b - a)).collect())
    }

    /// Interpolated `x_α(t)`; indices missing from the table are zero.
    pub fn coefficient(&self, alpha: &MultiIndex, t: S) -> Result<S> {
        let (k, w) = self.bracket(t)?;
        Ok(match self.position.get(alpha) {
            None => S::zero(),
            Some(&j) if w == S::zero() => self.values[[k, j]],
            Some(&j) => self.values[[k, j]] + w * (self.values[[k + 1, j]] - self.values[[k, j]]),
        })
    }

    /// Grid cell `k` and weight `w ∈ [0,1)` with `t = (1−w)·t_k + w·t_{k+1}`.
    fn bracket(&self, t: S) -> Result<(usize, S)> {
        let last = self.times.len() - 1;
        if !(t >= S::zero() && t <= self.times[last]) {
            return domain(format!("time {t} lies outside the table range [0, {}]", self.times[last]));
        }
        let k = match self.times.binary_search_by(|x| x.partial_cmp(&t).expect("finite")) {
            Ok(k) => return Ok((k, S::zero())),
            Err(k) => k - 1,
        };
        Ok((k, (t - self.times[k]) / (self.times[k + 1] - self.times[k])))
    }

    /// Retained energy `Σ_α x_α(t)²`.
    pub fn truncation_energy(&self, t: S) -> Result<S> {
        Ok(self.coefficients_at(t)?.iter().map(|&x| x * x).sum())
    }

    /// `1 − truncation_energy(t) / second_moment`.
    pub fn parseval_defect(&self, t: S, second_moment: S) -> Result<S> {
        if !(second_moment > S::zero()) {
            return domain(format!("second moment must be positive, got {second_moment}"));
        }
        Ok(S::one() - self.truncation_energy(t)? / second_moment)
    }

    /// Truncated expansion `Σ_α x_α(t)·Ψ_α(g)` using the first `basis_size`
    /// features of `g`.
    pub fn eval(&self, g: &[S], t: S) -> Result<S> {
        if g.len() < self.basis_size {
            return usage(format!("{} features supplied, the table needs {}", g.len(), self.basis_size));
        }
        let coeffs = self.coefficients_at(t)?;
        let cache = HermiteCache::new(&g[..self.basis_size], self.max_degree());
        let mut acc = S::zero();
        for (alpha, c) in self.indices.iter().zip(coeffs) {
            if c != S::zero() {
                acc += c * cache.eval(alpha)?;
            }
        }
        Ok(acc)
    }

    /// Trapezoidal `∫₀ᵀ x_α(t)² dt` per column.
    pub fn integrated_energy(&self) -> Vec<S> {
        let half = S::lit(0.5);
        (0..self.indices.len())
            .map(|j| {
                let col = self.values.column(j);
                self.times
                    .windows(2)
                    .enumerate()
                    .map(|(k, w)| half * (w[1] - w[0]) * (col[k] * col[k] + col[k + 1] * col[k + 1]))
                    .sum()
            })
            .collect()
    }

    /// Sub-table of the columns for which `keep` holds, in the original order.
    pub fn filter(&self, keep: impl Fn(&MultiIndex) -> bool) -> Result<Self> {
        let cols: Vec<usize> = (0..self.indices.len()).filter(|&j| keep(&self.indices[j])).collect();
        self.select_columns(&cols)
    }

    /// The `p` columns of largest time-integrated energy, kept in canonical
    /// order. Ties prefer the earlier index.
    pub fn top_energy(&self, p: usize) -> Result<Self> {
        let energy = self.integrated_energy();
        let mut order: Vec<usize> = (0..self.indices.len()).collect();
        order.sort_by(|&a, &b| energy[b].partial_cmp(&energy[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        order.truncate(p);
        order.sort_by(|&a, &b| self.indices[a].cmp(&self.indices[b]));
        self.select_columns(&order)
    }

    fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let values = self.values.select(ndarray::Axis(1), cols);
        let indices = cols.iter().map(|&j| self.indices[j].clone()).collect();
        Self::new(self.times.clone(), self.basis_size, indices, values)
    }

    /// CSV with header `t,<alpha>…`; multi-indices are dash-joined.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> =
            std::iter::once("t".to_owned()).chain(self.indices.iter().map(ToString::to_string)).collect();
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let row: Vec<String> = std::iter::once(t.to_string())
                .chain(self.values.row(k).iter().map(ToString::to_string))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Parse("coefficient table header must start with `t`".into()));
        }
        let indices = header.iter().skip(1).map(str::parse).collect::<Result<Vec<MultiIndex>>>()?;
        let basis_size = indices.first().map_or(1, MultiIndex::len);
        let mut times = Vec::new();
        let mut flat = Vec::new();
        for record in r.records() {
            let record = record?;
            let mut fields = record.iter().map(|f| f.parse::<S>().map_err(|_| Error::Parse(format!("bad number `{f}`"))));
            times.push(fields.next().ok_or_else(|| Error::Parse("empty row".into()))??);
            for v in fields {
                flat.push(v?);
            }
        }
        let values = Array2::from_shape_vec((times.len(), indices.len()), flat)
            .map_err(|_| Error::Parse("ragged coefficient table".into()))?;
        Self::new(times, basis_size, indices, values)
    }
}

/// `Σ_α x_α(t)·Ψ_α(g)` for the features of a one-dimensional path.
pub fn pce_eval<S: Scalar>(table: &CoefficientTable<S>, g: &GaussianFeatures<S>, t: S) -> Result<S> {
    table.eval(g.component(0), t)
}
