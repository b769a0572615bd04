use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;

use super::brownian::{path_rng, sample_brownian_with, DyadicPath};
use super::sde::{reference_state, SdeSpec};
use crate::chaos_basis::{basis_levels, encode_path};
use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;

/// One training observation: encoded path features and the state at time `t`,
/// both taken from the same Brownian path.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub path_id: u64,
    pub t: S,
    /// State `X_t`, length `d`.
    pub x: Vec<S>,
    /// Encoded features, length `m·d`, component-major.
    pub g: Vec<S>,
}

/// Simulates the path with id `path_id` and the uniformly drawn, grid-snapped time.
pub fn sample_path<S: Scalar>(spec: &SdeSpec<S>, sim_level: u32, seed: u64, path_id: u64) -> (usize, DyadicPath<S>) {
    let mut rng = path_rng(seed, path_id);
    let u: f64 = rng.random();
    let k = (u * (1u64 << sim_level) as f64).round() as usize;
    let path = sample_brownian_with(&mut rng, sim_level, spec.horizon(), spec.dim());
    (k, path)
}

/// Builds `n` samples. Sample `i` draws its own stream `(seed, i)`, so the
/// result does not depend on thread count.
pub fn make_dataset<S: Scalar>(
    spec: &SdeSpec<S>,
    n: usize,
    m: usize,
    sim_level: u32,
    seed: u64,
) -> Result<Vec<Sample<S>>> {
    let levels = basis_levels(m)?;
    if sim_level < levels {
        return usage(format!("sim_level {sim_level} is below log2(m) = {levels}"));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|path_id| {
            let (k, path) = sample_path(spec, sim_level, seed, path_id);
            let x = reference_state(spec, &path, k)?;
            let g = encode_path(&path, m)?.into_vec();
            Ok(Sample { path_id, t: path.time(k), x, g })
        })
        .collect()
}

/// Header `path_id,t,x_0..x_{d-1},g_0..g_{m·d-1}`.
pub fn dataset_header(d: usize, features: usize) -> Vec<String> {
    let mut h = vec!["path_id".to_string(), "t".to_string()];
    h.extend((0..d).map(|i| format!("x_{i}")));
    h.extend((0..features).map(|i| format!("g_{i}")));
    h
}

/// Writes samples as decimal text that round-trips exactly.
pub fn write_dataset<S: Scalar, W: Write>(samples: &[Sample<S>], d: usize, features: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header(d, features))?;
    let mut record = Vec::with_capacity(2 + d + features);
    for s in samples {
        if s.x.len() != d || s.g.len() != features {
            return usage(format!("sample {} does not match the header shape", s.path_id));
        }
        record.clear();
        record.push(s.path_id.to_string());
        record.push(s.t.into_f64().to_string());
        record.extend(s.x.iter().chain(&s.g).map(|v| v.into_f64().to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset file; returns the samples with `(d, m·d)` inferred from the header.
pub fn read_dataset<S: Scalar, R: Read>(reader: R) -> Result<(Vec<Sample<S>>, usize, usize)> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let d = header.iter().filter(|h| h.starts_with("x_")).count();
    let features = header.iter().filter(|h| h.starts_with("g_")).count();
    let expected = dataset_header(d, features);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse("dataset header does not match path_id,t,x_*,g_*".into()));
    }
    let parse = |s: &str| -> Result<S> {
        s.parse::<f64>().map(S::lit).map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
    };
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let path_id = rec[0].parse::<u64>().map_err(|e| Error::Parse(format!("bad path_id: {e}")))?;
        let t = parse(&rec[1])?;
        let x = (0..d).map(|i| parse(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
        let g = (0..features).map(|i| parse(&rec[2 + d + i])).collect::<Result<Vec<_>>>()?;
        samples.push(Sample { path_id, t, x, g });
    }
    Ok((samples, d, features))
}
