use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::mlp::{Layer, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Writes `net` as text: a `mlp <dims…>` header, then per layer a `w` line
/// (row-major) and a `b` line. Values use shortest round-trip formatting.
pub fn write_mlp<S: Scalar, W: Write>(net: &Mlp<S>, out: &mut W) -> Result<()> {
    let dims: Vec<String> = net.dims().iter().map(ToString::to_string).collect();
    writeln!(out, "mlp {}", dims.join(" "))?;
    for layer in net.layers() {
        write_values(out, "w", layer.weight.iter())?;
        write_values(out, "b", layer.bias.iter())?;
    }
    Ok(())
}

fn write_values<'a, S: Scalar, W: Write>(out: &mut W, tag: &str, values: impl Iterator<Item = &'a S>) -> Result<()> {
    write!(out, "{tag}")?;
    for v in values {
        write!(out, " {v}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Reads a network written by [`write_mlp`] from the next lines of `input`.
pub fn read_mlp<S: Scalar, R: BufRead>(input: &mut R) -> Result<Mlp<S>> {
    let header = next_line(input)?;
    let mut words = header.split_whitespace();
    if words.next() != Some("mlp") {
        return Err(Error::Parse(format!("expected `mlp` header, found `{header}`")));
    }
    let dims = words
        .map(|w| w.parse::<usize>().map_err(|e| Error::Parse(format!("bad width `{w}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if dims.len() < 2 {
        return Err(Error::Parse("network header needs at least two widths".into()));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let weight = read_values::<S, _>(input, "w", w[0] * w[1])?;
        let bias = read_values::<S, _>(input, "b", w[1])?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((w[1], w[0]), weight).expect("length checked"),
            bias: Array1::from(bias),
        });
    }
    Mlp::from_layers(layers)
}

fn next_line<R: BufRead>(input: &mut R) -> Result<String> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(Error::Parse("unexpected end of checkpoint".into()));
    }
    Ok(line.trim_end().to_owned())
}

fn read_values<S: Scalar, R: BufRead>(input: &mut R, tag: &str, expected: usize) -> Result<Vec<S>> {
    let line = next_line(input)?;
    let mut words = line.split_whitespace();
    if words.next() != Some(tag) {
        return Err(Error::Parse(format!("expected a `{tag}` line")));
    }
    let values = words
        .map(|w| w.parse::<S>().map_err(|_| Error::Parse(format!("bad value `{w}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!("`{tag}` line has {} values, expected {expected}", values.len())));
    }
    Ok(values)
}
