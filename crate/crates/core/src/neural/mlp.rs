use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{usage, Result};
use crate::scalar::Scalar;

/// One affine map `x ↦ Wx + b`; `W` has shape `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<S> {
    pub weight: Array2<S>,
    pub bias: Array1<S>,
}

impl<S: Scalar> Layer<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { weight: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

/// Weight initialisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// `W ~ U(−s, s)` with `s = √(6 / fan_in)`, zero biases.
    #[default]
    FanInUniform,
    /// `W, b ~ U(−s, s)` with `s = 1/√fan_in`; random biases spread the ReLU kinks.
    FanInUniformBiased,
}

/// Feed-forward network `((W¹,b¹), …, (Wᴸ,bᴸ))` realised with ReLU between
/// layers and no activation after the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    layers: Vec<Layer<S>>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<S> {
    pub layers: Vec<Layer<S>>,
}

/// Layer inputs recorded by a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    /// `inputs[ℓ]` feeds layer `ℓ`; rows are samples.
    inputs: Vec<Array2<S>>,
    output: Array2<S>,
}

impl<S> ForwardCache<S> {
    pub fn output(&self) -> &Array2<S> {
        &self.output
    }
}

impl<S: Scalar> Mlp<S> {
    pub fn from_layers(layers: Vec<Layer<S>>) -> Result<Self> {
        if layers.is_empty() {
            return usage("a network needs at least one layer");
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return usage(format!("layer {l}: bias length does not match weight rows"));
            }
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return usage(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    l,
                    pair[0].outputs(),
                    l + 1,
                    pair[1].inputs()
                ));
            }
        }
        let layers = layers
            .into_iter()
            .map(|l| Layer { weight: l.weight.as_standard_layout().into_owned(), bias: l.bias })
            .collect();
        Ok(Mlp { layers })
    }

    /// Random network with layer widths `dims = (n_0, …, n_L)`.
    pub fn init(dims: &[usize], seed: u64, scheme: InitScheme) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return usage(format!("network dims need at least two positive widths, got {dims:?}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                match scheme {
                    InitScheme::FanInUniform => {
                        let bound = (6.0 / fan_in as f64).sqrt();
                        let weight =
                            Array2::from_shape_simple_fn((fan_out, fan_in), || S::lit(rng.random_range(-bound..bound)));
                        Layer { weight, bias: Array1::zeros(fan_out) }
                    }
                    InitScheme::FanInUniformBiased => {
                        let bound = 1.0 / (fan_in as f64).sqrt();
                        let mut draw = || S::lit(rng.random_range(-bound..bound));
                        let weight = Array2::from_shape_simple_fn((fan_out, fan_in), &mut draw);
                        let bias = Array1::from_shape_simple_fn(fan_out, draw);
                        Layer { weight, bias }
                    }
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    /// `(n_0, …, n_L)`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::outputs)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `Σ_ℓ (n_{ℓ−1} + 1)·n_ℓ`.
    pub fn size(&self) -> usize {
        self.layers.iter().map(|l| (l.inputs() + 1) * l.outputs()).sum()
    }

    /// Number of nonzero weights and biases, `‖Φ‖₀`.
    pub fn nonzero_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.iter().chain(l.bias.iter()).filter(|&&v| v != S::zero()).count())
            .sum()
    }

    /// Realisation at a single input.
    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(batch)?.into_iter().collect())
    }

    /// Realisation applied row-wise.
    pub fn forward_batch(&self, x: ArrayView2<'_, S>) -> Result<Array2<S>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut a = affine(&self.layers[0], x);
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            relu_in_place(&mut a);
            a = affine(layer, a.view());
            debug_assert!(l <= last);
        }
        Ok(a)
    }

    /// Forward pass keeping every layer input for [`Mlp::backward`].
    pub fn forward_cached(&self, x: ArrayView2<'_, S>) -> Result<ForwardCache<S>> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        let mut a = affine(&self.layers[0], x);
        for layer in &self.layers[1..] {
            relu_in_place(&mut a);
            let z = affine(layer, a.view());
            inputs.push(a);
            a = z;
        }
        Ok(ForwardCache { inputs, output: a })
    }

    /// Gradients of `Σ_rows ⟨upstream_row, output_row⟩` with respect to every
    /// parameter, plus the input gradient when `want_input` is set.
    /// The ReLU derivative at 0 is taken as 0.
    pub fn backward(
        &self,
        cache: &ForwardCache<S>,
        upstream: ArrayView2<'_, S>,
        want_input: bool,
    ) -> Result<(MlpGrads<S>, Option<Array2<S>>)> {
        if upstream.dim() != cache.output.dim() {
            return usage(format!(
                "upstream shape {:?} does not match output shape {:?}",
                upstream.dim(),
                cache.output.dim()
            ));
        }
        let depth = self.layers.len();
        let mut grads: Vec<Option<Layer<S>>> = vec![None; depth];
        let mut delta = upstream.to_owned();
        let mut input_grad = None;
        for l in (0..depth).rev() {
            let a_prev = &cache.inputs[l];
            let weight = delta.t().dot(a_prev).as_standard_layout().into_owned();
            let bias = delta.sum_axis(Axis(0));
            grads[l] = Some(Layer { weight, bias });
            if l > 0 || want_input {
                let mut back = delta.dot(&self.layers[l].weight);
                if l > 0 {
                    back.zip_mut_with(a_prev, |g, &a| {
                        if a <= S::zero() {
                            *g = S::zero();
                        }
                    });
                    delta = back;
                } else {
                    input_grad = Some(back);
                }
            }
        }
        Ok((MlpGrads { layers: grads.into_iter().map(|g| g.expect("filled")).collect() }, input_grad))
    }

    /// Single-input gradient of `⟨upstream, R(x)⟩`: parameter gradients and `∂/∂x`.
    pub fn grad(&self, x: &[S], upstream: &[S]) -> Result<(MlpGrads<S>, Vec<S>)> {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let uv = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row view");
        let cache = self.forward_cached(xv)?;
        let (g, input) = self.backward(&cache, uv, true)?;
        Ok((g, input.expect("requested").into_iter().collect()))
    }

    /// Mutable parameter blocks in a fixed order (W¹, b¹, W², b², …).
    pub fn param_slices_mut(&mut self) -> Vec<&mut [S]> {
        for l in &mut self.layers {
            if !l.weight.is_standard_layout() {
                l.weight = l.weight.as_standard_layout().into_owned();
            }
        }
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_lengths(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect()
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n != self.input_dim() {
            return usage(format!("network expects {} inputs, got {n}", self.input_dim()));
        }
        Ok(())
    }
}

impl<S: Scalar> MlpGrads<S> {
    pub fn zeros_like(net: &Mlp<S>) -> Self {
        MlpGrads { layers: net.layers.iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect() }
    }

    /// Parameter blocks in the same order as [`Mlp::param_slices_mut`].
    pub fn param_slices(&self) -> Vec<&[S]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [l.weight.as_slice().expect("standard layout"), l.bias.as_slice().expect("standard layout")]
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|&v| v == S::zero()))
    }
}

fn affine<S: Scalar>(layer: &Layer<S>, x: ArrayView2<'_, S>) -> Array2<S> {
    let mut z = x.dot(&layer.weight.t());
    z += &layer.bias;
    z
}

fn relu_in_place<S: Scalar>(a: &mut Array2<S>) {
    a.mapv_inplace(|v| if v > S::zero() { v } else { S::zero() });
}

/// Parallelisation `P(Φ¹, Φ²)`: shared input, stacked first layer, block-diagonal
/// later layers; the realisation is the concatenation of both realisations.
pub fn parallelise<S: Scalar>(a: &Mlp<S>, b: &Mlp<S>) -> Result<Mlp<S>> {
    if a.input_dim() != b.input_dim() {
        return usage(format!("input dimensions differ: {} vs {}", a.input_dim(), b.input_dim()));
    }
    if a.depth() != b.depth() {
        return usage(format!(
            "depths differ ({} vs {}); pad the shallower network with pad_to_depth first",
            a.depth(),
            b.depth()
        ));
    }
    let layers = a
        .layers
        .iter()
        .zip(&b.layers)
        .enumerate()
        .map(|(l, (la, lb))| {
            let rows = la.outputs() + lb.outputs();
            let (cols, b_col) = if l == 0 {
                (la.inputs(), 0)
            } else {
                (la.inputs() + lb.inputs(), la.inputs())
            };
            let mut weight = Array2::zeros((rows, cols));
            weight.slice_mut(s![..la.outputs(), ..la.inputs()]).assign(&la.weight);
            weight.slice_mut(s![la.outputs().., b_col..b_col + lb.inputs()]).assign(&lb.weight);
            let bias = ndarray::concatenate![Axis(0), la.bias, lb.bias];
            Layer { weight, bias }
        })
        .collect();
    Mlp::from_layers(layers)
}

/// Deepens `net` to `depth` layers without changing its realisation, using
/// `y = ReLU(y) − ReLU(−y)`: the last affine map is doubled into `(A, −A)`,
/// followed by identity layers on the doubled width and a final `[I, −I]`.
pub fn pad_to_depth<S: Scalar>(net: &Mlp<S>, depth: usize) -> Result<Mlp<S>> {
    let current = net.depth();
    if depth < current {
        return usage(format!("cannot pad a depth-{current} network down to {depth}"));
    }
    if depth == current {
        return Ok(net.clone());
    }
    let s = net.output_dim();
    let mut layers = net.layers[..current - 1].to_vec();
    let last = &net.layers[current - 1];
    let weight = ndarray::concatenate![Axis(0), last.weight, last.weight.mapv(|v| -v)];
    let bias = ndarray::concatenate![Axis(0), last.bias, last.bias.mapv(|v| -v)];
    layers.push(Layer { weight, bias });
    for _ in 0..(depth - current - 1) {
        layers.push(Layer { weight: Array2::eye(2 * s), bias: Array1::zeros(2 * s) });
    }
    let eye = Array2::<S>::eye(s);
    let weight = ndarray::concatenate![Axis(1), eye, eye.mapv(|v| -v)];
    layers.push(Layer { weight, bias: Array1::zeros(s) });
    Mlp::from_layers(layers)
}
