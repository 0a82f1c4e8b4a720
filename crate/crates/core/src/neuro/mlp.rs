use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        }
    }

    /// Multiplies `grad` by the activation derivative, given pre-activation
    /// `z` and post-activation `y`.
    fn backprop(self, grad: &mut Array2<f64>, z: &Array2<f64>, y: &Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => ndarray::Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Relu => ndarray::Zip::from(grad).and(z).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "Linear",
            Activation::Tanh => "Tanh",
            Activation::Relu => "Relu",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "Linear" => Some(Activation::Linear),
            "Tanh" => Some(Activation::Tanh),
            "Relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Affine layer `y = W x + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((n_out, n_in)),
            bias: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.nrows()
    }
}

/// Fully connected network. `activations[i]` follows layer `i`; the last one
/// is the output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activations: Vec<Activation>,
}

/// Values retained by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
    dims: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache of a nonempty network")
    }
}

/// Gradients shaped like the network, plus the gradient w.r.t. the input.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
    pub input: Array2<f64>,
}

impl MlpGrads {
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn sq_norm(&self) -> f64 {
        self.flat().map(|g| g * g).sum()
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight *= c;
            l.bias *= c;
        }
    }
}

impl Mlp {
    /// Hidden layers use `hidden`, the final layer `output`. Weights and
    /// biases are uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_simple_fn((w[1], w[0]), || rng.gen_range(-bound..=bound)),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.gen_range(-bound..=bound)),
                }
            })
            .collect();
        let activations = (0..n).map(|i| if i + 1 == n { output } else { hidden }).collect();
        Mlp { layers, activations }
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let n = sizes.len() - 1;
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            activations: (0..n).map(|i| if i + 1 == n { output } else { hidden }).collect(),
        }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weight.dim()).collect()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.dims() == other.dims() && self.activations == other.activations
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if input.ncols() != self.n_in() {
            return Err(Error::Dimension {
                context: "mlp input",
                expected: self.n_in(),
                got: input.ncols(),
            });
        }
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            dims: self.dims(),
        };
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            let mut y = z.clone();
            act.apply(&mut y);
            cache.inputs.push(x);
            cache.pre.push(z);
            cache.outputs.push(y.clone());
            x = y;
        }
        Ok((x, cache))
    }

    /// Forward pass without keeping a cache.
    pub fn predict_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.n_in() {
            return Err(Error::Dimension {
                context: "mlp input",
                expected: self.n_in(),
                got: input.ncols(),
            });
        }
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            act.apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let (y, cache) = self.forward_batch(view)?;
        Ok((y.into_raw_vec_and_offset().0, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode gradients of `sum(output * upstream)` for every
    /// parameter and the input. Parameter gradients are summed over the batch.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<MlpGrads> {
        if cache.dims != self.dims() {
            return Err(Error::Contract("forward cache does not match this network".into()));
        }
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Contract(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = vec![Dense::zeros(0, 0); self.layers.len()];
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            self.activations[i].backprop(&mut delta, &cache.pre[i], &cache.outputs[i]);
            let weight = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            let next = delta.dot(&self.layers[i].weight);
            grads[i] = Dense { weight, bias };
            delta = next;
        }
        Ok(MlpGrads {
            layers: grads,
            input: delta,
        })
    }
}

/// Blends `target` toward `online`: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert!(target.same_shape(online), "soft update between differently shaped networks");
    assert!((0.0..=1.0).contains(&tau));
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;

    #[test]
    fn zero_net_gives_zero() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Relu, Activation::Linear);
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_one_by_one() {
        let mut net = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Linear);
        net.layers[0].weight[[0, 0]] = 2.0;
        net.layers[0].bias[0] = 1.0;
        assert_eq!(net.predict(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn tanh_output_is_bounded() {
        let mut rng = stream(0, "t");
        let mut net = Mlp::new(&[4, 8, 3], Activation::Relu, Activation::Tanh, &mut rng);
        for v in net.params_mut() {
            *v *= 50.0;
        }
        let y = net.predict(&[10.0, -4.0, 3.0, 9.0]).unwrap();
        assert!(y.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Mlp::zeros(&[3, 2], Activation::Relu, Activation::Linear);
        assert!(net.predict(&[1.0]).is_err());
        let other = Mlp::zeros(&[3, 5, 2], Activation::Relu, Activation::Linear);
        let (_, cache) = other.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(net.backward(&cache, array![[1.0, 1.0]].view()).is_err());
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let mut net = Mlp::zeros(&[3, 2], Activation::Relu, Activation::Linear);
        net.layers[0].weight = array![[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]];
        let x = [1.0, 2.0, -3.0];
        let (_, cache) = net.forward(&x).unwrap();
        let up = array![[0.3, -2.0]];
        let g = net.backward(&cache, up.view()).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(g.layers[0].weight[[i, j]], up[[0, i]] * x[j]);
            }
        }
        assert_eq!(g.layers[0].bias, array![0.3, -2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = stream(1, "t");
        let net = Mlp::new(&[3, 5, 5, 2], Activation::Tanh, Activation::Linear, &mut rng);
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(g.flat().all(|v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_update_examples() {
        let mut rng = stream(2, "t");
        let online = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng);
        let mut target = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng);
        let before = target.clone();
        soft_update(&mut target, &online, 0.0);
        assert_eq!(target, before);
        soft_update(&mut target, &online, 1.0);
        assert_eq!(target, online);

        let mut zero = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Linear);
        let mut two = zero.clone();
        two.layers[0].weight[[0, 0]] = 2.0;
        soft_update(&mut zero, &two, 0.5);
        assert_eq!(zero.layers[0].weight[[0, 0]], 1.0);
    }
}
