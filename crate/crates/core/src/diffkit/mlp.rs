use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot};
use super::{init_orthogonal, init_uniform, Matrix, SeededRng, WeightInit};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    /// Orthogonal-init gain conventionally paired with the activation.
    pub fn gain(self) -> f64 {
        match self {
            Activation::Relu => std::f64::consts::SQRT_2,
            Activation::Tanh => 5.0 / 3.0,
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer. `weight` is stored `fan_in x fan_out` so a batch
/// `X` maps to `X * weight + bias`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Matrix, act: Activation) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.fan_out());
        for i in 0..x.rows() {
            let dst = out.row_mut(i);
            dst.copy_from_slice(&self.bias);
            // one-hot and normalised observations are mostly zeros
            for (k, &xv) in x.row(i).iter().enumerate() {
                if xv != 0.0 {
                    axpy(dst, xv, self.weight.row(k));
                }
            }
            if act != Activation::Identity {
                dst.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        out
    }
}

/// Activations cached by [`MlpNet::forward`] and consumed by one backward pass.
#[derive(Debug)]
pub struct GradTape {
    acts: Vec<Matrix>,
    shapes: Vec<(usize, usize)>,
}

impl GradTape {
    /// Output of the network for the recorded pass.
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("tape always holds the input")
    }
}

/// Gradients with the same layout as the network they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<Dense>,
}

impl NetGrads {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Multi-layer perceptron with a shared hidden activation and a separate
/// activation on the final layer (identity unless changed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

impl MlpNet {
    /// Builds a network over `sizes = [input, hidden.., output]`.
    ///
    /// Orthogonal init uses the hidden activation's gain on hidden layers,
    /// gain 1 on the last layer and zero biases. Uniform init follows the
    /// PyTorch `Linear` default for both weights and biases.
    pub fn new(sizes: &[usize], hidden: Activation, init: WeightInit, rng: &mut SeededRng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "MLP needs at least one layer of non-zero width, got sizes {sizes:?}"
            )));
        }
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                match init {
                    WeightInit::Orthogonal => {
                        let gain = if i + 1 < n { hidden.gain() } else { 1.0 };
                        Dense {
                            weight: init_orthogonal(fan_out, fan_in, gain, rng).transpose(),
                            bias: vec![0.0; fan_out],
                        }
                    }
                    WeightInit::Uniform => {
                        let weight = init_uniform(fan_out, fan_in, rng).transpose();
                        let bound = 1.0 / (fan_in as f64).sqrt();
                        let bias = (0..fan_out).map(|_| (2.0 * rng.uniform() - 1.0) * bound).collect();
                        Dense { weight, bias }
                    }
                }
            })
            .collect();
        Ok(Self {
            layers,
            hidden,
            output: Activation::Identity,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::shape("MlpNet::from_layers", l.fan_out(), format!("bias of layer {i} with {} entries", l.bias.len())));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::shape("MlpNet::from_layers", layers[i - 1].fan_out(), format!("layer {i} fan-in {}", l.fan_in())));
            }
        }
        Ok(Self {
            layers,
            hidden,
            output,
        })
    }

    pub fn with_output_activation(mut self, output: Activation) -> Self {
        self.output = output;
        self
    }

    /// Multiplies the last layer's weights by `gain` (e.g. a 0.01 policy head).
    pub fn scale_last_layer(&mut self, gain: f64) {
        if let Some(l) = self.layers.last_mut() {
            l.weight.scale(gain);
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::fan_out)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameter tensors in declaration order: `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Human-readable name of tensor `index` in [`MlpNet::tensors`] order.
    pub fn tensor_name(index: usize) -> String {
        let kind = if index % 2 == 0 { "weight" } else { "bias" };
        format!("layer{}.{kind}", index / 2)
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape("MlpNet::forward", format!("{} input columns", self.input_dim()), input.cols()));
        }
        Ok(())
    }

    /// Evaluates the network without recording a tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = self.layers[0].forward(input, self.activation_of(0));
        for (i, l) in self.layers.iter().enumerate().skip(1) {
            x = l.forward(&x, self.activation_of(i));
        }
        Ok(x)
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, GradTape)> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for (i, l) in self.layers.iter().enumerate() {
            let next = l.forward(acts.last().expect("non-empty"), self.activation_of(i));
            acts.push(next);
        }
        let output = acts.last().expect("non-empty").clone();
        let shapes = self.layers.iter().map(|l| l.weight.shape()).collect();
        Ok((output, GradTape { acts, shapes }))
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: GradTape, output_grad: &Matrix) -> Result<(NetGrads, Matrix)> {
        let (grads, input_grad) = self.backward_impl(tape, output_grad, true)?;
        Ok((grads, input_grad.expect("requested")))
    }

    /// Parameter gradients only; skips the (dense) input-gradient product.
    pub fn backward_params(&self, tape: GradTape, output_grad: &Matrix) -> Result<NetGrads> {
        Ok(self.backward_impl(tape, output_grad, false)?.0)
    }

    fn backward_impl(&self, tape: GradTape, output_grad: &Matrix, want_input: bool) -> Result<(NetGrads, Option<Matrix>)> {
        let shapes: Vec<_> = self.layers.iter().map(|l| l.weight.shape()).collect();
        if tape.shapes != shapes {
            return Err(Error::TapeMismatch(format!("tape layers {:?} vs network {:?}", tape.shapes, shapes)));
        }
        let out = tape.output();
        if output_grad.shape() != out.shape() {
            return Err(Error::shape("MlpNet::backward", format!("{:?}", out.shape()), format!("{:?}", output_grad.shape())));
        }

        let mut grads = NetGrads::zeros_like(self);
        let mut g = output_grad.clone();
        let mut input_grad = None;
        for l in (0..self.layers.len()).rev() {
            let act = self.activation_of(l);
            let y = &tape.acts[l + 1];
            if act != Activation::Identity {
                for (gv, &yv) in g.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *gv *= act.grad_from_output(yv);
                }
            }
            let x = &tape.acts[l];
            let layer = &self.layers[l];
            let lg = &mut grads.layers[l];
            for i in 0..g.rows() {
                let gi = g.row(i);
                axpy(&mut lg.bias, 1.0, gi);
                for (k, &xv) in x.row(i).iter().enumerate() {
                    if xv != 0.0 {
                        axpy(lg.weight.row_mut(k), xv, gi);
                    }
                }
            }
            if l > 0 || want_input {
                let mut next = Matrix::zeros(g.rows(), layer.fan_in());
                for i in 0..g.rows() {
                    let gi = g.row(i);
                    let dst = next.row_mut(i);
                    for (k, d) in dst.iter_mut().enumerate() {
                        *d = dot(gi, layer.weight.row(k));
                    }
                }
                if l == 0 {
                    input_grad = Some(next);
                    break;
                }
                g = next;
            }
        }
        Ok((grads, input_grad))
    }
}
