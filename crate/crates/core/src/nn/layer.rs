use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::sigmoid;
use crate::tensor::{kernels, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    None,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative at pre-activation `x`, given the activated value `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn taped(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::None => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Fully connected layer `y = act(x·Wᵀ + b)` with `W` stored `[out×in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

/// Tape handles for one layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
}

impl LinearLayer {
    /// Uniform(−1/√fan_in, 1/√fan_in) weights, zero bias.
    pub fn init(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        LinearLayer {
            weight: Tensor::matrix(output, input, data).expect("positive layer sizes"),
            bias: Tensor::zeros(&[output]),
            activation,
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        weight.expect_rank2("linear")?;
        if bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch {
                op: "linear",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(LinearLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != 2 || shape[1] != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "linear",
                left: shape.to_vec(),
                right: vec![self.output_dim(), self.input_dim()],
            });
        }
        Ok(())
    }

    /// Pre-activation `x·Wᵀ + b`.
    pub fn affine(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x.shape())?;
        let (m, k, n) = (x.shape()[0], self.input_dim(), self.output_dim());
        let mut out = self.bias.data().repeat(m);
        kernels::gemm_nt(x.data(), self.weight.data(), &mut out, m, k, n);
        Tensor::matrix(m, n, out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let act = self.activation;
        Ok(self.affine(x)?.map(|v| act.apply(v)))
    }

    pub fn attach(&self, tape: &mut Tape) -> LayerVars {
        LayerVars {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }

    pub fn forward_taped(&self, tape: &mut Tape, vars: LayerVars, x: Var) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let h = tape.matmul_nt(x, vars.weight)?;
        let h = tape.add(h, vars.bias)?;
        self.activation.taped(tape, h)
    }
}

fn check_chain(layers: &[LinearLayer]) -> Result<()> {
    for pair in layers.windows(2) {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(Error::ShapeMismatch {
                op: "mlp",
                left: pair[0].weight.shape().to_vec(),
                right: pair[1].weight.shape().to_vec(),
            });
        }
    }
    Ok(())
}

/// Applies each layer and its activation in order.
pub fn mlp_forward(layers: &[LinearLayer], input: &Tensor) -> Result<Tensor> {
    check_chain(layers)?;
    let mut h = input.clone();
    for layer in layers {
        h = layer.forward(&h)?;
    }
    Ok(h)
}

pub fn mlp_forward_taped(tape: &mut Tape, layers: &[LinearLayer], vars: &[LayerVars], input: Var) -> Result<Var> {
    check_chain(layers)?;
    let mut h = input;
    for (layer, &v) in layers.iter().zip(vars) {
        h = layer.forward_taped(tape, v, h)?;
    }
    Ok(h)
}

/// Exact Jacobian `∂out/∂in` (`[out×in]`) of the network at one input,
/// by forward-mode propagation of the identity through every layer.
pub fn mlp_jacobian(layers: &[LinearLayer], input: &[f64]) -> Result<Tensor> {
    check_chain(layers)?;
    let in_dim = input.len();
    let mut h = Tensor::matrix(1, in_dim, input.to_vec())?;
    // tangent[j][p] = ∂h_j/∂in_p, stored [width×in]
    let mut tangent = {
        let mut eye = vec![0.0; in_dim * in_dim];
        for p in 0..in_dim {
            eye[p * in_dim + p] = 1.0;
        }
        Tensor::matrix(in_dim, in_dim, eye)?
    };
    for layer in layers {
        let pre = layer.affine(&h)?;
        let post = pre.map(|v| layer.activation.apply(v));
        let mut next = layer.weight.matmul(&tangent)?;
        for j in 0..layer.output_dim() {
            let d = layer.activation.derivative(pre.data()[j], post.data()[j]);
            for v in next.row_mut(j) {
                *v *= d;
            }
        }
        tangent = next;
        h = post;
    }
    Ok(tangent)
}
