use super::loss::{self, Loss};
use super::matrix::{add_assign, outer_acc, Matrix};
use super::train::{Grads, Network};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Softmax,
    Linear,
}

impl Activation {
    fn apply<S: Scalar>(self, z: &mut [S]) {
        match self {
            Activation::Sigmoid => {
                for v in z.iter_mut() {
                    *v = sigmoid(*v);
                }
            }
            Activation::Softmax => {
                // max-shifted for stability
                let m = z.iter().cloned().fold(S::neg_infinity(), S::max);
                let mut sum = S::zero();
                for v in z.iter_mut() {
                    *v = (*v - m).exp();
                    sum += *v;
                }
                for v in z.iter_mut() {
                    *v /= sum;
                }
            }
            Activation::Linear => {}
        }
    }
}

/// One fully connected layer: activation(W x + b).
#[derive(Clone, Debug)]
pub struct DenseLayer<S> {
    weight: Matrix<S>,
    bias: Vec<S>,
    activation: Activation,
}

impl<S: Scalar> DenseLayer<S> {
    pub fn new<R: Rng>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer {
            weight: Matrix::glorot(output, input, input, output, rng),
            bias: vec![S::zero(); output],
            activation,
        }
    }

    pub fn from_parts(weight: Matrix<S>, bias: Vec<S>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Shape {
                context: "dense layer bias",
                expected: weight.rows(),
                got: bias.len(),
            });
        }
        Ok(DenseLayer { weight, bias, activation })
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Matrix<S> {
        &self.weight
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    /// Weight and bias as mutable flat slices, for optimizer plumbing.
    pub(crate) fn parts_mut(&mut self) -> (&mut [S], &mut [S]) {
        (self.weight.data_mut(), self.bias.as_mut_slice())
    }

    pub fn forward_into(&self, x: &[S], out: &mut [S]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape {
                context: "dense layer input",
                expected: self.input_size(),
                got: x.len(),
            });
        }
        self.weight.matvec(x, out);
        add_assign(out, &self.bias);
        self.activation.apply(out);
        Ok(())
    }
}

/// activation(W x + b) as a fresh vector.
pub fn dense_forward<S: Scalar>(layer: &DenseLayer<S>, input: &[S]) -> Result<Vec<S>> {
    let mut out = vec![S::zero(); layer.output_size()];
    layer.forward_into(input, &mut out)?;
    Ok(out)
}

/// Multilayer perceptron. Hidden layers are sigmoid; the output layer's
/// activation is fixed by the loss: softmax with cross-entropy, linear
/// with MAE. The constructor enforces the pairing because backprop
/// relies on it (the output delta is computed jointly).
#[derive(Clone, Debug)]
pub struct Mlp<S> {
    layers: Vec<DenseLayer<S>>,
    loss: Loss,
}

/// One training example for an [`Mlp`]: `target` is a one-hot vector for
/// cross-entropy, a plain value vector for MAE.
#[derive(Clone, Debug)]
pub struct DenseSample<S> {
    pub input: Vec<S>,
    pub target: Vec<S>,
}

fn check_pairing(output_activation: Activation, loss: Loss) -> Result<()> {
    let ok = matches!(
        (output_activation, loss),
        (Activation::Softmax, Loss::CrossEntropy) | (Activation::Linear, Loss::MeanAbsErr)
    );
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "unsupported output pairing {output_activation:?} with {loss:?}"
        )))
    }
}

impl<S: Scalar> Mlp<S> {
    /// `dims` lists layer widths input-first, e.g. `[12, 100, 100, 100, 9]`.
    pub fn new<R: Rng>(
        dims: &[usize],
        output_activation: Activation,
        loss: Loss,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|d| *d == 0) {
            return Err(Error::InvalidInput(format!(
                "mlp needs at least two non-zero layer widths, got {dims:?}"
            )));
        }
        check_pairing(output_activation, loss)?;
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output_activation } else { Activation::Sigmoid };
                DenseLayer::new(w[0], w[1], act, rng)
            })
            .collect();
        Ok(Mlp { layers, loss })
    }

    pub fn from_layers(layers: Vec<DenseLayer<S>>, loss: Loss) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("mlp needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].output_size() != w[1].input_size() {
                return Err(Error::Shape {
                    context: "mlp layer chain",
                    expected: w[0].output_size(),
                    got: w[1].input_size(),
                });
            }
        }
        check_pairing(layers.last().unwrap().activation(), loss)?;
        Ok(Mlp { layers, loss })
    }

    pub fn layers(&self) -> &[DenseLayer<S>] {
        &self.layers
    }

    pub fn loss_kind(&self) -> Loss {
        self.loss
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().output_size()
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.forward_cached(x)?.pop().unwrap())
    }

    /// Activations of every layer, input first. Length = layers + 1.
    fn forward_cached(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = vec![S::zero(); layer.output_size()];
            layer.forward_into(acts.last().unwrap(), &mut out)?;
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: li });
            }
            acts.push(out);
        }
        Ok(acts)
    }

    fn loss_of(&self, output: &[S], target: &[S]) -> Result<S> {
        if target.len() != output.len() {
            return Err(Error::Shape {
                context: "mlp target",
                expected: output.len(),
                got: target.len(),
            });
        }
        Ok(match self.loss {
            Loss::CrossEntropy => loss::cross_entropy(output, target),
            Loss::MeanAbsErr => loss::mean_abs(output, target),
        })
    }
}

impl<S: Scalar> Network<S> for Mlp<S> {
    type Sample = DenseSample<S>;

    fn tensors(&self) -> Vec<&[S]> {
        let mut t = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            t.push(l.weight.data());
            t.push(l.bias.as_slice());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut t = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            t.push(l.weight.data_mut());
            t.push(l.bias.as_mut_slice());
        }
        t
    }

    fn loss(&self, sample: &DenseSample<S>) -> Result<S> {
        let out = self.forward(&sample.input)?;
        self.loss_of(&out, &sample.target)
    }

    fn accumulate_grads(&self, sample: &DenseSample<S>, grads: &mut Grads<S>) -> Result<S> {
        let acts = self.forward_cached(&sample.input)?;
        let output = acts.last().unwrap();
        let loss = self.loss_of(output, &sample.target)?;

        // delta at the output layer's pre-activation
        let mut delta = vec![S::zero(); output.len()];
        match self.loss {
            Loss::CrossEntropy => loss::cross_entropy_grad_z(output, &sample.target, &mut delta),
            Loss::MeanAbsErr => loss::mean_abs_grad(output, &sample.target, &mut delta),
        }

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let below = &acts[li];
            let g = grads.layer_mut(2 * li, 2);
            outer_acc(&mut g[0], &delta, below);
            add_assign(&mut g[1], &delta);
            if li == 0 {
                break;
            }
            let mut prev = vec![S::zero(); layer.input_size()];
            layer.weight.matvec_t_acc(&delta, &mut prev);
            // hidden layers are sigmoid: a' = a (1 - a)
            for (p, a) in prev.iter_mut().zip(below) {
                *p *= *a * (S::one() - *a);
            }
            delta = prev;
        }
        Ok(loss)
    }
}
