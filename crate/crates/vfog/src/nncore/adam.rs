use super::train::{Grads, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state: first/second moment estimates per parameter
/// plus the shared timestep, shaped like the network's tensors.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
    cfg: AdamConfig,
}

impl<S: Scalar> AdamState<S> {
    pub fn new<N: Network<S>>(net: &N, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<S>> = net.tensors().iter().map(|t| vec![S::zero(); t.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0, cfg }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    ///   m <- b1 m + (1-b1) g        mhat = m / (1 - b1^t)
    ///   v <- b2 v + (1-b2) g^2      vhat = v / (1 - b2^t)
    ///   theta <- theta - alpha * mhat / (sqrt(vhat) + eps)
    pub fn step<N: Network<S>>(&mut self, net: &mut N, grads: &Grads<S>) -> Result<()> {
        let mut params = net.tensors_mut();
        let gts = grads.tensors();
        if params.len() != self.m.len() || gts.len() != self.m.len() {
            return Err(Error::Shape {
                context: "adam step tensor count",
                expected: self.m.len(),
                got: params.len().max(gts.len()),
            });
        }
        self.t += 1;
        let b1 = S::from_f64_c(self.cfg.beta1);
        let b2 = S::from_f64_c(self.cfg.beta2);
        let one = S::one();
        let corr1 = S::from_f64_c(1.0 - self.cfg.beta1.powi(self.t as i32));
        let corr2 = S::from_f64_c(1.0 - self.cfg.beta2.powi(self.t as i32));
        let alpha = S::from_f64_c(self.cfg.alpha);
        let eps = S::from_f64_c(self.cfg.epsilon);

        for ((theta, g), (m, v)) in params
            .iter_mut()
            .zip(gts)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if theta.len() != g.len() {
                return Err(Error::Shape {
                    context: "adam step tensor len",
                    expected: theta.len(),
                    got: g.len(),
                });
            }
            for ((th, gi), (mi, vi)) in
                theta.iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + (one - b1) * *gi;
                *vi = b2 * *vi + (one - b2) * *gi * *gi;
                let mhat = *mi / corr1;
                let vhat = *vi / corr2;
                *th = *th - alpha * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::dense::{Activation, DenseLayer, Mlp};
    use crate::nncore::loss::Loss;
    use crate::nncore::matrix::Matrix;

    /// theta holds a single parameter; gradient fed in is theta itself
    /// (i.e. minimizing theta^2 / 2 from theta0 = 1).
    fn single_param_net(theta0: f64) -> Mlp<f64> {
        let w = Matrix::from_vec(1, 1, vec![theta0]).unwrap();
        let layer = DenseLayer::from_parts(w, vec![0.0], Activation::Linear).unwrap();
        Mlp::from_layers(vec![layer], Loss::MeanAbsErr).unwrap()
    }

    // Five Adam steps on g = theta at defaults, frozen from an
    // independent 30-digit computation.
    #[test]
    fn five_step_oracle() {
        let expected = [
            0.999_000_000_009_999_987_9,
            0.998_000_026_223_836_6,
            0.997_000_096_080_147_5,
            0.996_000_226_945_776_2,
            0.995_000_436_077_412_7,
        ];
        let mut net = single_param_net(1.0);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let mut grads = Grads::new_like(&net);
        for want in expected {
            grads.zero();
            let theta = net.tensors()[0][0];
            // write the gradient directly: d/dtheta (theta^2/2) = theta
            grads.layer_mut(0, 1)[0][0] = theta;
            adam.step(&mut net, &grads).unwrap();
            let got = net.tensors()[0][0];
            assert!(
                (got - want).abs() < 1e-12,
                "step {}: got {got:.18}, want {want:.18}",
                adam.timestep()
            );
        }
    }

    #[test]
    fn first_step_moves_by_alpha_almost_exactly() {
        // with m,v = 0 the first update is -alpha * g / (|g| + eps')
        let mut net = single_param_net(1.0);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let mut grads = Grads::new_like(&net);
        grads.layer_mut(0, 1)[0][0] = 1.0;
        adam.step(&mut net, &grads).unwrap();
        let delta = net.tensors()[0][0] - 1.0;
        assert!((delta - (-0.000_999_999_990_000_000_1)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut net = single_param_net(0.37);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let grads = Grads::new_like(&net);
        adam.step(&mut net, &grads).unwrap();
        assert_eq!(net.tensors()[0][0], 0.37);
    }

    #[test]
    fn mismatched_grads_rejected() {
        let mut net = single_param_net(1.0);
        let other = Mlp::<f64>::new(
            &[2, 3, 2],
            Activation::Softmax,
            Loss::CrossEntropy,
            &mut crate::rng::seeded_rng(0),
        )
        .unwrap();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let grads = Grads::new_like(&other);
        assert!(adam.step(&mut net, &grads).is_err());
    }

    #[test]
    fn descends_quadratic_toward_zero() {
        let mut net = single_param_net(1.0);
        let mut adam = AdamState::new(&net, AdamConfig { alpha: 0.05, ..Default::default() });
        let mut grads = Grads::new_like(&net);
        for _ in 0..400 {
            grads.zero();
            let theta = net.tensors()[0][0];
            grads.layer_mut(0, 1)[0][0] = theta;
            adam.step(&mut net, &grads).unwrap();
        }
        assert!(net.tensors()[0][0].abs() < 0.05);
    }
}
