//! Numerical verification of analytic gradients. Kept in the library
//! (not buried in tests) so any new network can be checked the same way.

use super::train::{Grads, Network};
use crate::error::Result;
use crate::scalar::Scalar;

/// Central finite differences of the loss over every parameter:
/// (L(theta + h) - L(theta - h)) / 2h, shaped like the tensors.
///
/// `f64` networks with h around 1e-5 give ~1e-9 absolute accuracy; f32
/// needs a larger h and looser tolerances.
pub fn finite_diff_grads<S: Scalar, N: Network<S>>(
    net: &N,
    sample: &N::Sample,
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut work = net.clone();
    let shapes: Vec<usize> = work.tensors().iter().map(|t| t.len()).collect();
    let hs = S::from_f64_c(h);
    let mut out: Vec<Vec<f64>> = shapes.iter().map(|n| vec![0.0; *n]).collect();
    for (ti, &len) in shapes.iter().enumerate() {
        for pi in 0..len {
            let orig = work.tensors()[ti][pi];
            work.tensors_mut()[ti][pi] = orig + hs;
            let lp = work.loss(sample)?.to_f64_c();
            work.tensors_mut()[ti][pi] = orig - hs;
            let lm = work.loss(sample)?.to_f64_c();
            work.tensors_mut()[ti][pi] = orig;
            out[ti][pi] = (lp - lm) / (2.0 * h);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub params_checked: usize,
}

/// Compares analytic gradients against [`finite_diff_grads`].
///
/// Error per parameter is |a - n| / max(|a|, |n|, `denom_floor`). The
/// floor keeps parameters whose true gradient sits at the finite-
/// difference noise floor (~1e-9 for f64) from registering spurious
/// relative error; a denominator floor of 1e-4 still catches any
/// gradient that is wrong by more than ~1e-8 absolute.
pub fn check_gradients<S: Scalar, N: Network<S>>(
    net: &N,
    sample: &N::Sample,
    h: f64,
    denom_floor: f64,
) -> Result<GradCheck> {
    let mut analytic = Grads::new_like(net);
    net.accumulate_grads(sample, &mut analytic)?;
    let numeric = finite_diff_grads(net, sample, h)?;

    let mut max_rel_err = 0.0f64;
    let mut params_checked = 0usize;
    for (at, nt) in analytic.tensors().iter().zip(&numeric) {
        for (a, n) in at.iter().zip(nt) {
            let a = a.to_f64_c();
            let err = (a - n).abs() / a.abs().max(n.abs()).max(denom_floor);
            max_rel_err = max_rel_err.max(err);
            params_checked += 1;
        }
    }
    Ok(GradCheck { max_rel_err, params_checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::dense::{Activation, DenseSample, Mlp};
    use crate::nncore::loss::Loss;
    use crate::nncore::lstm::{SeqRegressor, SeqSample};
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn small_mlp_gradients_match() {
        let mut rng = seeded_rng(21);
        let net = Mlp::<f64>::new(&[3, 5, 4], Activation::Softmax, Loss::CrossEntropy, &mut rng).unwrap();
        for case in 0..3 {
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut target = vec![0.0; 4];
            target[rng.gen_range(0..4)] = 1.0;
            let sample = DenseSample { input, target };
            let check = check_gradients(&net, &sample, 1e-5, 1e-4).unwrap();
            assert!(
                check.max_rel_err <= 1e-4,
                "case {case}: max rel err {}",
                check.max_rel_err
            );
            assert_eq!(check.params_checked, net.param_count());
        }
    }

    #[test]
    fn small_mlp_mae_gradients_match() {
        let mut rng = seeded_rng(22);
        let net = Mlp::<f64>::new(&[4, 6, 1], Activation::Linear, Loss::MeanAbsErr, &mut rng).unwrap();
        let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // target far from the prediction keeps the MAE kink away from
        // the finite-difference probe
        let sample = DenseSample { input, target: vec![5.0] };
        let check = check_gradients(&net, &sample, 1e-5, 1e-4).unwrap();
        assert!(check.max_rel_err <= 1e-4, "max rel err {}", check.max_rel_err);
    }

    #[test]
    fn stacked_lstm_gradients_match_with_mask() {
        let mut rng = seeded_rng(23);
        let net = SeqRegressor::<f64>::new(2, &[3, 3], 4, 6, &mut rng).unwrap();
        for pad in [0usize, 2, 5] {
            let steps: Vec<Vec<f64>> = (0..6)
                .map(|t| {
                    if t < pad {
                        vec![0.0; 2]
                    } else {
                        (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()
                    }
                })
                .collect();
            let mask: Vec<bool> = (0..6).map(|t| t >= pad).collect();
            let sample = SeqSample { steps, mask, target: 3.0 };
            let check = check_gradients(&net, &sample, 1e-5, 1e-4).unwrap();
            assert!(
                check.max_rel_err <= 1e-4,
                "pad {pad}: max rel err {}",
                check.max_rel_err
            );
        }
    }
}
