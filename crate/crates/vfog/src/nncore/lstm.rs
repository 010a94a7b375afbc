use super::dense::{Activation, DenseLayer};
use super::loss;
use super::matrix::{add_assign, outer_acc, Matrix};
use super::train::{Grads, Network};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use rand::Rng;

/// Per-layer tensors a gradient/optimizer step addresses, in order:
/// w_i, b_i, w_f, b_f, w_g, b_g, w_o, b_o.
pub const LSTM_TENSORS_PER_LAYER: usize = 8;

/// Recurrent state carried across timesteps.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<S> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![S::zero(); hidden],
            c: vec![S::zero(); hidden],
        }
    }
}

/// One LSTM layer. Each gate weight is hidden x (input + hidden) and is
/// applied to the concatenation [x_t ; h_{t-1}].
///
///   i = sigmoid(W_i [x;h] + b_i)     f = sigmoid(W_f [x;h] + b_f)
///   g = tanh(W_g [x;h] + b_g)        o = sigmoid(W_o [x;h] + b_o)
///   c' = f*c + i*g                   h' = o * tanh(c')
#[derive(Clone, Debug)]
pub struct LstmLayer<S> {
    input_size: usize,
    hidden_size: usize,
    w_i: Matrix<S>,
    w_f: Matrix<S>,
    w_g: Matrix<S>,
    w_o: Matrix<S>,
    b_i: Vec<S>,
    b_f: Vec<S>,
    b_g: Vec<S>,
    b_o: Vec<S>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub struct LstmStepCache<S> {
    pub state: LstmState<S>,
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
    tanh_c: Vec<S>,
    xh: Vec<S>,
}

impl<S: Scalar> LstmLayer<S> {
    /// Glorot-uniform weights with recurrent fan-in counted; forget-gate
    /// bias starts at 1 so early training doesn't flush cell state.
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let cols = input_size + hidden_size;
        let gate = |rng: &mut R| Matrix::glorot(hidden_size, cols, cols, hidden_size, rng);
        LstmLayer {
            input_size,
            hidden_size,
            w_i: gate(rng),
            w_f: gate(rng),
            w_g: gate(rng),
            w_o: gate(rng),
            b_i: vec![S::zero(); hidden_size],
            b_f: vec![S::one(); hidden_size],
            b_g: vec![S::zero(); hidden_size],
            b_o: vec![S::zero(); hidden_size],
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        input_size: usize,
        hidden_size: usize,
        w_i: Matrix<S>,
        b_i: Vec<S>,
        w_f: Matrix<S>,
        b_f: Vec<S>,
        w_g: Matrix<S>,
        b_g: Vec<S>,
        w_o: Matrix<S>,
        b_o: Vec<S>,
    ) -> Result<Self> {
        let cols = input_size + hidden_size;
        for (w, b) in [(&w_i, &b_i), (&w_f, &b_f), (&w_g, &b_g), (&w_o, &b_o)] {
            if w.rows() != hidden_size || w.cols() != cols {
                return Err(Error::Shape {
                    context: "lstm gate weight",
                    expected: hidden_size * cols,
                    got: w.rows() * w.cols(),
                });
            }
            if b.len() != hidden_size {
                return Err(Error::Shape {
                    context: "lstm gate bias",
                    expected: hidden_size,
                    got: b.len(),
                });
            }
        }
        Ok(LstmLayer {
            input_size,
            hidden_size,
            w_i,
            w_f,
            w_g,
            w_o,
            b_i,
            b_f,
            b_g,
            b_o,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn gates(&self) -> [(&Matrix<S>, &[S]); 4] {
        [
            (&self.w_i, self.b_i.as_slice()),
            (&self.w_f, self.b_f.as_slice()),
            (&self.w_g, self.b_g.as_slice()),
            (&self.w_o, self.b_o.as_slice()),
        ]
    }

    /// Advance one timestep.
    pub fn step(&self, x: &[S], prev: &LstmState<S>) -> Result<LstmState<S>> {
        Ok(self.step_cached(x, prev)?.state)
    }

    pub(crate) fn step_cached(&self, x: &[S], prev: &LstmState<S>) -> Result<LstmStepCache<S>> {
        if x.len() != self.input_size {
            return Err(Error::Shape {
                context: "lstm step input",
                expected: self.input_size,
                got: x.len(),
            });
        }
        if prev.h.len() != self.hidden_size || prev.c.len() != self.hidden_size {
            return Err(Error::Shape {
                context: "lstm step state",
                expected: self.hidden_size,
                got: prev.h.len(),
            });
        }
        let mut xh = Vec::with_capacity(x.len() + prev.h.len());
        xh.extend_from_slice(x);
        xh.extend_from_slice(&prev.h);

        let gate = |w: &Matrix<S>, b: &[S], squash: fn(S) -> S| {
            let mut z = vec![S::zero(); self.hidden_size];
            w.matvec(&xh, &mut z);
            add_assign(&mut z, b);
            for v in z.iter_mut() {
                *v = squash(*v);
            }
            z
        };
        let i = gate(&self.w_i, &self.b_i, sigmoid);
        let f = gate(&self.w_f, &self.b_f, sigmoid);
        let g = gate(&self.w_g, &self.b_g, S::tanh);
        let o = gate(&self.w_o, &self.b_o, sigmoid);

        let mut c = vec![S::zero(); self.hidden_size];
        let mut tanh_c = vec![S::zero(); self.hidden_size];
        let mut h = vec![S::zero(); self.hidden_size];
        for k in 0..self.hidden_size {
            c[k] = f[k] * prev.c[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h[k] = o[k] * tanh_c[k];
        }
        Ok(LstmStepCache {
            state: LstmState { h, c },
            i,
            f,
            g,
            o,
            tanh_c,
            xh,
        })
    }

    /// Backward through one cached step. `dh`/`dc` are gradients flowing
    /// into this step's outputs; returns (dx, dh_prev, dc_prev) and adds
    /// weight gradients into `g8` (this layer's 8 tensors).
    #[allow(clippy::too_many_arguments)]
    fn backward_step(
        &self,
        cache: &LstmStepCache<S>,
        prev_c: &[S],
        dh: &[S],
        dc_in: &[S],
        g8: &mut [Vec<S>],
    ) -> (Vec<S>, Vec<S>, Vec<S>) {
        let n = self.hidden_size;
        let one = S::one();

        let mut dc = vec![S::zero(); n];
        let mut dz_i = vec![S::zero(); n];
        let mut dz_f = vec![S::zero(); n];
        let mut dz_g = vec![S::zero(); n];
        let mut dz_o = vec![S::zero(); n];
        for k in 0..n {
            let tc = cache.tanh_c[k];
            dc[k] = dc_in[k] + dh[k] * cache.o[k] * (one - tc * tc);
            let d_o = dh[k] * tc;
            dz_o[k] = d_o * cache.o[k] * (one - cache.o[k]);
            dz_i[k] = dc[k] * cache.g[k] * cache.i[k] * (one - cache.i[k]);
            dz_f[k] = dc[k] * prev_c[k] * cache.f[k] * (one - cache.f[k]);
            dz_g[k] = dc[k] * cache.i[k] * (one - cache.g[k] * cache.g[k]);
        }

        outer_acc(&mut g8[0], &dz_i, &cache.xh);
        add_assign(&mut g8[1], &dz_i);
        outer_acc(&mut g8[2], &dz_f, &cache.xh);
        add_assign(&mut g8[3], &dz_f);
        outer_acc(&mut g8[4], &dz_g, &cache.xh);
        add_assign(&mut g8[5], &dz_g);
        outer_acc(&mut g8[6], &dz_o, &cache.xh);
        add_assign(&mut g8[7], &dz_o);

        let mut dxh = vec![S::zero(); self.input_size + n];
        self.w_i.matvec_t_acc(&dz_i, &mut dxh);
        self.w_f.matvec_t_acc(&dz_f, &mut dxh);
        self.w_g.matvec_t_acc(&dz_g, &mut dxh);
        self.w_o.matvec_t_acc(&dz_o, &mut dxh);
        let dh_prev = dxh.split_off(self.input_size);
        let dx = dxh;

        let mut dc_prev = vec![S::zero(); n];
        for k in 0..n {
            dc_prev[k] = dc[k] * cache.f[k];
        }
        (dx, dh_prev, dc_prev)
    }
}

/// Advance one LSTM timestep (free-function form).
pub fn lstm_step<S: Scalar>(layer: &LstmLayer<S>, x_t: &[S], prev: &LstmState<S>) -> Result<LstmState<S>> {
    layer.step(x_t, prev)
}

/// Sequence sample: fixed-length window of feature vectors, a validity
/// mask (false = padded/skipped step), and a scalar regression target.
#[derive(Clone, Debug)]
pub struct SeqSample<S> {
    pub steps: Vec<Vec<S>>,
    pub mask: Vec<bool>,
    pub target: S,
}

/// Stacked LSTM with a small dense head, regressing one scalar from the
/// final hidden state under MAE loss. Masked timesteps are skipped
/// entirely: state passes through unchanged in both directions.
#[derive(Clone, Debug)]
pub struct SeqRegressor<S> {
    lstm: Vec<LstmLayer<S>>,
    head: Vec<DenseLayer<S>>,
    window: usize,
}

struct SeqCache<S> {
    /// caches[t] is None for masked steps, else one cache per layer.
    steps: Vec<Option<Vec<LstmStepCache<S>>>>,
    /// head activations, input (final h) first
    head_acts: Vec<Vec<S>>,
}

impl<S: Scalar> SeqRegressor<S> {
    pub fn new<R: Rng>(
        input_size: usize,
        lstm_hidden: &[usize],
        head_hidden: usize,
        window: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_size == 0 || window == 0 || head_hidden == 0 {
            return Err(Error::InvalidInput(
                "sequence regressor sizes must be positive".into(),
            ));
        }
        if lstm_hidden.is_empty() || lstm_hidden.iter().any(|h| *h == 0) {
            return Err(Error::InvalidInput(format!(
                "lstm hidden sizes must be non-empty and positive, got {lstm_hidden:?}"
            )));
        }
        let mut lstm = Vec::with_capacity(lstm_hidden.len());
        let mut in_size = input_size;
        for &h in lstm_hidden {
            lstm.push(LstmLayer::new(in_size, h, rng));
            in_size = h;
        }
        let head = vec![
            DenseLayer::new(in_size, head_hidden, Activation::Sigmoid, rng),
            DenseLayer::new(head_hidden, 1, Activation::Linear, rng),
        ];
        Ok(SeqRegressor { lstm, head, window })
    }

    pub fn from_parts(lstm: Vec<LstmLayer<S>>, head: Vec<DenseLayer<S>>, window: usize) -> Result<Self> {
        if lstm.is_empty() || head.is_empty() || window == 0 {
            return Err(Error::InvalidInput(
                "sequence regressor needs lstm layers, head layers and a window".into(),
            ));
        }
        for w in lstm.windows(2) {
            if w[0].hidden_size() != w[1].input_size() {
                return Err(Error::Shape {
                    context: "lstm stack chain",
                    expected: w[0].hidden_size(),
                    got: w[1].input_size(),
                });
            }
        }
        if head[0].input_size() != lstm.last().unwrap().hidden_size() {
            return Err(Error::Shape {
                context: "lstm head input",
                expected: lstm.last().unwrap().hidden_size(),
                got: head[0].input_size(),
            });
        }
        for w in head.windows(2) {
            if w[0].output_size() != w[1].input_size() {
                return Err(Error::Shape {
                    context: "head layer chain",
                    expected: w[0].output_size(),
                    got: w[1].input_size(),
                });
            }
        }
        let last = head.last().unwrap();
        if last.output_size() != 1 || last.activation() != Activation::Linear {
            return Err(Error::InvalidInput(
                "sequence regressor head must end in one linear unit".into(),
            ));
        }
        Ok(SeqRegressor { lstm, head, window })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn input_size(&self) -> usize {
        self.lstm[0].input_size()
    }

    pub fn lstm_layers(&self) -> &[LstmLayer<S>] {
        &self.lstm
    }

    pub fn head_layers(&self) -> &[DenseLayer<S>] {
        &self.head
    }

    /// Scalar prediction for one window.
    pub fn forward(&self, steps: &[Vec<S>], mask: &[bool]) -> Result<S> {
        Ok(self.forward_cached(steps, mask)?.1)
    }

    fn check_window(&self, steps: &[Vec<S>], mask: &[bool]) -> Result<()> {
        if steps.len() != self.window {
            return Err(Error::Shape {
                context: "sequence window length",
                expected: self.window,
                got: steps.len(),
            });
        }
        if mask.len() != self.window {
            return Err(Error::Shape {
                context: "sequence mask length",
                expected: self.window,
                got: mask.len(),
            });
        }
        Ok(())
    }

    fn forward_cached(&self, steps: &[Vec<S>], mask: &[bool]) -> Result<(SeqCache<S>, S)> {
        self.check_window(steps, mask)?;
        let mut states: Vec<LstmState<S>> = self
            .lstm
            .iter()
            .map(|l| LstmState::zeros(l.hidden_size()))
            .collect();
        let mut caches: Vec<Option<Vec<LstmStepCache<S>>>> = Vec::with_capacity(self.window);

        for (x, &valid) in steps.iter().zip(mask) {
            if !valid {
                caches.push(None);
                continue;
            }
            let mut layer_caches = Vec::with_capacity(self.lstm.len());
            let mut input = x.as_slice();
            for (li, layer) in self.lstm.iter().enumerate() {
                let cache = layer.step_cached(input, &states[li])?;
                if cache.state.h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { layer: li });
                }
                states[li] = cache.state.clone();
                layer_caches.push(cache);
                input = &states[li].h;
            }
            caches.push(Some(layer_caches));
        }

        // head on the final hidden state of the top layer
        let mut head_acts = Vec::with_capacity(self.head.len() + 1);
        head_acts.push(states.last().unwrap().h.clone());
        for (hi, layer) in self.head.iter().enumerate() {
            let mut out = vec![S::zero(); layer.output_size()];
            layer.forward_into(head_acts.last().unwrap(), &mut out)?;
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: self.lstm.len() + hi });
            }
            head_acts.push(out);
        }
        let y = head_acts.last().unwrap()[0];
        Ok((SeqCache { steps: caches, head_acts }, y))
    }
}

impl<S: Scalar> Network<S> for SeqRegressor<S> {
    type Sample = SeqSample<S>;

    fn tensors(&self) -> Vec<&[S]> {
        let mut t = Vec::with_capacity(self.lstm.len() * LSTM_TENSORS_PER_LAYER + self.head.len() * 2);
        for l in &self.lstm {
            t.push(l.w_i.data());
            t.push(l.b_i.as_slice());
            t.push(l.w_f.data());
            t.push(l.b_f.as_slice());
            t.push(l.w_g.data());
            t.push(l.b_g.as_slice());
            t.push(l.w_o.data());
            t.push(l.b_o.as_slice());
        }
        for l in &self.head {
            t.push(l.weight().data());
            t.push(l.bias());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut t = Vec::with_capacity(self.lstm.len() * LSTM_TENSORS_PER_LAYER + self.head.len() * 2);
        for l in &mut self.lstm {
            t.push(l.w_i.data_mut());
            t.push(l.b_i.as_mut_slice());
            t.push(l.w_f.data_mut());
            t.push(l.b_f.as_mut_slice());
            t.push(l.w_g.data_mut());
            t.push(l.b_g.as_mut_slice());
            t.push(l.w_o.data_mut());
            t.push(l.b_o.as_mut_slice());
        }
        for l in &mut self.head {
            let (w, b) = l.parts_mut();
            t.push(w);
            t.push(b);
        }
        t
    }

    fn loss(&self, sample: &SeqSample<S>) -> Result<S> {
        let y = self.forward(&sample.steps, &sample.mask)?;
        Ok(loss::mean_abs(&[y], &[sample.target]))
    }

    fn accumulate_grads(&self, sample: &SeqSample<S>, grads: &mut Grads<S>) -> Result<S> {
        let (cache, y) = self.forward_cached(&sample.steps, &sample.mask)?;
        let loss_val = loss::mean_abs(&[y], &[sample.target]);

        // head backprop (output delta is the MAE subgradient)
        let mut delta = vec![S::zero(); 1];
        loss::mean_abs_grad(&[y], &[sample.target], &mut delta);
        let head_base = self.lstm.len() * LSTM_TENSORS_PER_LAYER;
        for hi in (0..self.head.len()).rev() {
            let layer = &self.head[hi];
            let below = &cache.head_acts[hi];
            let g = grads.layer_mut(head_base + 2 * hi, 2);
            outer_acc(&mut g[0], &delta, below);
            add_assign(&mut g[1], &delta);
            let mut prev = vec![S::zero(); layer.input_size()];
            layer.weight().matvec_t_acc(&delta, &mut prev);
            if hi > 0 {
                // sigmoid hidden layer of the head
                for (p, a) in prev.iter_mut().zip(below) {
                    *p *= *a * (S::one() - *a);
                }
            }
            delta = prev;
        }

        // delta now carries dL/d(final h of top layer); BPTT over steps.
        let layers = self.lstm.len();
        let mut dh: Vec<Vec<S>> = self.lstm.iter().map(|l| vec![S::zero(); l.hidden_size()]).collect();
        let mut dc: Vec<Vec<S>> = dh.clone();
        dh[layers - 1] = delta;

        for t in (0..self.window).rev() {
            let Some(layer_caches) = &cache.steps[t] else {
                continue; // masked: state passed through, gradients too
            };
            // previous cell state of this layer at time t: from the most
            // recent unmasked step before t, else zeros
            for li in (0..layers).rev() {
                let prev_c: Vec<S> = {
                    let mut prev = None;
                    for tt in (0..t).rev() {
                        if let Some(cs) = &cache.steps[tt] {
                            prev = Some(cs[li].state.c.clone());
                            break;
                        }
                    }
                    prev.unwrap_or_else(|| vec![S::zero(); self.lstm[li].hidden_size()])
                };
                let g8 = grads.layer_mut(li * LSTM_TENSORS_PER_LAYER, LSTM_TENSORS_PER_LAYER);
                let (dx, dh_prev, dc_prev) = self.lstm[li].backward_step(
                    &layer_caches[li],
                    &prev_c,
                    &dh[li],
                    &dc[li],
                    g8,
                );
                dh[li] = dh_prev;
                dc[li] = dc_prev;
                if li > 0 {
                    // this step's input was the lower layer's h at time t
                    add_assign(&mut dh[li - 1], &dx);
                }
            }
        }
        Ok(loss_val)
    }
}
