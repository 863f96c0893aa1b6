//! Single-direction LSTM over padded batches, with backpropagation through
//! time.
//!
//! Gate rows are stacked in the order input, forget, output, candidate:
//!
//! ```text
//! z = W [x; h_prev] + b
//! i = σ(z_i)  f = σ(z_f)  o = σ(z_o)  g = tanh(z_g)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × (D + H)`.
    pub w: Array2<f64>,
    /// `4H`.
    pub b: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Array2::zeros((4 * hidden, input + hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Weights uniform in `[-range, range]`, biases zero.
    pub fn uniform<R: Rng>(input: usize, hidden: usize, range: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        p.w.mapv_inplace(|_| rng.gen_range(-range..=range));
        p
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.ncols() - self.hidden()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// One LSTM step for a single example.
pub fn lstm_step(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    params: &LstmParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !params.is_finite() {
        return Err(Error::NumericalError("LSTM parameters"));
    }
    let h = params.hidden();
    let xh = concatenate(Axis(0), &[x, h_prev]).map_err(|_| Error::NumericalError("LSTM input shape"))?;
    let z = params.w.dot(&xh) + &params.b;
    let i = z.slice(s![0..h]).mapv(sigmoid);
    let f = z.slice(s![h..2 * h]).mapv(sigmoid);
    let o = z.slice(s![2 * h..3 * h]).mapv(sigmoid);
    let g = z.slice(s![3 * h..4 * h]).mapv(f64::tanh);
    let c = &f * &c_prev + &i * &g;
    let h_new = &o * &c.mapv(f64::tanh);
    if h_new.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalError("LSTM state"));
    }
    Ok((h_new, c))
}

/// Activations kept from a batched forward pass.
pub(crate) struct SequenceCache {
    /// Per step, `B × (D + H)`: the input concatenated with the previous state.
    xh: Vec<Array2<f64>>,
    /// Per step, `B × 4H` activated gates `[i, f, o, g]`.
    gates: Vec<Array2<f64>>,
    /// Per step, `B × H` cell state and its tanh.
    c: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    /// Per step, `B × H` hidden state.
    pub h: Vec<Array2<f64>>,
}

/// Runs the LSTM left to right over `inputs` (one `B × D` matrix per step)
/// from zero initial state.
///
/// Sequences in a batch are left-aligned; positions after a sequence's end
/// only ever feed later positions, so padding never reaches real outputs.
pub(crate) fn forward_sequence(params: &LstmParams, inputs: &[Array2<f64>]) -> SequenceCache {
    let hdim = params.hidden();
    let batch = inputs.first().map_or(0, |x| x.nrows());
    let mut cache = SequenceCache {
        xh: Vec::with_capacity(inputs.len()),
        gates: Vec::with_capacity(inputs.len()),
        c: Vec::with_capacity(inputs.len()),
        tanh_c: Vec::with_capacity(inputs.len()),
        h: Vec::with_capacity(inputs.len()),
    };
    let mut h_prev = Array2::<f64>::zeros((batch, hdim));
    let mut c_prev = Array2::<f64>::zeros((batch, hdim));
    for x in inputs {
        let xh = concatenate(Axis(1), &[x.view(), h_prev.view()]).expect("batch rows agree");
        let mut gates = xh.dot(&params.w.t());
        gates += &params.b;
        gates.slice_mut(s![.., 0..3 * hdim]).mapv_inplace(sigmoid);
        gates.slice_mut(s![.., 3 * hdim..]).mapv_inplace(f64::tanh);

        let i = gates.slice(s![.., 0..hdim]);
        let f = gates.slice(s![.., hdim..2 * hdim]);
        let o = gates.slice(s![.., 2 * hdim..3 * hdim]);
        let g = gates.slice(s![.., 3 * hdim..]);
        let mut c = Array2::<f64>::zeros((batch, hdim));
        Zip::from(&mut c)
            .and(&f)
            .and(&c_prev)
            .and(&i)
            .and(&g)
            .for_each(|c, &f, &cp, &i, &g| *c = f * cp + i * g);
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;

        cache.xh.push(xh);
        cache.gates.push(gates);
        cache.c.push(c.clone());
        cache.tanh_c.push(tanh_c);
        cache.h.push(h.clone());
        h_prev = h;
        c_prev = c;
    }
    cache
}

/// Backpropagation through time for one direction.
///
/// `dh` holds the loss gradient with respect to every step's hidden state.
/// Gradients are accumulated into `grad`; the returned vector holds the
/// gradient with respect to each step's `B × D` input.
pub(crate) fn backward_sequence(
    params: &LstmParams,
    cache: &SequenceCache,
    dh: &[Array2<f64>],
    grad: &mut LstmParams,
) -> Vec<Array2<f64>> {
    let hdim = params.hidden();
    let input = params.input();
    let steps = cache.h.len();
    let batch = cache.h.first().map_or(0, |h| h.nrows());
    let mut dx = vec![Array2::<f64>::zeros((0, 0)); steps];
    let mut dh_next = Array2::<f64>::zeros((batch, hdim));
    let mut dc_next = Array2::<f64>::zeros((batch, hdim));
    let zero = Array2::<f64>::zeros((batch, hdim));

    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let i = gates.slice(s![.., 0..hdim]);
        let f = gates.slice(s![.., hdim..2 * hdim]);
        let o = gates.slice(s![.., 2 * hdim..3 * hdim]);
        let g = gates.slice(s![.., 3 * hdim..]);
        let c_prev = if t > 0 { &cache.c[t - 1] } else { &zero };
        let tanh_c = &cache.tanh_c[t];

        let dh_t = &dh[t] + &dh_next;
        let mut dz = Array2::<f64>::zeros((batch, 4 * hdim));
        let mut dc = dc_next;
        // dc += dh ⊙ o ⊙ (1 - tanh²c)
        Zip::from(&mut dc)
            .and(&dh_t)
            .and(&o)
            .and(tanh_c)
            .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
        {
            let (mut dz_i, rest) = dz.view_mut().split_at(Axis(1), hdim);
            let (mut dz_f, rest) = rest.split_at(Axis(1), hdim);
            let (mut dz_o, mut dz_g) = rest.split_at(Axis(1), hdim);
            Zip::from(&mut dz_i)
                .and(&dc)
                .and(&g)
                .and(&i)
                .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
            Zip::from(&mut dz_f)
                .and(&dc)
                .and(c_prev)
                .and(&f)
                .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
            Zip::from(&mut dz_o)
                .and(&dh_t)
                .and(tanh_c)
                .and(&o)
                .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
            Zip::from(&mut dz_g)
                .and(&dc)
                .and(&i)
                .and(&g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
        }
        dc_next = &dc * &f;

        grad.w += &dz.t().dot(&cache.xh[t]);
        grad.b += &dz.sum_axis(Axis(0));
        let dxh = dz.dot(&params.w);
        dx[t] = dxh.slice(s![.., 0..input]).to_owned();
        dh_next = dxh.slice(s![.., input..]).to_owned();
    }
    dx
}
