//! Forward and backward passes over time-major batches.
//!
//! Every layer sees a matrix whose rows are ordered `t * batch + b`. Dense and
//! dropout layers treat rows independently; an LSTM walks the time axis. A
//! batch of independent frames is simply a batch with one step.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{Gradients, ParameterStore};
use super::spec::{sigmoid, Activation, Head, LayerSpec, NetworkSpec};
use crate::bayes::DropoutMaskSet;
use crate::error::{Error, Result};

/// Time-major input batch: `data` has `steps * batch` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub steps: usize,
    pub batch: usize,
    pub data: Array2<f64>,
}

impl Batch {
    /// Independent frames, one per row.
    pub fn frames(data: Array2<f64>) -> Self {
        Self {
            steps: 1,
            batch: data.nrows(),
            data,
        }
    }

    /// A single sequence, one time step per row.
    pub fn sequence(data: Array2<f64>) -> Self {
        Self {
            steps: data.nrows(),
            batch: 1,
            data,
        }
    }

    /// Several sequences, zero-padded at the end to the longest length.
    /// Padding only ever follows real steps, so it cannot influence their
    /// outputs.
    pub fn sequences(seqs: &[ArrayView2<f64>]) -> Result<Self> {
        let batch = seqs.len();
        if batch == 0 {
            return Err(Error::InvalidArgument("empty sequence batch".into()));
        }
        let width = seqs[0].ncols();
        let steps = seqs.iter().map(|s| s.nrows()).max().unwrap_or(0);
        let mut data = Array2::zeros((steps * batch, width));
        for (b, seq) in seqs.iter().enumerate() {
            if seq.ncols() != width {
                return Err(Error::shape("sequence batch width", width, seq.ncols()));
            }
            for t in 0..seq.nrows() {
                data.row_mut(t * batch + b).assign(&seq.row(t));
            }
        }
        Ok(Self { steps, batch, data })
    }

    /// Output row for sequence `b` at step `t`.
    #[inline]
    pub fn row_index(&self, t: usize, b: usize) -> usize {
        t * self.batch + b
    }
}

/// Hidden and cell state of an LSTM, one row per sequence in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Array2<f64>,
    pub cell: Array2<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            hidden: Array2::zeros((batch, hidden)),
            cell: Array2::zeros((batch, hidden)),
        }
    }
}

#[derive(Debug, Clone)]
struct LstmStepCache {
    input: Array2<f64>,
    hidden_in: Array2<f64>,
    cell_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense {
        input: Array2<f64>,
        pre: Array2<f64>,
        out: Array2<f64>,
    },
    Dropout {
        scaled: Array1<f64>,
    },
    Lstm {
        steps: Vec<LstmStepCache>,
        recurrent: Array1<f64>,
    },
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    activations: Vec<Array2<f64>>,
    output: Array2<f64>,
    steps: usize,
    batch: usize,
}

impl ForwardCache {
    /// Head output (probabilities), rows time-major.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Output activations of every layer before the head, in layer order.
    pub fn activations(&self) -> &[Array2<f64>] {
        &self.activations
    }
}

/// Scaled mask for inverted dropout: kept units are multiplied by `1/(1-p)`.
fn scaled_mask(mask: &Array1<f64>, p: f64) -> Array1<f64> {
    if p >= 1.0 {
        Array1::zeros(mask.len())
    } else {
        let scale = 1.0 / (1.0 - p);
        mask.mapv(|m| m * scale)
    }
}

fn check_inputs(spec: &NetworkSpec, params: &ParameterStore, batch: &Batch, masks: &DropoutMaskSet) -> Result<()> {
    params.check(spec)?;
    if batch.data.ncols() != spec.input {
        return Err(Error::shape("network input", spec.input, batch.data.ncols()));
    }
    if batch.data.nrows() != batch.steps * batch.batch {
        return Err(Error::shape(
            "batch rows",
            batch.steps * batch.batch,
            batch.data.nrows(),
        ));
    }
    let slots = spec.mask_slots();
    if masks.masks.len() != slots.len() {
        return Err(Error::shape("dropout mask count", slots.len(), masks.masks.len()));
    }
    for (slot, m) in slots.iter().zip(&masks.masks) {
        if m.len() != slot.width {
            return Err(Error::shape(
                format!("dropout mask for layer {}", slot.layer),
                slot.width,
                m.len(),
            ));
        }
    }
    Ok(())
}

fn apply_head(head: Head, logits: &mut Array2<f64>) {
    match head {
        Head::Sigmoid => logits.mapv_inplace(sigmoid),
        Head::Softmax => {
            for mut row in logits.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|v| v / sum);
            }
        }
    }
}

/// One LSTM time step with an already-scaled recurrent mask.
///
/// Gates: `i, f, o = sigmoid(.)`, candidate `g = tanh(.)`, with pre-activations
/// `x W_x + (h ⊙ mask) W_h + b`; then `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`.
/// Returns the new state; the step output is the new hidden state.
pub fn lstm_step(
    params: &[Array2<f64>],
    state: &LstmState,
    input: ArrayView2<f64>,
    recurrent_mask: ArrayView1<f64>,
) -> Result<(LstmState, Array2<f64>)> {
    if params.len() != 3 {
        return Err(Error::shape("lstm parameter tensors", 3, params.len()));
    }
    let hidden = params[1].nrows();
    if state.hidden.ncols() != hidden || state.cell.ncols() != hidden {
        return Err(Error::shape("lstm state width", hidden, state.hidden.ncols()));
    }
    if state.hidden.nrows() != input.nrows() || state.cell.nrows() != input.nrows() {
        return Err(Error::shape("lstm state rows", input.nrows(), state.hidden.nrows()));
    }
    if input.ncols() != params[0].nrows() {
        return Err(Error::shape("lstm input width", params[0].nrows(), input.ncols()));
    }
    if recurrent_mask.len() != hidden {
        return Err(Error::shape("lstm recurrent mask", hidden, recurrent_mask.len()));
    }
    let (next, _) = lstm_step_inner(params, state, input, recurrent_mask);
    let out = next.hidden.clone();
    Ok((next, out))
}

fn lstm_step_inner(
    params: &[Array2<f64>],
    state: &LstmState,
    input: ArrayView2<f64>,
    recurrent_mask: ArrayView1<f64>,
) -> (LstmState, LstmStepCache) {
    let hidden = params[1].nrows();
    let hidden_in = &state.hidden * &recurrent_mask.insert_axis(Axis(0));
    let mut gates = input.dot(&params[0]) + hidden_in.dot(&params[1]);
    gates += &params[2];
    let i = gates.slice(s![.., 0..hidden]).mapv(sigmoid);
    let f = gates.slice(s![.., hidden..2 * hidden]).mapv(sigmoid);
    let g = gates.slice(s![.., 2 * hidden..3 * hidden]).mapv(f64::tanh);
    let o = gates.slice(s![.., 3 * hidden..]).mapv(sigmoid);
    let cell = &f * &state.cell + &i * &g;
    let tanh_c = cell.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = LstmStepCache {
        input: input.to_owned(),
        hidden_in,
        cell_prev: state.cell.clone(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (LstmState { hidden: h, cell }, cache)
}

fn run(
    spec: &NetworkSpec,
    params: &ParameterStore,
    batch: &Batch,
    masks: &DropoutMaskSet,
    keep_cache: bool,
) -> Result<(Array2<f64>, Vec<LayerCache>, Vec<Array2<f64>>)> {
    check_inputs(spec, params, batch, masks)?;
    let slots = spec.mask_slots();
    let mut slot_iter = slots.iter().zip(&masks.masks);
    let mut x = batch.data.clone();
    let mut caches = Vec::with_capacity(if keep_cache { spec.layers.len() } else { 0 });
    let mut activations = Vec::new();

    for (li, layer) in spec.layers.iter().enumerate() {
        match *layer {
            LayerSpec::Dense { activation, .. } => {
                let p = params.layer(li);
                let mut pre = x.dot(&p[0]);
                pre += &p[1];
                let out = if activation == Activation::Identity {
                    pre.clone()
                } else {
                    pre.mapv(|z| activation.apply(z))
                };
                if keep_cache {
                    caches.push(LayerCache::Dense {
                        input: std::mem::take(&mut x),
                        pre,
                        out: out.clone(),
                    });
                }
                x = out;
            }
            LayerSpec::Dropout { p } => {
                let (_, mask) = slot_iter.next().expect("mask slots validated");
                let scaled = scaled_mask(mask, p);
                x *= &scaled.view().insert_axis(Axis(0));
                if keep_cache {
                    caches.push(LayerCache::Dropout { scaled });
                }
            }
            LayerSpec::Lstm {
                hidden,
                recurrent_dropout,
                ..
            } => {
                let (_, mask) = slot_iter.next().expect("mask slots validated");
                let recurrent = scaled_mask(mask, recurrent_dropout);
                let p = params.layer(li);
                let b = batch.batch;
                let mut state = LstmState::zeros(b, hidden);
                let mut out = Array2::zeros((batch.steps * b, hidden));
                let mut step_caches = Vec::with_capacity(if keep_cache { batch.steps } else { 0 });
                for t in 0..batch.steps {
                    let rows = x.slice(s![t * b..(t + 1) * b, ..]);
                    let (next, cache) = lstm_step_inner(p, &state, rows, recurrent.view());
                    out.slice_mut(s![t * b..(t + 1) * b, ..]).assign(&next.hidden);
                    state = next;
                    if keep_cache {
                        step_caches.push(cache);
                    }
                }
                if keep_cache {
                    caches.push(LayerCache::Lstm {
                        steps: step_caches,
                        recurrent,
                    });
                }
                x = out;
            }
        }
        if keep_cache {
            activations.push(x.clone());
        }
    }
    apply_head(spec.head, &mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output".into()));
    }
    Ok((x, caches, activations))
}

/// Head output for `batch` under the given dropout masks (rows time-major).
pub fn forward(
    spec: &NetworkSpec,
    params: &ParameterStore,
    batch: &Batch,
    masks: &DropoutMaskSet,
) -> Result<Array2<f64>> {
    run(spec, params, batch, masks, false).map(|(out, _, _)| out)
}

/// Like [`forward`] but keeps every intermediate needed by [`backward`].
pub fn forward_cached(
    spec: &NetworkSpec,
    params: &ParameterStore,
    batch: &Batch,
    masks: &DropoutMaskSet,
) -> Result<ForwardCache> {
    let (output, layers, activations) = run(spec, params, batch, masks, true)?;
    Ok(ForwardCache {
        layers,
        activations,
        output,
        steps: batch.steps,
        batch: batch.batch,
    })
}

/// Gradients of a loss with respect to every parameter, given the gradient
/// of that loss with respect to the head output. Recurrent layers are
/// differentiated through all time steps.
pub fn backward(
    spec: &NetworkSpec,
    params: &ParameterStore,
    cache: &ForwardCache,
    d_output: &Array2<f64>,
) -> Result<Gradients> {
    if cache.layers.len() != spec.layers.len() {
        return Err(Error::MissingCache(format!(
            "cache holds {} layers, spec has {}",
            cache.layers.len(),
            spec.layers.len()
        )));
    }
    if d_output.dim() != cache.output.dim() {
        return Err(Error::shape(
            "output gradient",
            format!("{:?}", cache.output.dim()),
            format!("{:?}", d_output.dim()),
        ));
    }
    let mut grads = Gradients::zeros_like(params);

    // through the head
    let y = &cache.output;
    let mut dx = match spec.head {
        Head::Sigmoid => Zip::from(d_output).and(y).map_collect(|&d, &p| d * p * (1.0 - p)),
        Head::Softmax => {
            let mut dz = Array2::zeros(y.dim());
            for ((mut dz_row, d_row), y_row) in dz.rows_mut().into_iter().zip(d_output.rows()).zip(y.rows()) {
                let dot = d_row.dot(&y_row);
                Zip::from(&mut dz_row)
                    .and(&d_row)
                    .and(&y_row)
                    .for_each(|z, &d, &p| *z = p * (d - dot));
            }
            dz
        }
    };

    for li in (0..spec.layers.len()).rev() {
        let range = params.layer_range(li);
        match (&spec.layers[li], &cache.layers[li]) {
            (LayerSpec::Dense { activation, .. }, LayerCache::Dense { input, pre, out }) => {
                let dz = if *activation == Activation::Identity {
                    dx
                } else {
                    Zip::from(&dx)
                        .and(pre)
                        .and(out)
                        .map_collect(|&d, &z, &a| d * activation.derivative(z, a))
                };
                grads.tensors[range.start] = input.t().dot(&dz);
                grads.tensors[range.start + 1] = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
                dx = dz.dot(&params.tensors[range.start].t());
            }
            (LayerSpec::Dropout { .. }, LayerCache::Dropout { scaled }) => {
                dx *= &scaled.view().insert_axis(Axis(0));
            }
            (LayerSpec::Lstm { hidden, .. }, LayerCache::Lstm { steps, recurrent }) => {
                let h = *hidden;
                let b = cache.batch;
                let w_x = &params.tensors[range.start];
                let w_h = &params.tensors[range.start + 1];
                let mut d_wx = Array2::<f64>::zeros(w_x.dim());
                let mut d_wh = Array2::<f64>::zeros(w_h.dim());
                let mut d_b = Array2::<f64>::zeros((1, 4 * h));
                let mut d_in = Array2::<f64>::zeros((cache.steps * b, w_x.nrows()));
                let mut dh_next = Array2::<f64>::zeros((b, h));
                let mut dc_next = Array2::<f64>::zeros((b, h));
                let rec = recurrent.view().insert_axis(Axis(0));
                for t in (0..cache.steps).rev() {
                    let st = &steps[t];
                    let dh = &dx.slice(s![t * b..(t + 1) * b, ..]) + &dh_next;
                    let dc = Zip::from(&dh)
                        .and(&st.o)
                        .and(&st.tanh_c)
                        .and(&dc_next)
                        .map_collect(|&dh, &o, &tc, &dcn| dh * o * (1.0 - tc * tc) + dcn);
                    let mut d_gates = Array2::<f64>::zeros((b, 4 * h));
                    Zip::from(d_gates.slice_mut(s![.., 0..h]))
                        .and(&dc)
                        .and(&st.g)
                        .and(&st.i)
                        .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
                    Zip::from(d_gates.slice_mut(s![.., h..2 * h]))
                        .and(&dc)
                        .and(&st.cell_prev)
                        .and(&st.f)
                        .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
                    Zip::from(d_gates.slice_mut(s![.., 2 * h..3 * h]))
                        .and(&dc)
                        .and(&st.i)
                        .and(&st.g)
                        .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                    Zip::from(d_gates.slice_mut(s![.., 3 * h..]))
                        .and(&dh)
                        .and(&st.tanh_c)
                        .and(&st.o)
                        .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));

                    d_wx += &st.input.t().dot(&d_gates);
                    d_wh += &st.hidden_in.t().dot(&d_gates);
                    d_b += &d_gates.sum_axis(Axis(0));
                    d_in.slice_mut(s![t * b..(t + 1) * b, ..])
                        .assign(&d_gates.dot(&w_x.t()));
                    dh_next = d_gates.dot(&w_h.t()) * &rec;
                    dc_next = dc * &st.f;
                }
                grads.tensors[range.start] = d_wx;
                grads.tensors[range.start + 1] = d_wh;
                grads.tensors[range.start + 2] = d_b;
                dx = d_in;
            }
            _ => return Err(Error::MissingCache(format!("layer {li} cache does not match its spec"))),
        }
    }
    Ok(grads)
}
