//! Layers built from tape primitives: affine maps, LSTM cells and
//! bidirectional LSTMs, highway layers and scaled dot-product self-attention.

use rand::Rng;

use super::{Axis, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// `x · W + b` with `W` of shape `in × out` and `b` a `1 × out` row.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Linear {
            weight: store.add_xavier(format!("{name}.weight"), input, output, rng)?,
            bias: store.add_zeros(format!("{name}.bias"), 1, output)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add(xw, b)
    }
}

/// Weights of one LSTM direction. Gate blocks are laid out `[i, f, g, o]`
/// along the columns of `w_input`, `w_hidden` and `bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(LstmParams {
            w_input: store.add_xavier(format!("{name}.w_input"), input, 4 * hidden, rng)?,
            w_hidden: store.add_xavier(format!("{name}.w_hidden"), hidden, 4 * hidden, rng)?,
            bias: store.add_zeros(format!("{name}.bias"), 1, 4 * hidden)?,
            hidden,
        })
    }

    /// Input projection `x · W_x + b` for a whole batch or sequence.
    fn project_input(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w_input);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add(xw, b)
    }

    /// One recurrence step given the already projected input rows.
    fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        projected: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        let h = self.hidden;
        let wh = tape.param(store, self.w_hidden);
        let rec = tape.matmul(h_prev, wh)?;
        let gates = tape.add(projected, rec)?;
        let i = tape.slice_cols(gates, 0, h)?;
        let f = tape.slice_cols(gates, h, 2 * h)?;
        let g = tape.slice_cols(gates, 2 * h, 3 * h)?;
        let o = tape.slice_cols(gates, 3 * h, 4 * h)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }
}

/// Standard LSTM cell over a batch of rows: `x` is `B × in`, states `B × hidden`.
pub fn lstm_cell(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    params: &LstmParams,
) -> Result<(Var, Var)> {
    let (b, _) = tape.value(x).dims("lstm_cell")?;
    for (name, s) in [("h_prev", h_prev), ("c_prev", c_prev)] {
        let d = tape.value(s).dims("lstm_cell")?;
        if d != (b, params.hidden) {
            return Err(Error::shape(
                "lstm_cell",
                format!("{name} is {}x{}, expected {b}x{}", d.0, d.1, params.hidden),
            ));
        }
    }
    let projected = params.project_input(tape, store, x)?;
    params.step(tape, store, projected, h_prev, c_prev)
}

/// Runs one direction over rows `order` of a `T × d` sequence and returns the
/// hidden states in the order visited.
fn run_direction(
    tape: &mut Tape,
    store: &ParamStore,
    seq: Var,
    params: &LstmParams,
    order: impl Iterator<Item = usize>,
) -> Result<Vec<Var>> {
    let projected = params.project_input(tape, store, seq)?;
    let mut h = tape.leaf(Tensor::zeros(1, params.hidden));
    let mut c = h;
    let mut out = Vec::new();
    for t in order {
        let row = tape.select_rows(projected, &[t])?;
        (h, c) = params.step(tape, store, row, h, c)?;
        out.push(h);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmParams::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            backward: LstmParams::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }
}

/// Bidirectional LSTM over a `T × d` sequence; row `t` of the `T × 2h`
/// output is `[forward state after t, backward state after t]`.
pub fn bilstm(tape: &mut Tape, store: &ParamStore, seq: Var, params: &BiLstm) -> Result<Var> {
    let (t_len, _) = tape.value(seq).dims("bilstm")?;
    let fwd = run_direction(tape, store, seq, &params.forward, 0..t_len)?;
    let mut bwd = run_direction(tape, store, seq, &params.backward, (0..t_len).rev())?;
    bwd.reverse();
    let f = tape.concat(&fwd, Axis::Rows)?;
    let b = tape.concat(&bwd, Axis::Rows)?;
    tape.concat(&[f, b], Axis::Cols)
}

/// `y = g ⊙ relu(W_h x + b_h) + (1 − g) ⊙ x` with `g = sigmoid(W_g x + b_g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Highway {
    pub transform: Linear,
    pub gate: Linear,
}

impl Highway {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Result<Self> {
        Ok(Highway {
            transform: Linear::new(store, &format!("{name}.transform"), dim, dim, rng)?,
            gate: Linear::new(store, &format!("{name}.gate"), dim, dim, rng)?,
        })
    }
}

pub fn highway(tape: &mut Tape, store: &ParamStore, x: Var, params: &Highway) -> Result<Var> {
    let (_, d) = tape.value(x).dims("highway")?;
    let (wr, wc) = store.get(params.transform.weight).tensor.dims("highway")?;
    if wr != d || wc != d {
        return Err(Error::shape(
            "highway",
            format!("input width {d} does not match transform {wr}x{wc}"),
        ));
    }
    let t = params.transform.forward(tape, store, x)?;
    let t = tape.relu(t);
    let g = params.gate.forward(tape, store, x)?;
    let g = tape.sigmoid(g);
    // x + g ⊙ (t − x)
    let diff = tape.sub(t, x)?;
    let gated = tape.mul(g, diff)?;
    tape.add(x, gated)
}

/// Scaled dot-product self-attention with learned `d × d` projections.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttention {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
    pub dim: usize,
}

impl SelfAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Result<Self> {
        Ok(SelfAttention {
            query: store.add_xavier(format!("{name}.query"), dim, dim, rng)?,
            key: store.add_xavier(format!("{name}.key"), dim, dim, rng)?,
            value: store.add_xavier(format!("{name}.value"), dim, dim, rng)?,
            dim,
        })
    }
}

/// Returns the `T × d` attended sequence and the `T × T` attention weights.
pub fn self_attention(
    tape: &mut Tape,
    store: &ParamStore,
    seq: Var,
    params: &SelfAttention,
) -> Result<(Var, Var)> {
    let (_, d) = tape.value(seq).dims("self_attention")?;
    if d != params.dim {
        return Err(Error::shape(
            "self_attention",
            format!("input width {d}, projections expect {}", params.dim),
        ));
    }
    let wq = tape.param(store, params.query);
    let wk = tape.param(store, params.key);
    let wv = tape.param(store, params.value);
    let q = tape.matmul(seq, wq)?;
    let k = tape.matmul(seq, wk)?;
    let v = tape.matmul(seq, wv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let weights = tape.softmax(scores, Axis::Cols)?;
    Ok((tape.matmul(weights, v)?, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_lstm_cell_gives_zero_state() {
        let mut store = ParamStore::new();
        let p = LstmParams {
            w_input: store.add_zeros("wx", 3, 8).unwrap(),
            w_hidden: store.add_zeros("wh", 2, 8).unwrap(),
            bias: store.add_zeros("b", 1, 8).unwrap(),
            hidden: 2,
        };
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(1, 3));
        let h0 = t.leaf(Tensor::zeros(1, 2));
        let (h, c) = lstm_cell(&mut t, &store, x, h0, h0, &p).unwrap();
        assert_eq!(t.value(h).data(), &[0.0, 0.0]);
        assert_eq!(t.value(c).data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_cell_matches_hand_computation() {
        // 1 input, 2 hidden units; gate columns [i0 i1 f0 f1 g0 g1 o0 o1]
        let wx = [0.5, -0.3, 0.2, 0.1, -0.4, 0.6, 0.3, -0.2];
        let wh = [
            0.1, 0.2, -0.1, 0.3, 0.2, -0.2, 0.05, 0.4, //
            -0.3, 0.1, 0.2, -0.1, 0.3, 0.1, -0.2, 0.2,
        ];
        let bias = [0.0, 0.1, 0.5, 0.5, 0.0, -0.1, 0.2, 0.0];
        let (x, h_prev, c_prev) = (0.7, [0.2, -0.5], [0.4, -0.1]);

        let mut expect_h = [0.0; 2];
        let mut expect_c = [0.0; 2];
        for u in 0..2 {
            let pre = |gate: usize| {
                let col = gate * 2 + u;
                x * wx[col] + h_prev[0] * wh[col] + h_prev[1] * wh[8 + col] + bias[col]
            };
            let (i, f, g, o) = (sig(pre(0)), sig(pre(1)), pre(2).tanh(), sig(pre(3)));
            expect_c[u] = f * c_prev[u] + i * g;
            expect_h[u] = o * expect_c[u].tanh();
        }

        let mut store = ParamStore::new();
        let p = LstmParams {
            w_input: store.add("wx", Tensor::matrix(1, 8, wx.to_vec()).unwrap()).unwrap(),
            w_hidden: store.add("wh", Tensor::matrix(2, 8, wh.to_vec()).unwrap()).unwrap(),
            bias: store.add("b", Tensor::matrix(1, 8, bias.to_vec()).unwrap()).unwrap(),
            hidden: 2,
        };
        let mut t = Tape::new();
        let xv = t.leaf(Tensor::scalar(x));
        let hv = t.leaf(Tensor::matrix(1, 2, h_prev.to_vec()).unwrap());
        let cv = t.leaf(Tensor::matrix(1, 2, c_prev.to_vec()).unwrap());
        let (h, c) = lstm_cell(&mut t, &store, xv, hv, cv, &p).unwrap();
        for u in 0..2 {
            assert!((t.value(h).data()[u] - expect_h[u]).abs() < 1e-10);
            assert!((t.value(c).data()[u] - expect_c[u]).abs() < 1e-10);
        }
        let bad = t.leaf(Tensor::zeros(1, 3));
        assert!(matches!(
            lstm_cell(&mut t, &store, xv, bad, cv, &p),
            Err(Error::Shape { op: "lstm_cell", .. })
        ));
    }

    #[test]
    fn bilstm_single_step_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let bi = BiLstm::new(&mut store, "bi", 3, 4, &mut rng).unwrap();
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(1, 3, vec![0.3, -0.2, 0.9]).unwrap());
        let out = bilstm(&mut t, &store, x, &bi).unwrap();
        let zero = t.leaf(Tensor::zeros(1, 4));
        let (hf, _) = lstm_cell(&mut t, &store, x, zero, zero, &bi.forward).unwrap();
        let (hb, _) = lstm_cell(&mut t, &store, x, zero, zero, &bi.backward).unwrap();
        let row = t.value(out).data().to_vec();
        assert_eq!(&row[..4], t.value(hf).data());
        assert_eq!(&row[4..], t.value(hb).data());
    }

    #[test]
    fn bilstm_reversal_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let bi = BiLstm::new(&mut store, "bi", 3, 4, &mut rng).unwrap();
        let swapped = BiLstm {
            forward: bi.backward.clone(),
            backward: bi.forward.clone(),
        };
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();

        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_rows(&rows).unwrap());
        let xr = t.leaf(Tensor::from_rows(&reversed).unwrap());
        let out = bilstm(&mut t, &store, x, &bi).unwrap();
        let out_r = bilstm(&mut t, &store, xr, &swapped).unwrap();
        let (o, orr) = (t.value(out), t.value(out_r));
        for step in 0..5 {
            let a = o.row(step);
            let b = orr.row(4 - step);
            // swapped params on reversed input: halves trade places
            for k in 0..4 {
                assert!((a[k] - b[4 + k]).abs() < 1e-12);
                assert!((a[4 + k] - b[k]).abs() < 1e-12);
            }
        }
    }

    fn highway_with_gate_bias(bias: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let hw = Highway::new(&mut store, "hw", 3, &mut rng).unwrap();
        store.get_mut(hw.gate.bias).tensor.data_mut().fill(bias);
        let mut t = Tape::new();
        let xs = vec![0.5, -1.0, 2.0];
        let x = t.leaf(Tensor::matrix(1, 3, xs.clone()).unwrap());
        let y = highway(&mut t, &store, x, &hw).unwrap();
        let tr = hw.transform.forward(&mut t, &store, x).unwrap();
        let tr = t.relu(tr);
        (xs, t.value(y).data().to_vec(), t.value(tr).data().to_vec())
    }

    #[test]
    fn highway_limits() {
        let (x, y, _) = highway_with_gate_bias(-30.0);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
        let (_, y, tr) = highway_with_gate_bias(30.0);
        assert!(tr.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn attention_single_row_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let att = SelfAttention::new(&mut store, "att", 3, &mut rng).unwrap();
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(1, 3, vec![0.2, 0.4, -0.6]).unwrap());
        let (out, w) = self_attention(&mut t, &store, x, &att).unwrap();
        assert_eq!(t.value(w).data(), &[1.0]);
        let wv = t.param(&store, att.value);
        let v = t.matmul(x, wv).unwrap();
        assert_eq!(t.value(out).data(), t.value(v).data());

        let same = t.leaf(Tensor::from_rows(&[[0.1, 0.2, 0.3]; 4]).unwrap());
        let (_, w) = self_attention(&mut t, &store, same, &att).unwrap();
        assert!(t.value(w).data().iter().all(|&a| (a - 0.25).abs() < 1e-12));
    }
}
