//! Central finite-difference verification of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::{bilstm, highway, lstm_cell, self_attention, BiLstm, Highway, LstmParams, SelfAttention};
use super::{Axis, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Largest relative error `|a − n| / max(1, |a|, |n|)` between tape
/// gradients and central differences over every coordinate of every
/// parameter in `store`. `f` must build a `1 × 1` output.
pub fn grad_check<F>(store: &mut ParamStore, h: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::Precondition(format!(
            "finite-difference step {h} outside [1e-6, 1e-3]"
        )));
    }
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let grads = tape.backward(out)?;
    store.zero_grad();
    grads.accumulate_into(&tape, store);

    let ids: Vec<ParamId> = store.iter().map(|(id, _)| id).collect();
    let mut eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let o = f(&mut t, s)?;
        Ok(t.scalar(o))
    };
    let mut worst: f64 = 0.0;
    for id in ids {
        for k in 0..store.get(id).tensor.len() {
            let orig = store.get(id).tensor.data()[k];
            store.get_mut(id).tensor.data_mut()[k] = orig + h;
            let plus = eval(store)?;
            store.get_mut(id).tensor.data_mut()[k] = orig - h;
            let minus = eval(store)?;
            store.get_mut(id).tensor.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = store.get(id).gradient.data()[k];
            let err = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
}

fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect())
        .expect("positive dims")
}

/// `sum(y ⊙ W)` for a fixed random `W`, so every output entry gets a
/// distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(y).dims("weighted_sum")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = tape.leaf(random_tensor(&mut rng, r, c, 1.0));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

type Builder = Box<dyn FnMut(&mut Tape, &ParamStore) -> Result<Var>>;

fn case(
    name: &str,
    seed: u64,
    h: f64,
    setup: impl FnOnce(&mut ParamStore, &mut ChaCha8Rng) -> Result<Builder>,
) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let f = setup(&mut store, &mut rng)?;
    let max_rel_error = grad_check(&mut store, h, f)?;
    Ok(CheckResult {
        name: name.to_string(),
        max_rel_error,
    })
}

fn input(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, r: usize, c: usize) -> Result<ParamId> {
    store.add(name, random_tensor(rng, r, c, 1.0))
}

/// Finite-difference checks of every primitive and composite layer on
/// random small shapes drawn from `seed`.
pub fn primitive_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let h = 1e-5;
    let mut dims = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919));
    let (r, k, c) = (
        dims.gen_range(1..=4usize),
        dims.gen_range(1..=4usize),
        dims.gen_range(1..=4usize),
    );
    let s = seed;
    let mut out = Vec::new();

    out.push(case("matmul", s, h, |st, rng| {
        let a = input(st, rng, "a", r, k)?;
        let b = input(st, rng, "b", k, c)?;
        Ok(Box::new(move |t, st| {
            let (a, b) = (t.param(st, a), t.param(st, b));
            let y = t.matmul(a, b)?;
            weighted_sum(t, y, s)
        }))
    })?);
    for (name, op) in [("add", 0), ("sub", 1), ("mul", 2)] {
        out.push(case(name, s, h, |st, rng| {
            let a = input(st, rng, "a", r, c)?;
            let b = input(st, rng, "b", r, c)?;
            Ok(Box::new(move |t, st| {
                let (a, b) = (t.param(st, a), t.param(st, b));
                let y = match op {
                    0 => t.add(a, b)?,
                    1 => t.sub(a, b)?,
                    _ => t.mul(a, b)?,
                };
                weighted_sum(t, y, s)
            }))
        })?);
    }
    out.push(case("add_row_broadcast", s, h, |st, rng| {
        let a = input(st, rng, "a", r, c)?;
        let b = input(st, rng, "b", 1, c)?;
        Ok(Box::new(move |t, st| {
            let (a, b) = (t.param(st, a), t.param(st, b));
            let y = t.add(a, b)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("scale", s, h, |st, rng| {
        let a = input(st, rng, "a", r, c)?;
        Ok(Box::new(move |t, st| {
            let a = t.param(st, a);
            let y = t.scale(a, -1.7);
            weighted_sum(t, y, s)
        }))
    })?);
    for (name, axis) in [("concat_rows", Axis::Rows), ("concat_cols", Axis::Cols)] {
        out.push(case(name, s, h, |st, rng| {
            let a = input(st, rng, "a", r, c)?;
            let b = input(st, rng, "b", r, c)?;
            Ok(Box::new(move |t, st| {
                let (a, b) = (t.param(st, a), t.param(st, b));
                let y = t.concat(&[a, b, a], axis)?;
                weighted_sum(t, y, s)
            }))
        })?);
    }
    out.push(case("slice_cols", s, h, |st, rng| {
        let a = input(st, rng, "a", r, c + 2)?;
        Ok(Box::new(move |t, st| {
            let a = t.param(st, a);
            let y = t.slice_cols(a, 1, c + 1)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("select_rows", s, h, |st, rng| {
        let a = input(st, rng, "a", r, c)?;
        let rows: Vec<usize> = (0..r + 2).map(|i| (i * 3) % r).collect();
        Ok(Box::new(move |t, st| {
            let a = t.param(st, a);
            let y = t.select_rows(a, &rows)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("embedding_lookup", s, h, |st, rng| {
        let table = input(st, rng, "table", 5, c)?;
        Ok(Box::new(move |t, st| {
            let table = t.param(st, table);
            let y = t.embedding_lookup(table, &[4, 0, 4, 2])?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("transpose", s, h, |st, rng| {
        let a = input(st, rng, "a", r, c)?;
        Ok(Box::new(move |t, st| {
            let a = t.param(st, a);
            let y = t.transpose(a)?;
            weighted_sum(t, y, s)
        }))
    })?);
    for (name, op) in [("tanh", 0), ("relu", 1), ("sigmoid", 2)] {
        out.push(case(name, s, h, |st, rng| {
            let a = input(st, rng, "a", r, c)?;
            Ok(Box::new(move |t, st| {
                let a = t.param(st, a);
                let y = match op {
                    0 => t.tanh(a),
                    1 => t.relu(a),
                    _ => t.sigmoid(a),
                };
                weighted_sum(t, y, s)
            }))
        })?);
    }
    for (name, axis) in [("softmax_cols", Axis::Cols), ("softmax_rows", Axis::Rows)] {
        out.push(case(name, s, h, |st, rng| {
            let a = input(st, rng, "a", r, c.max(2))?;
            Ok(Box::new(move |t, st| {
                let a = t.param(st, a);
                let y = t.softmax(a, axis)?;
                weighted_sum(t, y, s)
            }))
        })?);
    }
    out.push(case("dropout", s, h, |st, rng| {
        let a = input(st, rng, "a", r + 2, c + 2)?;
        Ok(Box::new(move |t, st| {
            let a = t.param(st, a);
            // same mask on every evaluation
            let mut mask_rng = ChaCha8Rng::seed_from_u64(s);
            let y = t.dropout(a, 0.3, true, &mut mask_rng)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("bce_loss", s, h, |st, rng| {
        let z = input(st, rng, "z", r, 1)?;
        let target: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..1.0)).collect();
        Ok(Box::new(move |t, st| {
            let z = t.param(st, z);
            let p = t.sigmoid(z);
            t.bce_loss(p, &target)
        }))
    })?);
    out.push(case("kld_loss", s, h, |st, rng| {
        let z = input(st, rng, "z", r, 2)?;
        let rows: Vec<[f64; 2]> = (0..r)
            .map(|_| {
                let p = rng.gen_range(0.0..1.0);
                [1.0 - p, p]
            })
            .collect();
        let target = Tensor::from_rows(&rows)?;
        Ok(Box::new(move |t, st| {
            let z = t.param(st, z);
            let p = t.softmax(z, Axis::Cols)?;
            t.kld_loss(p, &target)
        }))
    })?);
    out.push(case("lstm_cell", s, h, |st, rng| {
        let (b, d, hid) = (r, k + 1, c + 1);
        let x = input(st, rng, "x", b, d)?;
        let h0 = input(st, rng, "h0", b, hid)?;
        let c0 = input(st, rng, "c0", b, hid)?;
        let p = LstmParams::new(st, "cell", d, hid, rng)?;
        randomize_biases(st, rng);
        Ok(Box::new(move |t, st| {
            let (x, h0, c0) = (t.param(st, x), t.param(st, h0), t.param(st, c0));
            let (hn, cn) = lstm_cell(t, st, x, h0, c0, &p)?;
            let both = t.concat(&[hn, cn], Axis::Cols)?;
            weighted_sum(t, both, s)
        }))
    })?);
    out.push(case("bilstm", s, h, |st, rng| {
        let x = input(st, rng, "x", 3, 4)?;
        let bi = BiLstm::new(st, "bi", 4, 5, rng)?;
        randomize_biases(st, rng);
        Ok(Box::new(move |t, st| {
            let x = t.param(st, x);
            let y = bilstm(t, st, x, &bi)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("highway", s, h, |st, rng| {
        let x = input(st, rng, "x", r, c + 1)?;
        let hw = Highway::new(st, "hw", c + 1, rng)?;
        randomize_biases(st, rng);
        Ok(Box::new(move |t, st| {
            let x = t.param(st, x);
            let y = highway(t, st, x, &hw)?;
            weighted_sum(t, y, s)
        }))
    })?);
    out.push(case("self_attention", s, h, |st, rng| {
        let x = input(st, rng, "x", 3, 4)?;
        let att = SelfAttention::new(st, "att", 4, rng)?;
        Ok(Box::new(move |t, st| {
            let x = t.param(st, x);
            let (y, _) = self_attention(t, st, x, &att)?;
            weighted_sum(t, y, s)
        }))
    })?);
    Ok(out)
}

/// Biases start at zero; give them random values so the check does not sit
/// on a symmetric point.
fn randomize_biases(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<ParamId> = store
        .iter()
        .filter(|(_, p)| p.name.ends_with("bias"))
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        for v in store.get_mut(id).tensor.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}
