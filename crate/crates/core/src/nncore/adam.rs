use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Moment estimates and hyperparameters for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, p)| p.tensor.map(|_| 0.0)).collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            learning_rate,
        }
    }
}

/// Applies one Adam update using the gradients stored on each parameter.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    if state.first_moment.len() != store.len() || state.second_moment.len() != store.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "optimizer tracks {} parameters, store has {}",
                state.first_moment.len(),
                store.len()
            ),
        ));
    }
    for (p, m) in store.params_mut().iter().zip(&state.first_moment) {
        if p.tensor.shape() != m.shape() || p.gradient.shape() != m.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("parameter {:?} is {:?}, moment is {:?}", p.name, p.tensor.shape(), m.shape()),
            ));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, m), v) in store
        .params_mut()
        .iter_mut()
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        let g = p.gradient.data();
        let w = p.tensor.data_mut();
        for (k, &gk) in g.iter().enumerate() {
            let mk = &mut m.data_mut()[k];
            *mk = b1 * *mk + (1.0 - b1) * gk;
            let vk = &mut v.data_mut()[k];
            *vk = b2 * *vk + (1.0 - b2) * gk * gk;
            let m_hat = *mk / c1;
            let v_hat = *vk / c2;
            w[k] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
