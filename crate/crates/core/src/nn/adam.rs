use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Adaptive-moment optimizer for one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    pub state: AdamState<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub t: u64,
}

impl<S: Real> Adam<S> {
    pub fn new(n: usize, lr: S) -> Self {
        Self {
            lr,
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            eps: S::lit(1e-8),
            state: AdamState { m: vec![S::zero(); n], v: vec![S::zero(); n], t: 0 },
        }
    }

    pub fn step(&mut self, params: &mut [S], grads: &[S]) {
        let st = &mut self.state;
        st.t += 1;
        let t = st.t as i32;
        let c1 = S::one() - self.beta1.powi(t);
        let c2 = S::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            st.m[i] = self.beta1 * st.m[i] + (S::one() - self.beta1) * g;
            st.v[i] = self.beta2 * st.v[i] + (S::one() - self.beta2) * g * g;
            let mh = st.m[i] / c1;
            let vh = st.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
