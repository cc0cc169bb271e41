use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::nnet::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    /// Decoupled (AdamW) weight decay, applied as `w -= lr * wd * w`.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update of every trainable tensor. Running
/// statistics (non-trainable entries) are left alone.
pub fn adam_step(params: &mut ParamStore, grads: &[Array2<f64>], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(grads.len(), params.len(), "one gradient per parameter");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for id in 0..params.len() {
        if !params.is_trainable(id) {
            continue;
        }
        let g = &grads[id];
        let m = &mut state.m[id];
        let v = &mut state.v[id];
        assert_eq!(g.dim(), m.dim(), "gradient shape of {}", params.names()[id]);
        let w = params.value_mut(id);
        ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *w);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn store(w: Array2<f64>) -> ParamStore {
        let mut p = ParamStore::new();
        p.add("w", w, true);
        p.add("stat", arr2(&[[5.0]]), false);
        p
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = store(arr2(&[[0.5, -2.0]]));
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..3 {
            let g = p.zeros_like();
            adam_step(&mut p, &g, &mut st, &cfg);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_each_coordinate_by_lr() {
        let mut p = store(arr2(&[[1.0, 1.0, 1.0]]));
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            lr: 0.01,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let g = vec![arr2(&[[3.0, -0.2, 1e3]]), arr2(&[[7.0]])];
        adam_step(&mut p, &g, &mut st, &cfg);
        let w = p.get("w").unwrap();
        assert!((w[[0, 0]] - 0.99).abs() < 1e-8);
        assert!((w[[0, 1]] - 1.01).abs() < 1e-8);
        assert!((w[[0, 2]] - 0.99).abs() < 1e-8);
        assert_eq!(p.get("stat").unwrap()[[0, 0]], 5.0);
    }

    #[test]
    fn minimises_a_quadratic() {
        // f(w) = |w|^2 from |w0| = 1
        let w0 = arr2(&[[0.6, -0.8]]);
        let mut p = store(w0);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            lr: 0.05,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..200 {
            let w = p.get("w").unwrap();
            let g = vec![w * 2.0, arr2(&[[0.0]])];
            adam_step(&mut p, &g, &mut st, &cfg);
        }
        let norm = p.get("w").unwrap().mapv(|x| x * x).sum().sqrt();
        assert!(norm < 1e-3, "{norm}");
    }

    #[test]
    fn decay_is_decoupled_from_the_gradient_scale() {
        let mut p = store(arr2(&[[2.0]]));
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let g = p.zeros_like();
        adam_step(&mut p, &g, &mut st, &cfg);
        assert!((p.get("w").unwrap()[[0, 0]] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }
}
