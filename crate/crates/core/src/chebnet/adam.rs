use super::{ChebModel, Gradients, TrainConfig};

/// First and second moment estimates, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &ChebModel) -> Self {
        Self {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Weight decay is added to the weight
/// gradients as an L2 term; biases are not decayed.
pub fn adam_step(model: &mut ChebModel, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    };
    for (i, layer) in model.layers.iter_mut().enumerate() {
        ndarray::Zip::from(&mut layer.theta)
            .and(&grads.theta[i])
            .and(&mut state.m.theta[i])
            .and(&mut state.v.theta[i])
            .for_each(|p, &g, m, v| {
                let g = g + cfg.weight_decay * *p;
                update(p, g, m, v)
            });
        ndarray::Zip::from(&mut layer.bias)
            .and(&grads.bias[i])
            .and(&mut state.m.bias[i])
            .and(&mut state.v.bias[i])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
}
