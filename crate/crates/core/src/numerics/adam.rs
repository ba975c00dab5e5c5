use super::{NumericsError, Tensor};

/// Adam hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Result<Self, NumericsError> {
        let cfg = AdamConfig {
            lr,
            ..AdamConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(NumericsError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NumericsError::Config(format!(
                "betas must lie in [0, 1), got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(NumericsError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
}

impl AdamState {
    pub fn for_params<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (first, second) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.rows(), p.cols()), Tensor::zeros(p.rows(), p.cols())))
            .unzip();
        AdamState { step: 0, first, second }
    }
}

/// One bias-corrected Adam update, applied in place.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    cfg: &AdamConfig,
    state: &mut AdamState,
) -> Result<(), NumericsError> {
    cfg.validate()?;
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(NumericsError::Config(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(NumericsError::shape("adam_step", p.shape(), g.shape()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].values();
        let m = state.first[i].values_mut();
        let v = state.second[i].values_mut();
        for (k, w) in p.values_mut().iter_mut().enumerate() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
