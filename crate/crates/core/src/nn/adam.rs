use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update, in place.
///
/// Non-finite gradients are rejected before anything is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("gradient entry {i} is not finite")));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut st = AdamState::new(2, AdamConfig::default());
        let mut p = vec![1.0, -2.0];
        adam_step(&mut p, &[0.5, -0.5], &mut st).unwrap();
        let (m0, v0) = (st.m.clone(), st.v.clone());
        let before = p.clone();
        adam_step(&mut p, &[0.0, 0.0], &mut st).unwrap();
        // Decayed moments still push, but a fresh state with zero grads
        // must not move.
        assert!(st.m.iter().zip(&m0).all(|(a, b)| a.abs() < b.abs()));
        assert!(st.v.iter().zip(&v0).all(|(a, b)| a < b));
        assert_ne!(p, before);

        let mut fresh = AdamState::new(2, AdamConfig::default());
        let mut q = vec![1.0, -2.0];
        adam_step(&mut q, &[0.0, 0.0], &mut fresh).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
        assert_eq!(fresh.m, vec![0.0, 0.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.02, 1e-3] {
            let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
            let mut st = AdamState::new(1, cfg);
            let mut p = vec![0.5];
            adam_step(&mut p, &[g], &mut st).unwrap();
            let expected = 0.5 - 0.01 * g.signum();
            assert!((p[0] - expected).abs() < 0.01 * cfg.eps / g.abs() * 2.0 + 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut st = AdamState::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        assert!(matches!(adam_step(&mut p, &[f64::NAN], &mut st), Err(Error::Numeric(_))));
        assert_eq!(st.step, 0);
    }

    #[test]
    fn identical_gradient_streams_give_identical_trajectories() {
        let run = || {
            let mut st = AdamState::new(3, AdamConfig::default());
            let mut p = vec![0.1, 0.2, 0.3];
            for k in 0..50 {
                let g: Vec<f64> = (0..3).map(|i| ((k * 3 + i) as f64).sin()).collect();
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
