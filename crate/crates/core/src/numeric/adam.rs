use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};

/// Moment estimates for bias-corrected Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// In-place update. Entries whose gradient is exactly zero keep their
    /// value, so a zero gradient leaves the parameters untouched from any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::config(format!(
                "adam shape mismatch: params {}, grads {}, state {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be >= 0, got {lr}")));
        }
        ensure_all_finite("adam gradient", grads)?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if g != 0.0 {
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameters and state.
pub fn adam_step(
    params: &[f64],
    grads: &[f64],
    state: &AdamState,
    lr: f64,
) -> Result<(Vec<f64>, AdamState)> {
    let mut p = params.to_vec();
    let mut s = state.clone();
    s.step(&mut p, grads, lr)?;
    Ok((p, s))
}

/// Cosine decay from `base` at step 0 toward 0 at step `total`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let x = (step.min(total) as f64) / total as f64;
    0.5 * base * (1.0 + (std::f64::consts::PI * x).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.1, 0, 10), 0.1);
        assert!((cosine_lr(0.1, 5, 10) - 0.05).abs() < 1e-15);
        assert!(cosine_lr(0.1, 10, 10).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_fresh_state_is_identity() {
        let (p, s) = adam_step(&[1.0, -2.0], &[0.0, 0.0], &AdamState::new(2), 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; step = lr * 1 / (1 + 1e-8)
        let (p, s) = adam_step(&[0.0], &[1.0], &AdamState::new(1), 0.001).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.001).abs() < 1e-9);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn constant_gradient_keeps_descending() {
        let (p1, s1) = adam_step(&[0.0], &[1.0], &AdamState::new(1), 0.01).unwrap();
        let (p2, s2) = adam_step(&p1, &[1.0], &s1, 0.01).unwrap();
        assert!(p1[0] < 0.0);
        assert!(p2[0] < p1[0]);
        assert_eq!(s2.t, 2);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        assert!(matches!(
            adam_step(&[0.0, 1.0], &[1.0], &AdamState::new(2), 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let (p, _) = adam_step(&[0.3, 0.4], &[1.0, -1.0], &AdamState::new(2), 0.0).unwrap();
        assert_eq!(p, vec![0.3, 0.4]);
    }

    #[test]
    fn non_finite_gradient_is_numerical_error() {
        assert!(matches!(
            adam_step(&[0.0], &[f64::NAN], &AdamState::new(1), 0.1),
            Err(Error::Numerical { .. })
        ));
    }
}
