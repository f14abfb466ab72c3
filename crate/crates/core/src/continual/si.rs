use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running path integral of `-g . dtheta` per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiAccumulator {
    pub omega: Vec<f64>,
    pub theta_prev: Vec<f64>,
    pub task_start_theta: Vec<f64>,
}

/// Importance `omega_cap` and anchor `theta_star` of one finished task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiRegularizer {
    pub omega_cap: Vec<f64>,
    pub theta_star: Vec<f64>,
}

impl SiAccumulator {
    /// Fresh accumulator anchored at `theta`.
    pub fn new(theta: &[f64]) -> Self {
        SiAccumulator {
            omega: vec![0.0; theta.len()],
            theta_prev: theta.to_vec(),
            task_start_theta: theta.to_vec(),
        }
    }

    /// In-place `omega += (-grads) * (theta_new - theta_prev)`.
    pub fn accumulate(&mut self, grads: &[f64], theta_new: &[f64]) -> Result<()> {
        let n = self.omega.len();
        if grads.len() != n || theta_new.len() != n {
            return Err(Error::config(format!(
                "SI accumulator has {n} entries, got gradient {} and parameters {}",
                grads.len(),
                theta_new.len()
            )));
        }
        for i in 0..n {
            self.omega[i] += -grads[i] * (theta_new[i] - self.theta_prev[i]);
        }
        self.theta_prev.copy_from_slice(theta_new);
        Ok(())
    }
}

pub fn si_accumulate(acc: &SiAccumulator, grads: &[f64], theta_new: &[f64]) -> Result<SiAccumulator> {
    let mut out = acc.clone();
    out.accumulate(grads, theta_new)?;
    Ok(out)
}

/// `Omega = max(0, omega) / ((theta_end - theta_start)^2 + xi)`.
pub fn compute_si(acc: &SiAccumulator, theta_end: &[f64], xi: f64) -> Result<SiRegularizer> {
    if !(xi > 0.0) {
        return Err(Error::config("SI damping xi must be > 0"));
    }
    if theta_end.len() != acc.omega.len() {
        return Err(Error::config(format!(
            "SI accumulator has {} entries, parameters have {}",
            acc.omega.len(),
            theta_end.len()
        )));
    }
    let omega_cap = acc
        .omega
        .iter()
        .zip(theta_end.iter().zip(&acc.task_start_theta))
        .map(|(w, (e, s))| w.max(0.0) / ((e - s) * (e - s) + xi))
        .collect();
    Ok(SiRegularizer {
        omega_cap,
        theta_star: theta_end.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_omega() {
        let acc = SiAccumulator::new(&[1.0, 2.0]);
        let out = si_accumulate(&acc, &[0.0, 0.0], &[0.5, 3.0]).unwrap();
        assert_eq!(out.omega, vec![0.0, 0.0]);
        assert_eq!(out.theta_prev, vec![0.5, 3.0]);
    }

    #[test]
    fn single_increment() {
        let acc = SiAccumulator::new(&[0.0]);
        let out = si_accumulate(&acc, &[1.0], &[-0.1]).unwrap();
        assert!((out.omega[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn descent_on_quadratic_is_positive() {
        let mut acc = SiAccumulator::new(&[1.0, -2.0]);
        let mut th = vec![1.0, -2.0];
        for _ in 0..50 {
            let g = th.clone();
            th = th.iter().map(|x| x - 0.1 * x).collect();
            acc.accumulate(&g, &th).unwrap();
        }
        assert!(acc.omega.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn importance_values() {
        let acc = SiAccumulator {
            omega: vec![1.0, 0.0, -3.0],
            theta_prev: vec![0.0; 3],
            task_start_theta: vec![0.0; 3],
        };
        let r = compute_si(&acc, &[1.0, 5.0, 1.0], 0.1).unwrap();
        assert!((r.omega_cap[0] - 1.0 / 1.1).abs() < 1e-12);
        assert_eq!(r.omega_cap[1], 0.0);
        assert_eq!(r.omega_cap[2], 0.0);
        assert_eq!(r.theta_star, vec![1.0, 5.0, 1.0]);
    }

    #[test]
    fn layout_mismatch_is_config_error() {
        let acc = SiAccumulator::new(&[0.0, 0.0]);
        assert!(matches!(si_accumulate(&acc, &[1.0], &[0.0, 0.0]), Err(Error::Config(_))));
        assert!(compute_si(&acc, &[0.0], 0.1).is_err());
        assert!(compute_si(&acc, &[0.0, 0.0], 0.0).is_err());
    }
}
