use proptest::prelude::*;

use progress_crl::continual::{compute_si, sample_coreset, update_coreset, Coreset, SiAccumulator};
use progress_crl::numeric::RngKey;
use progress_crl::policy::RolloutBatch;
use progress_crl::tasks::Observation;

fn batch(adv: &[f64], n_envs: usize) -> RolloutBatch {
    let n = adv.len();
    let horizon = n / n_envs;
    RolloutBatch {
        n_envs,
        horizon,
        obs: (0..n).map(|k| Observation([k as f64; 8])).collect(),
        final_obs: vec![Observation([0.0; 8]); n_envs],
        actions: vec![[0.0, 0.0]; n],
        log_probs: vec![0.0; n],
        shaped_rewards: vec![0.0; n],
        values: vec![0.0; n],
        dones: vec![false; n],
        successes: vec![false; n],
        potentials: vec![0.0; n_envs * (horizon + 1)],
        bootstrap_values: vec![0.0; n_envs],
        advantages: adv.to_vec(),
        returns: vec![0.0; n],
    }
}

#[test]
fn path_integral_matches_loss_drop_on_quadratic() {
    let theta0 = 1.0;
    let mut theta = vec![theta0];
    let mut acc = SiAccumulator::new(&theta);
    for _ in 0..2000 {
        let g = theta.clone();
        theta = vec![theta[0] - 0.01 * g[0]];
        acc.accumulate(&g, &theta).unwrap();
    }
    let drop = 0.5 * theta0 * theta0 - 0.5 * theta[0] * theta[0];
    assert!((acc.omega[0] - 0.5).abs() < 0.025, "omega {}", acc.omega[0]);
    assert!((acc.omega[0] - drop).abs() / drop < 0.05);
}

#[test]
fn importance_example() {
    let acc = SiAccumulator {
        omega: vec![1.0, 0.0],
        theta_prev: vec![1.0, 0.0],
        task_start_theta: vec![0.0, 0.0],
    };
    let r = compute_si(&acc, &[1.0, 0.0], 0.1).unwrap();
    assert!((r.omega_cap[0] - 0.9091).abs() < 1e-4);
    assert_eq!(r.omega_cap[1], 0.0);
}

proptest! {
    #[test]
    fn importance_is_nonnegative(
        omega in prop::collection::vec(-10.0f64..10.0, 1..20),
        shift in -3.0f64..3.0,
        xi in 1e-3f64..1.0,
    ) {
        let n = omega.len();
        let acc = SiAccumulator { omega, theta_prev: vec![0.0; n], task_start_theta: vec![0.0; n] };
        let end: Vec<f64> = (0..n).map(|i| shift * i as f64).collect();
        let r = compute_si(&acc, &end, xi).unwrap();
        prop_assert!(r.omega_cap.iter().all(|w| *w >= 0.0 && w.is_finite()));
    }

    #[test]
    fn capacity_bound_after_every_update(
        advs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 12), 1..6),
        cap in 1usize..20,
        tasks in prop::collection::vec(0usize..4, 1..8),
    ) {
        let batches: Vec<RolloutBatch> = advs.iter().map(|a| batch(a, 3)).collect();
        let mut m = Coreset::new(cap);
        let mut seen = std::collections::BTreeSet::new();
        for t in tasks {
            let id = format!("task{t}");
            m = update_coreset(&m, &batches, &id, 10).unwrap();
            seen.insert(id);
            for id in &seen {
                prop_assert!(m.count(id) <= cap);
            }
            prop_assert!(m.len() <= cap * seen.len());
            prop_assert!(m.entries.iter().all(|e| e.advantage > 0.0));
        }
        let s = sample_coreset(&m, RngKey::from_seed(7), 12);
        prop_assert_eq!(s.len(), if m.is_empty() { 0 } else { 12 });
    }
}
