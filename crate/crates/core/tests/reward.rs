mod common;

use progress_crl::numeric::{AdamState, MlpParams, RngKey};
use progress_crl::reward::*;
use progress_crl::tasks::Observation;

fn random_obs(s: &mut progress_crl::numeric::KeyStream) -> Observation {
    let mut o = [0.0; 8];
    for v in o.iter_mut() {
        *v = s.uniform_range(-1.0, 1.0);
    }
    Observation(o)
}

fn random_triplets(seed: u64, n: usize) -> Vec<Triplet> {
    let mut s = RngKey::from_seed(seed).stream();
    (0..n)
        .map(|_| Triplet {
            o_i: random_obs(&mut s),
            o_j: random_obs(&mut s),
            o_g: random_obs(&mut s),
            delta: s.uniform(),
        })
        .collect()
}

#[test]
fn loss_gradients_match_finite_differences() {
    let dims = [TRIPLET_WIDTH, 6, 2];
    for inst in 0..5u64 {
        let model = ProgressModel::from_net(MlpParams::init(&dims, RngKey::from_seed(inst)).unwrap()).unwrap();
        assert!(model.num_params() <= 200);
        let e = random_triplets(100 + inst, 7);
        let a = random_triplets(200 + inst, 5);
        for reverse in [false, true] {
            let hyper = RewardHyper {
                expert_kl_model_first: reverse,
                ..Default::default()
            };
            for term in [RewardTerm::Expert, RewardTerm::Push, RewardTerm::Joint] {
                let obj = RewardObjective {
                    dims: &dims,
                    norm: ObsNorm::default(),
                    term,
                    expert: &e,
                    agent: &a,
                    hyper: &hyper,
                };
                let err = common::gradient_check(&obj, model.net.as_slice());
                assert!(err < 1e-4, "{term:?} reverse={reverse}: {err}");
            }
        }
    }
}

#[test]
fn synthetic_fit_reduces_expert_loss_tenfold() {
    // delta is a smooth function of the inputs, so the fit can drive the loss down.
    let mut ts = random_triplets(7, 512);
    for t in ts.iter_mut() {
        t.delta = 0.5 + 0.4 * (t.o_j.0[0] - t.o_i.0[0]) / 2.0;
    }
    let hyper = RewardHyper::default();
    let mut model = ProgressModel::new(&[32], RngKey::from_seed(1)).unwrap();
    let mut adam = AdamState::new(model.num_params());
    let initial = expert_loss(&model, &ts, &hyper).unwrap();
    for _ in 0..500 {
        let (m, a, _) = update_reward_model(&model, &adam, &ts, &[], &hyper, 3e-3).unwrap();
        model = m;
        adam = a;
    }
    let last = expert_loss(&model, &ts, &hyper).unwrap();
    assert!(initial / last >= 10.0, "{initial} -> {last}");
}

#[test]
fn untrained_model_has_zero_potential() {
    let model = ProgressModel::new(&[16, 16], RngKey::from_seed(9)).unwrap();
    for t in random_triplets(4, 20) {
        assert_eq!(potential(&model, &t.o_i, &t.o_j, &t.o_g), 0.0);
    }
}

#[test]
fn non_finite_model_is_numerical_error() {
    let mut net = MlpParams::zeros(&[TRIPLET_WIDTH, 2]).unwrap();
    net.as_mut_slice()[0] = f64::NAN;
    let model = ProgressModel::from_net(net).unwrap();
    let ts = random_triplets(3, 4);
    let hyper = RewardHyper::default();
    let adam = AdamState::new(model.num_params());
    assert!(update_reward_model(&model, &adam, &ts, &[], &hyper, 1e-3).is_err());
}
