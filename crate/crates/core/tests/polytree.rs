mod common;

use bcond_core::polytree::init_polytree;
use bcond_core::{Evidence, VarId};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_joint_enumeration(seed in 0u64..10_000, k in 0usize..5) {
        let net = small_net(seed, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ev = random_evidence(&net, &mut rng, k);
        let (model, mut state) = init_polytree(&net).unwrap();
        let l = state.absorb(&model, &ev).unwrap();
        let truth = oracle(&net, &ev);
        prop_assert!((l - truth.evidence_probability).abs() < 1e-9);
        for v in net.ids() {
            assert_close(state.belief(v).unwrap(), &truth.marginals[v.0], 1e-9);
        }
    }

    #[test]
    fn evidence_order_and_chain_rule(seed in 0u64..10_000) {
        let net = small_net(seed, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let ev = random_evidence(&net, &mut rng, 4);
        let items: Vec<(VarId, usize)> = ev.iter().collect();
        let (model, init) = init_polytree(&net).unwrap();

        let run = |order: &mut dyn Iterator<Item = &(VarId, usize)>| {
            let mut s = init.clone();
            let mut product = 1.0;
            for &(v, x) in order {
                product *= s.absorb(&model, &Evidence::new().with(v, x)).unwrap();
            }
            (s, product)
        };
        let (fwd, pf) = run(&mut items.iter());
        let (rev, pr) = run(&mut items.iter().rev());
        prop_assert!((pf - pr).abs() <= 1e-12 * pf.max(1e-300) + 1e-15);
        for v in net.ids() {
            assert_close(fwd.belief(v).unwrap(), rev.belief(v).unwrap(), 1e-12);
        }
        let truth = oracle(&net, &ev);
        prop_assert!((pf - truth.evidence_probability).abs() < 1e-9);
    }
}

#[test]
fn ten_node_polytree_priors() {
    use bcond_core::generate::{generate_random, GeneratorParams};
    let net = generate_random(&GeneratorParams::new(10, 3, 3, 0), 3).unwrap();
    let (_, state) = init_polytree(&net).unwrap();
    let truth = oracle(&net, &Evidence::new());
    for v in net.ids() {
        assert_close(state.belief(v).unwrap(), &truth.marginals[v.0], 1e-9);
    }
}

#[test]
fn rejects_loops() {
    let net = bcond_core::fixtures::diamond();
    assert!(init_polytree(&net).is_err());
}
