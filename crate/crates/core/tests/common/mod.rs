#![allow(dead_code)]

use bcond_core::generate::{generate_random, GeneratorParams};
use bcond_core::oracle::{enumerate_posteriors, Enumeration, DEFAULT_JOINT_CAP};
use bcond_core::{BeliefNetwork, BoundSnapshot, Evidence, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random network small enough for the oracle: 6 to 15 nodes, joint at most 2^20.
pub fn small_net(seed: u64, loops: usize) -> BeliefNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let nodes = rng.gen_range(6..=15);
    let states = if nodes <= 12 { 3 } else { 2 };
    let params = GeneratorParams::new(nodes, 3, states, loops);
    let net = generate_random(&params, seed).unwrap();
    assert!(net.joint_size().unwrap() <= 1 << 20);
    net
}

/// `count` distinct observed variables with random states.
pub fn random_evidence(net: &BeliefNetwork, rng: &mut ChaCha8Rng, count: usize) -> Evidence {
    let mut ev = Evidence::new();
    while ev.len() < count.min(net.len()) {
        let v = VarId(rng.gen_range(0..net.len()));
        if ev.get(v).is_none() {
            ev = ev.with(v, rng.gen_range(0..net.cardinality(v)));
        }
    }
    ev
}

pub fn oracle(net: &BeliefNetwork, ev: &Evidence) -> Enumeration {
    enumerate_posteriors(net, ev, DEFAULT_JOINT_CAP).unwrap()
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

/// Every tracked interval contains the oracle marginal.
pub fn sound(snap: &BoundSnapshot, truth: &Enumeration, tol: f64) -> bool {
    snap.tracked().all(|(v, iv)| {
        iv.iter()
            .zip(&truth.marginals[v.0])
            .all(|(i, &p)| i.contains(p, tol))
    })
}
