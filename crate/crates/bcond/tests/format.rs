use bcond::format::{parse_network, serialize_network};
use bcond_core::generate::{generate_random, GeneratorParams};

#[test]
fn generated_networks_round_trip() {
    for seed in 0..100u64 {
        let params = GeneratorParams::new(4 + (seed % 20) as usize, 3, 3, (seed % 4) as usize);
        let net = generate_random(&params, seed).unwrap();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net, "seed {seed}");
        assert_eq!(serialize_network(&back), text);
    }
}
