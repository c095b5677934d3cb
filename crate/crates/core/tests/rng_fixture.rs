use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simta::numerics::Rng;

const FIXTURE: &str = include_str!("fixtures/rng_seed42.txt");

#[test]
fn first_hundred_draws_are_stable() {
    let expected: Vec<u64> = FIXTURE.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(expected.len(), 100);
    let mut rng = Rng::new(42);
    let got: Vec<u64> = (0..100).map(|_| rng.next_u64()).collect();
    assert_eq!(got, expected);
}

#[test]
fn stream_is_plain_chacha8() {
    let mut reference = ChaCha8Rng::seed_from_u64(42);
    let expected: Vec<u64> = FIXTURE.lines().map(|l| l.parse().unwrap()).collect();
    for e in expected {
        assert_eq!(reference.next_u64(), e);
    }
}

#[test]
fn derived_streams_differ() {
    let a: Vec<u64> = (0..8)
        .map({
            let mut r = Rng::derive(42, 1);
            move |_| r.next_u64()
        })
        .collect();
    let b: Vec<u64> = (0..8)
        .map({
            let mut r = Rng::derive(42, 2);
            move |_| r.next_u64()
        })
        .collect();
    assert_ne!(a, b);
}
