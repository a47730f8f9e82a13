mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use common::{mutate_archive, reseal};
use vapsr::io::archive::{decode, encode};
use vapsr::io::{load_weights, save_weights};
use vapsr::model::presets;
use vapsr::{Network, Tensor};

#[test]
fn fuzzed_archives_never_panic() {
    let net = Network::<f32>::init(presets::tiny(), 4).unwrap();
    let original = encode(net.config(), net.params());
    let mut rng = common::rng(0xF022);
    let (mut errors, mut decoded, mut panics, mut past_crc) = (0, 0, 0, 0);
    for i in 0..10_000 {
        let mut b = mutate_archive(&mut rng, &original);
        if i % 2 == 0 {
            reseal(&mut b);
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| match decode(&b) {
            Ok(archive) => {
                let _ = archive.into_network(None);
                true
            }
            Err(e) => {
                assert!(!e.to_string().is_empty());
                false
            }
        }));
        match outcome {
            Ok(true) => decoded += 1,
            Ok(false) => errors += 1,
            Err(_) => panics += 1,
        }
        if i % 2 == 0 && !matches!(decode(&b), Err(vapsr::io::ArchiveError::CrcMismatch { .. })) {
            past_crc += 1;
        }
    }
    println!("fuzz: {errors} errors, {decoded} decoded, {panics} panics, {past_crc} resealed past crc");
    assert_eq!(panics, 0);
    assert_eq!(errors + decoded, 10_000);
    assert!(past_crc > 4_000, "resealed mutations should reach the parser");
}

#[test]
fn unmutated_archive_round_trips_bitwise() {
    let net = Network::<f32>::init(presets::vapsr_s(), 2).unwrap();
    let bytes = encode(net.config(), net.params());
    let back = decode(&bytes).unwrap();
    assert_eq!(encode(&back.config, &back.tensors), bytes);
    for ((na, a), (nb, b)) in net.params().iter().zip(back.tensors.iter()) {
        assert_eq!(na, nb);
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn saved_network_reproduces_forward_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.vapw");
    let net = Network::<f32>::init(presets::tiny(), 11).unwrap();
    save_weights(&path, &net).unwrap();
    let loaded = load_weights(&path, Some(net.config())).unwrap();
    let x = Tensor::from_fn((1, 3, 6, 5), |i| (i % 23) as f32 / 23.0).unwrap();
    let (a, b) = (net.forward(&x).unwrap(), loaded.forward(&x).unwrap());
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert!(load_weights(&path, Some(&presets::vapsr_s())).is_err());
}
