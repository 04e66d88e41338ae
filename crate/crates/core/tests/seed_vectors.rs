//! Frozen first outputs of derived streams. A change here changes every
//! shard ever written.

use plaque_engine::rng::derive_rng;
use rand::RngCore;
use serde::Deserialize;

#[derive(Deserialize)]
struct Vector {
    master_seed: u64,
    stream_id: String,
    index: u64,
    first_outputs: Vec<String>,
}

#[test]
fn derived_streams_match_fixture() {
    let vectors: Vec<Vector> = serde_json::from_str(include_str!("fixtures/seed_vectors.json")).unwrap();
    assert!(!vectors.is_empty());
    for v in vectors {
        let mut r = derive_rng(v.master_seed, &v.stream_id, v.index);
        for (k, want) in v.first_outputs.iter().enumerate() {
            let want = u64::from_str_radix(want.trim_start_matches("0x"), 16).unwrap();
            assert_eq!(r.next_u64(), want, "{}/{}/{} output {k}", v.master_seed, v.stream_id, v.index);
        }
    }
}
