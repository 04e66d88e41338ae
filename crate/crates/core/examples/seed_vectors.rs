//! Prints the first outputs of a few derived streams as JSON.

use plaque_engine::rng::derive_rng;
use rand::RngCore;

fn main() {
    let mut rows = Vec::new();
    for (seed, stream, index) in [(0u64, "patch", 0u64), (0, "patch", 1), (42, "phantom-vessel", 3), (7, "bootstrap", 0)] {
        let mut r = derive_rng(seed, stream, index);
        let out: Vec<String> = (0..4).map(|_| format!("{:#018x}", r.next_u64())).collect();
        rows.push(serde_json::json!({"master_seed": seed, "stream_id": stream, "index": index, "first_outputs": out}));
    }
    println!("{}", serde_json::to_string_pretty(&rows).unwrap());
}
