//! Regenerates the bundled catalogs under `data/catalogs/`.

use simmc_core::catalog::{synth, Domain};

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/catalogs");
    for d in Domain::ALL {
        let doc = synth::synthesize(d, synth::default_count(d), synth::DEFAULT_SEED);
        let text = simmc_core::canonical::to_canonical_string(&doc).expect("serializable");
        std::fs::write(dir.join(format!("{d}.json")), text).expect("writable data dir");
    }
}
