//! Triplet CSV parsing, then assembly into a symmetric tridiagonal matrix.

#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_dos::capacitance::{parse_triplets, SymTridiagonal};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(triplets) = parse_triplets(&text) else { return };
    if let Ok(m) = SymTridiagonal::from_triplets(&triplets) {
        let back = parse_triplets(&m.to_triplet_csv()).expect("own output parses");
        assert_eq!(SymTridiagonal::from_triplets(&back).expect("rebuilds"), m);
    }
});
