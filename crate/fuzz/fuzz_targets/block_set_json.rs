//! Block sets that parse must survive a serialisation round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_dos::geometry::BlockSet;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(set) = BlockSet::from_json(&text) {
        let again = BlockSet::from_json(&set.to_json()).expect("round trip");
        assert_eq!(set, again);
    }
});
