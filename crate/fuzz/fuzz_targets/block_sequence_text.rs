#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_dos::geometry::BlockSequence;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(seq) = text.parse::<BlockSequence>() {
        let printed = seq.to_string();
        let again: BlockSequence = printed.parse().expect("display output parses");
        assert_eq!(seq.symbols(), again.symbols());
    }
});
