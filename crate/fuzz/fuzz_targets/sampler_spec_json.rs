//! Valid sampler specs must produce sequences of the requested length.

#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_dos::sampling::SamplerSpec;

fuzz_target!(|data: &[u8]| {
    let Some((&len, rest)) = data.split_first() else { return };
    let text = String::from_utf8_lossy(rest);
    let Ok(spec) = SamplerSpec::from_json(&text) else { return };
    if spec.validate().is_err() {
        return;
    }
    let m = len as usize;
    if let Ok(seq) = spec.sample(m, 7) {
        assert_eq!(seq.len(), m);
    }
});
