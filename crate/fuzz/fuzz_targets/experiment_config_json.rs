#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_dos::experiments::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        let _ = config.window();
        let again = ExperimentConfig::from_json(&config.to_json()).expect("validated config re-parses");
        assert_eq!(config.seed, again.seed);
    }
});
