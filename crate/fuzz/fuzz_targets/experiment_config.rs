//! Experiment configurations: deserialization and both validation
//! passes must never panic on arbitrary documents.

#![no_main]

use libfuzzer_sys::fuzz_target;

use bridgelab::formats::{parse_experiment_config, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_experiment_config(text);
    if let Ok(config) = serde_json::from_str::<ExperimentConfig>(text) {
        let _ = config.validate_stability();
    }
});
