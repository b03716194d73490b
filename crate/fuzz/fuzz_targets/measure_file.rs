//! Measure documents: parsing must never panic, and every accepted
//! document must build a normalized measure.

#![no_main]

use libfuzzer_sys::fuzz_target;

use bridgelab::formats::{build_measure, parse_measure_file};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_measure_file(text) else {
        return;
    };
    if let Ok(measure) = build_measure(&file) {
        let total: f64 = measure.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!(measure.weights().iter().all(|&w| w >= 0.0));
    }
});
