//! Fuzz the configuration parser: arbitrary bytes must never panic, and any
//! accepted document must satisfy every type invariant and survive a
//! serialize/reload round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = offsim::config::load_config(text) {
        cfg.hardware
            .validate()
            .expect("accepted hardware violates invariants");
        for model in &cfg.models {
            model
                .validate()
                .expect("accepted model violates invariants");
        }
        let doc = offsim::config::to_document(&cfg);
        let reloaded = offsim::config::load_config(&doc).expect("round trip must parse");
        assert_eq!(cfg, reloaded, "round trip must be bit-exact");
    }
});
