#![no_main]

use libfuzzer_sys::fuzz_target;

// Experiment configs come from user-supplied JSON files; parsing must never
// panic, and accepted configs must survive an echo round trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = starflow::config::parse_config_str(text) {
            let echoed = serde_json::to_string(&cfg).unwrap();
            let back = starflow::config::parse_config_str(&echoed).unwrap();
            assert_eq!(back.name, cfg.name);
            assert_eq!(back.flow.intervals, cfg.flow.intervals);
        }
    }
});
