#![no_main]

use libfuzzer_sys::fuzz_target;

// The report evaluator reads monitors.csv from disk, possibly tampered;
// parsing must never panic and parsed records must round-trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = starflow::monitors::records_from_csv(text) {
            let rendered = starflow::monitors::records_to_csv(&records);
            let back = starflow::monitors::records_from_csv(&rendered).expect("round trip");
            assert_eq!(back.len(), records.len());
        }
    }
});
