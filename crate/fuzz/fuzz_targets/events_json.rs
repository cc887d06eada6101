#![no_main]

use libfuzzer_sys::fuzz_target;
use starflow::runner::EventsFile;

// events.json is read back by the blowup and report commands; arbitrary
// bytes must either fail cleanly or deserialize to a serializable value.
fuzz_target!(|data: &[u8]| {
    if let Ok(events) = serde_json::from_slice::<EventsFile>(data) {
        let _ = serde_json::to_string(&events).unwrap();
    }
});
