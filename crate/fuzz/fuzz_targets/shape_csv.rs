#![no_main]

use libfuzzer_sys::fuzz_target;

// Checkpoint and fixture files use the `# n= mode= t=` CSV format; the
// parser must reject garbage without panicking and accepted graphs must
// round-trip exactly.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(graph) = starflow::geometry::graph_from_csv(text) {
            let rendered = starflow::geometry::graph_to_csv(&graph);
            let back = starflow::geometry::graph_from_csv(&rendered).expect("round trip");
            assert_eq!(back, graph);
        }
    }
});
