#![no_main]

use libfuzzer_sys::fuzz_target;

// Exported metrics reports are read back by tooling; the reader must handle
// arbitrary JSON without panicking.
fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<Option<aim_core::runner::AggregateReport>>(data);
});
