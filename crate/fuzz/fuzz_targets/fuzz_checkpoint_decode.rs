#![no_main]

use libfuzzer_sys::fuzz_target;

// Checkpoint bundles come from disk and may be truncated or corrupted;
// decoding must reject them gracefully.
fuzz_target!(|data: &[u8]| {
    let _ = aim_core::nnet::checkpoint::decode_bundle(data);
});
