#![no_main]

use libfuzzer_sys::fuzz_target;

// The config file is the main user-supplied input; parsing plus validation
// must never panic, whatever the bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = aim_core::config::ExperimentConfig::from_toml_str(text);
    }
});
