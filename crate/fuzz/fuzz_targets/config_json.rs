#![no_main]

use crimesim::config::RunConfig;
use libfuzzer_sys::fuzz_target;

// Deserialization plus the validation pass behind `--config`.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = serde_json::from_str::<RunConfig>(text) {
            let _ = cfg.validate();
        }
    }
});
