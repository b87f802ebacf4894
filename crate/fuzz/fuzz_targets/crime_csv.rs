#![no_main]

use crimesim::geodata::{parse_crime_csv, RowPolicy};
use libfuzzer_sys::fuzz_target;

// Both row policies and a category filter: must never panic, only Err.
fuzz_target!(|data: &[u8]| {
    let _ = parse_crime_csv(data, "fuzz", &[], RowPolicy::Skip);
    let allow = ["theft".to_string()];
    let _ = parse_crime_csv(data, "fuzz", &allow, RowPolicy::Abort);
});
