#![no_main]

use crimesim::geodata::{read_counts_by_year, GridSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let spec = GridSpec::new(0.0, 0.0, 100.0, 4, 4).unwrap();
    let _ = read_counts_by_year(data, "fuzz", &spec);
});
