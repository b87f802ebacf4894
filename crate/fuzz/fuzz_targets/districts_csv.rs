#![no_main]

use crimesim::geodata::parse_districts_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_districts_csv(data, "fuzz");
});
