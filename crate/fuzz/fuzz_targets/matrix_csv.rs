#![no_main]

use crimesim::io::parse_matrix_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_matrix_csv(data, "fuzz");
});
