#![no_main]

use crimesim::geodata::parse_cell_attrs_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_cell_attrs_csv(data, "fuzz");
});
