#![no_main]

use crimesim::geodata::parse_land_mask_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_land_mask_csv(data, "fuzz");
});
