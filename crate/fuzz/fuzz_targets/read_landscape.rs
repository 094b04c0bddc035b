#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_landscape;

fuzz_target!(|data: &[u8]| {
    let _ = read_landscape(data);
});
