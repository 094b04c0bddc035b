#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_saddles;

fuzz_target!(|data: &[u8]| {
    let _ = read_saddles(data);
});
