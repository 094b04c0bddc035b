#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_exact;

fuzz_target!(|data: &[u8]| {
    let _ = read_exact(data);
});
