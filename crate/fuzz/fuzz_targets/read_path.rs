#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_path;

fuzz_target!(|data: &[u8]| {
    let _ = read_path(data);
});
