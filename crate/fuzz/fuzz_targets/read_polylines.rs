#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_polylines;

fuzz_target!(|data: &[u8]| {
    let _ = read_polylines(data);
});
