#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_track;

fuzz_target!(|data: &[u8]| {
    let _ = read_track(data);
});
