#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_events;

fuzz_target!(|data: &[u8]| {
    let _ = read_events(data);
});
