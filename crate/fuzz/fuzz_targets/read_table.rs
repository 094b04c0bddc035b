#![no_main]
use libfuzzer_sys::fuzz_target;
use saddlecross::io::read_table;

fuzz_target!(|data: &[u8]| {
    let _ = read_table(data, &["panel", "cut_chains", "divergence_sites"]);
});
