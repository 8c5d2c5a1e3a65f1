#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| drlia_fuzz::journal_frames(data));
