#![no_main]

use libfuzzer_sys::fuzz_target;
use mpmd_core::MatchingResult;

fuzz_target!(|data: &[u8]| {
    let _ = MatchingResult::from_json_slice(data);
});
