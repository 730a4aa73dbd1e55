#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(ms) = mpmd_cli::parse_m_range(s) {
            assert!(ms.iter().all(|m| m % 2 == 0 && *m > 0));
        }
    }
});
