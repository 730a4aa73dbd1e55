#![no_main]

use libfuzzer_sys::fuzz_target;
use mpmd_core::Instance;

fuzz_target!(|data: &[u8]| {
    if let Ok(inst) = Instance::from_json_slice(data) {
        let again = Instance::from_json_str(&inst.to_json_string()).expect("serialized instance reloads");
        assert_eq!(again, inst);
    }
});
