//! Replays the checked-in fuzz seeds through the same entry points.

use std::path::PathBuf;

use mpmd_core::{Instance, MatchingResult};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn instance_seeds_parse_and_round_trip() {
    for (path, bytes) in seeds("instance_json") {
        let inst = Instance::from_json_slice(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(Instance::from_json_str(&inst.to_json_string()).unwrap(), inst);
    }
}

#[test]
fn result_seeds_parse() {
    for (path, bytes) in seeds("result_json") {
        let r = MatchingResult::from_json_slice(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(MatchingResult::from_json_slice(r.to_json_string().as_bytes()).unwrap(), r);
    }
}

#[test]
fn truncated_inputs_are_errors_not_panics() {
    for (_, bytes) in seeds("instance_json").into_iter().chain(seeds("result_json")) {
        for cut in (0..bytes.len()).step_by(7) {
            let _ = Instance::from_json_slice(&bytes[..cut]);
            let _ = MatchingResult::from_json_slice(&bytes[..cut]);
        }
    }
}
