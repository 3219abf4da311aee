#![no_main]

use libfuzzer_sys::fuzz_target;
use mublab::mub::{verify_mub_set, MubSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = MubSet::from_json(text) {
        let _ = verify_mub_set(&set, 1e-9);
        let back = MubSet::from_json(&set.to_json().unwrap()).expect("own output parses");
        assert_eq!(back.dim, set.dim);
        assert_eq!(back.bases.len(), set.bases.len());
    }
});
