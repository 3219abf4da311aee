#![no_main]

use libfuzzer_sys::fuzz_target;
use mublab::labels::{BasisName, StateLabel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(label) = text.parse::<StateLabel>() {
        // canonical form parses back to the same label
        let again: StateLabel = label.to_string().parse().expect("display output parses");
        assert_eq!(again, label);
        assert_eq!(label.state().dim(), label.basis.size());
    }
    let _ = text.parse::<BasisName>();
});
