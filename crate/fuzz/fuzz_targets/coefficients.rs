#![no_main]

use libfuzzer_sys::fuzz_target;
use mublab::labels::parse_coefficients;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sup) = parse_coefficients(text) {
        let norm: f64 = sup.terms().iter().map(|(_, c)| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }
});
