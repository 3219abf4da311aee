#![no_main]

use libfuzzer_sys::fuzz_target;
use mublab::io::{parse_raw_header, raw_header_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(header) = parse_raw_header(text) {
        let again = parse_raw_header(&raw_header_json(&header).unwrap()).unwrap();
        assert_eq!(again, header);
    }
});
