#![no_main]

use libfuzzer_sys::fuzz_target;
use mublab::io::{decode_raw, RawData};
use mublab::optics::GridSpec;

// first byte picks the grid size, the rest is the payload
fuzz_target!(|data: &[u8]| {
    let Some((&sel, payload)) = data.split_first() else {
        return;
    };
    let n = 64usize << (sel % 3);
    let Ok(spec) = GridSpec::new(n, 4.0) else {
        return;
    };
    match decode_raw(&spec, payload) {
        Ok(RawData::Real(m)) => assert_eq!(m.dim(), (n, n)),
        Ok(RawData::Complex(m)) => assert_eq!(m.dim(), (n, n)),
        Err(_) => {}
    }
});
