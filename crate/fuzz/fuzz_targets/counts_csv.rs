#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use mublab::tomography::{build_projector_set, counts_csv, parse_counts_csv, ProjectorSet};

fn projectors() -> &'static ProjectorSet {
    static PS: OnceLock<ProjectorSet> = OnceLock::new();
    PS.get_or_init(build_projector_set)
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let ps = projectors();
    if let Ok(counts) = parse_counts_csv(text, ps) {
        assert_eq!(counts.len(), ps.len());
        assert_eq!(parse_counts_csv(&counts_csv(&counts, ps), ps).unwrap(), counts);
    }
});
