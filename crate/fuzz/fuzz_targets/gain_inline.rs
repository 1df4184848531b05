#![no_main]

use libfuzzer_sys::fuzz_target;
use sofcma::io::parse_gain_inline;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_gain_inline(text) {
            assert!(g.matrix().iter().all(|v| v.is_finite()));
        }
    }
});
