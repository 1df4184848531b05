#![no_main]

use libfuzzer_sys::fuzz_target;
use sofcma::io::{parse_problem, write_problem};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plant) = parse_problem(text) {
        let again = parse_problem(&write_problem(&plant)).expect("written problem must parse");
        assert_eq!(again, plant);
    }
});
