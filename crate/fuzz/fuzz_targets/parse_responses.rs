#![no_main]

use libfuzzer_sys::fuzz_target;
use rfreg::io::{align_responses, parse_responses};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pairs) = parse_responses(text) {
        assert!(pairs.iter().all(|(id, y)| !id.is_empty() && y.is_finite()));
        let ids: Vec<String> = pairs.iter().map(|(id, _)| id.clone()).collect();
        if let Ok(y) = align_responses(&ids, &pairs) {
            assert_eq!(y.len(), pairs.len());
        }
    }
});
