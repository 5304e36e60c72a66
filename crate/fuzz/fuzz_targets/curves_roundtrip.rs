#![no_main]

use libfuzzer_sys::fuzz_target;
use rfreg::io::{parse_curves, write_curves};

// Whatever parses must survive emit-then-parse bit for bit.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(a) = parse_curves(text) else {
        return;
    };
    let emitted = write_curves(&a.ids, &a.declared, &a.sample);
    let b = parse_curves(&emitted).expect("emitted table parses");
    assert_eq!(a.ids, b.ids);
    assert_eq!(a.declared, b.declared);
    assert_eq!(a.map, b.map);
    for (x, y) in a.sample.rows().zip(b.sample.rows()) {
        assert_eq!(x, y);
    }
});
