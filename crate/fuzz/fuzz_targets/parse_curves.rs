#![no_main]

use libfuzzer_sys::fuzz_target;
use rfreg::io::parse_curves;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_curves(text) {
        let pts = t.sample.grid().points();
        assert_eq!(pts.len(), t.declared.len());
        assert_eq!(t.ids.len(), t.sample.n());
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(pts.iter().all(|u| u.is_finite()));
        assert!(t.sample.rows().all(|r| r.iter().all(|v| v.is_finite())));
    }
});
