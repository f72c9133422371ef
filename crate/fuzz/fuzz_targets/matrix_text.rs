#![no_main]

use bbcode::BinMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = BinMatrix::from_text(text) {
        // Anything that parses must survive a round trip.
        let again = BinMatrix::from_text(&m.to_text()).expect("reparse");
        assert!(m == again);
    }
});
