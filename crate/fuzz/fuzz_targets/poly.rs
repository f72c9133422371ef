#![no_main]

use bbcode::{BivariatePoly, Group};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [l, m, rest @ ..] = data else { return };
    let Ok(group) = Group::new(*l as usize % 16 + 1, *m as usize % 16 + 1) else { return };
    if let Ok(text) = std::str::from_utf8(rest) {
        let _ = BivariatePoly::parse(group, text);
    }
});
