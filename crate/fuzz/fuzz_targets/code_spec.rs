#![no_main]

use bbcode::CodeSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = CodeSpec::from_json(text) else { return };
    // Keep construction cheap; large groups are not interesting here.
    if spec.l.saturating_mul(spec.m) <= 64 {
        let _ = spec.build();
    }
});
