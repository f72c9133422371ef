#![no_main]

use bbcode::code::PauliType;
use bbcode::noise::DetectorModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = DetectorModel::from_text(text, PauliType::X) {
        let again = DetectorModel::from_text(&model.to_text(), PauliType::X).expect("reparse");
        assert_eq!(model.to_text(), again.to_text());
    }
});
