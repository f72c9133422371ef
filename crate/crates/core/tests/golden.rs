//! Detector models of the [[72,12,6]] memory circuit against checked-in dumps.
//! Set `BBCODE_BLESS=1` to rewrite the dumps.

use std::path::PathBuf;

use bbcode::code::{known_code, PauliType};
use bbcode::noise::{build_detector_model, DetectorModel, FinalReadout, NoisyCircuit};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn detector_dumps_match() {
    let code = known_code(72).unwrap().spec.build().unwrap();
    let circuit = NoisyCircuit::new(&code, 6, FinalReadout::default()).unwrap();
    let model = build_detector_model(&circuit, 0.001);
    for (t, file) in [(PauliType::X, "detectors_72_nc6_x.txt"), (PauliType::Z, "detectors_72_nc6_z.txt")] {
        let text = model.model(t).to_text();
        let path = data(file);
        if std::env::var_os("BBCODE_BLESS").is_some() {
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert!(text == golden, "{file} differs from the generated model");
        let parsed = DetectorModel::from_text(&golden, t).unwrap();
        assert_eq!(parsed.to_text(), golden);
    }
}
