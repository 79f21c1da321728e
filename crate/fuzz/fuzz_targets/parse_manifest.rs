#![no_main]

use arrayrecoil_cli::manifest::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = Manifest::from_json_str(text) else { return };
    let again = serde_json::to_string(&m).expect("serialise");
    let back = Manifest::from_json_str(&again).expect("round trip");
    assert_eq!(back.files, m.files);
    assert_eq!(back.completed_points, m.completed_points);
    assert_eq!(back.error, m.error);
});
