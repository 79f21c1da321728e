#![no_main]

use arrayrecoil_cli::config::{Experiment, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = RunConfig::from_json_str(text) else { return };
    let again = serde_json::to_string(&config).expect("serialise");
    RunConfig::from_json_str(&again).expect("round trip");
    for e in [
        Experiment::Eigenmodes,
        Experiment::Decay,
        Experiment::Pulse,
        Experiment::Steady,
        Experiment::Cavity,
        Experiment::Sweep,
    ] {
        if config.validate(e).is_ok() {
            let _ = config.drive_spec();
            let _ = config.cavity_spec();
        }
    }
});
