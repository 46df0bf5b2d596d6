#![no_main]

use choquard::GroundState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(gs) = GroundState::from_json(text) {
        let back = GroundState::from_json(&gs.to_json()).expect("written JSON parses");
        assert_eq!(back.profile.values(), gs.profile.values());
        assert_eq!(back.lambda.to_bits(), gs.lambda.to_bits());
    }
});
