#![no_main]

use choquard::energy::EnergyReport;
use choquard::rearrange::CheckReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = EnergyReport::from_json(text) {
        EnergyReport::from_json(&r.to_json()).expect("written report parses");
    }
    if let Ok(r) = CheckReport::from_json(text) {
        CheckReport::from_json(&r.to_json()).expect("written report parses");
    }
});
