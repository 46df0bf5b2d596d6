#![no_main]

use choquard::{BallSpec, Dimension, RadialProfile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let ball = BallSpec::whole_space(Dimension::new(3).unwrap());
    if let Ok(p) = RadialProfile::from_csv_str(text, ball) {
        let again = RadialProfile::from_csv_str(&p.to_csv_string(), ball).expect("written CSV parses");
        assert_eq!(p.nodes(), again.nodes());
        assert_eq!(p.values(), again.values());
    }
});
