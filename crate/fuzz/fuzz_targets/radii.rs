#![no_main]

use choquard::config::{parse_radii, Radius};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = text.parse::<Radius>() {
        assert_eq!(r.to_string().parse::<Radius>().unwrap(), r);
    }
    if let Ok(radii) = parse_radii(text) {
        assert!(!radii.is_empty());
        assert!(radii.windows(2).all(|w| w[0] < w[1]));
    }
});
