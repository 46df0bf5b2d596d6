#![no_main]

use choquard::grid3d::GridFunction3D;
use libfuzzer_sys::fuzz_target;

// First two bytes: sidecar length, then the sidecar JSON, then the field.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let len = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if rest.len() < len {
        return;
    }
    let Ok(sidecar) = std::str::from_utf8(&rest[..len]) else {
        return;
    };
    if let Ok(u) = GridFunction3D::from_binary(&rest[len..], sidecar) {
        let side = serde_json::to_string(&u.sidecar()).unwrap();
        let back = GridFunction3D::from_binary(&u.to_bytes(), &side).expect("written field parses");
        assert_eq!(back.values(), u.values());
    }
});
