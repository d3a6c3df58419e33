#![no_main]

use ck_core::fem::Mesh;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mesh) = Mesh::parse(text) {
            let _ = mesh.validate(None);
            assert_eq!(Mesh::parse(&mesh.to_text()).unwrap(), mesh);
        }
    }
});
