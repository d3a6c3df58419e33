#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = ck_core::io::parse_mtx_with_limit(text, "fuzz", 1 << 16) {
            // whatever parses must survive a write/read cycle
            let again = ck_core::io::parse_mtx(&ck_core::io::format_mtx_array(&m), "fuzz").unwrap();
            assert_eq!(again, m);
        }
    }
});
