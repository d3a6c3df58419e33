#![no_main]

use ck_core::io::BasisMeta;
use libfuzzer_sys::fuzz_target;
use nalgebra::DMatrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(meta) = BasisMeta::parse(text) {
            if meta.n.saturating_mul(meta.m) <= 1 << 12 {
                let q = DMatrix::zeros(meta.n, meta.m);
                let _ = meta.into_basis(q);
            }
        }
    }
});
