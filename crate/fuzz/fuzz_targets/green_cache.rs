#![no_main]

use gfflab_core::green::GreenTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = GreenTable::decode_cache(data) {
        let mut out = Vec::new();
        table.write_cache(&mut out).unwrap();
        assert_eq!(out, data);
    }
});
