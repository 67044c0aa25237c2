#![no_main]

use gfflab_harness::parse_record_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(rec) = parse_record_line(data, 1) {
        // Accepted records must survive a round trip.
        let again = parse_record_line(&rec.to_line(), 1).expect("re-encoded record parses");
        assert_eq!(again.successes, rec.successes);
        assert!(rec.successes <= rec.replicas);
    }
});
