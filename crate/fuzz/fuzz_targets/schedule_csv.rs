#![no_main]

use catramp::schedule::{parse_schedule_csv, write_schedule_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((schedule, hash)) = parse_schedule_csv(text) {
        let (back, h) = parse_schedule_csv(&write_schedule_csv(&schedule, &hash)).expect("round trip");
        assert_eq!(back, schedule);
        assert_eq!(h, hash);
    }
});
