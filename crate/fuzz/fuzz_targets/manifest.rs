#![no_main]

use catramp::cli::RunManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // anything that parses must echo to a fixed point
    if let Ok(m) = RunManifest::parse(text, &[]) {
        let echo = m.echo();
        let again = RunManifest::parse(&echo, &[]).expect("echo parses");
        assert_eq!(again, m);
        assert_eq!(again.echo(), echo);
    }
});
