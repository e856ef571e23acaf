#![no_main]

use bubbleforge::cli::parse_map_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        // a spec that parses must print back to one that parses
        if let Ok(f) = parse_map_spec(s) {
            if let Some(spec) = f.to_spec() {
                assert!(parse_map_spec(&spec).is_ok(), "{s:?} printed as {spec:?}");
            }
        }
    }
});
