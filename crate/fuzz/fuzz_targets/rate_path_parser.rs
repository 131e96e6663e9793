#![no_main]

use libfuzzer_sys::fuzz_target;

// Accepted rate paths must round-trip through their canonical form.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(path) = sarnet::scenario::RatePath::parse(text) {
            let reparsed = sarnet::scenario::RatePath::parse(&path.to_string())
                .expect("canonical form reparses");
            assert_eq!(reparsed, path);
        }
    }
});
