#![no_main]

use libfuzzer_sys::fuzz_target;

// Accepted scenarios must survive a serialise/reparse round trip intact.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(scenario) = sarnet::scenario::Scenario::parse(text) {
            let rewritten = scenario.to_toml();
            let reparsed = sarnet::scenario::Scenario::parse(&rewritten)
                .expect("serialised scenario reparses");
            assert_eq!(reparsed, scenario);
        }
    }
});
