#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = sarnet::cost::CostTable::parse(text) {
            let rewritten = table.to_toml();
            let reparsed =
                sarnet::cost::CostTable::parse(&rewritten).expect("serialised table reparses");
            assert_eq!(reparsed, table);
        }
    }
});
