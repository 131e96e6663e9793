#![no_main]

use libfuzzer_sys::fuzz_target;

// The graph parser must never panic on arbitrary text; errors are fine.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(net) = sarnet::graph::Network::parse(text) {
            // exercising the derived structures must not panic either
            let depths = net.compute_depths();
            let partition = net.partition_diffusion_sets(&depths);
            assert_eq!(
                partition.sets().iter().map(|s| s.len()).sum::<usize>(),
                net.node_count()
            );
        }
    }
});
