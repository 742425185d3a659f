#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = nrrd_cli::parse_config(text) {
            // accepted configs must survive their own canonical form
            let canon = nrrd_cli::to_canonical_string(&config);
            let again = nrrd_cli::parse_config(&canon).expect("canonical text parses");
            assert_eq!(nrrd_cli::to_canonical_string(&again), canon);
        }
    }
});
