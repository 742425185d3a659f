#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = nrrd_cli::decode_checkpoint(data) {
        assert_eq!(nrrd_cli::encode_checkpoint(&state), data);
    }
});
