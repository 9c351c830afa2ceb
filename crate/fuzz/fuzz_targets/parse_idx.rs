#![no_main]

use clflow::data::{decode_idx, parse_idx};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(arr) = decode_idx(data) {
        assert_eq!(arr.dims.iter().product::<usize>(), arr.data.len());
    }
    let _ = parse_idx(data);
});
