#![no_main]

use libfuzzer_sys::fuzz_target;

// The matrix loader must reject malformed input with an error, never panic
// or over-allocate.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = serde_json::from_str::<combcore::io::MatrixJson>(text) {
        let _ = m.to_matrix();
    }
});
