#![no_main]

use libfuzzer_sys::fuzz_target;

// The channel-or-comb dispatcher behind `combctl validate`.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = combctl::validate::validate_text(text);
});
