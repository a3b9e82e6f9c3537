#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = serde_json::from_str::<combcore::io::ChannelJson>(text) {
        if let Ok(choi) = c.to_choi() {
            // validation must stay total on small operators
            if choi.matrix().rows() <= 64 {
                let _ = combcore::channels::validate_channel(&choi);
            }
        }
    }
});
