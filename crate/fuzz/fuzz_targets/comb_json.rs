#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(c) = serde_json::from_str::<combcore::io::CombJson>(text) else {
        return;
    };
    match c.parse() {
        Ok(combcore::io::CombData::Choi(comb)) => {
            if comb.matrix().rows() <= 64 {
                let _ = combcore::combs::check_comb_choi(&comb);
            }
        }
        Ok(combcore::io::CombData::Kraus(kraus)) => {
            if kraus.shape().side() <= 64 && kraus.operators().len() <= 8 {
                let _ = combcore::combs::comb_kraus_conditions(&kraus);
            }
        }
        Err(_) => {}
    }
});
