#![no_main]

use fermat::density::{DensityModel, ScoreFunction};
use fermat::io::{read_gmm_json, write_gmm_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = read_gmm_json(text) {
        // anything accepted must evaluate and survive a round trip
        let x = vec![0.0; model.dim()];
        let _ = model.log_density(&x);
        let again = read_gmm_json(&write_gmm_json(&model)).expect("written mixtures parse");
        assert_eq!(again.dim(), model.dim());
    }
});
