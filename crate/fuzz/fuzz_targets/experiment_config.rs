#![no_main]

use fermat::experiments::{ExperimentConfig, Runner};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // the first line doubles as an override string
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    for runner in Runner::ALL {
        let _ = ExperimentConfig::load(runner, Some(text), &[]);
        if let Ok(config) = ExperimentConfig::load(runner, Some(rest), &[first.to_string()]) {
            let reloaded = ExperimentConfig::load(runner, Some(&config.to_toml()), &[]).expect("echoed configs load");
            assert_eq!(reloaded, config);
        }
    }
});
