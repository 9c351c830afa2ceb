#![no_main]

use clflow_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_toml(text, std::path::Path::new("/")) {
            let _ = cfg.validate();
            let echoed = cfg.to_toml().expect("valid config serializes");
            let back = ExperimentConfig::from_toml(&echoed, std::path::Path::new("/"))
                .expect("echoed config parses");
            assert_eq!(back.to_toml().unwrap(), echoed);
        }
    }
});
