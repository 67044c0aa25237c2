#![no_main]

use gfflab_harness::{parse_config, Experiment};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = parse_config(data) {
        for exp in [Experiment::OneArmBulk, Experiment::Circuit, Experiment::ChemDist, Experiment::PsiAudit] {
            let _ = cfg.validate(exp);
        }
    }
});
