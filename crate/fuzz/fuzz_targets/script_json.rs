#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq::RelaxationScript;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(script) = RelaxationScript::from_json(text) {
        assert_eq!(
            RelaxationScript::from_json(&script.to_json()).unwrap(),
            script
        );
    }
});
