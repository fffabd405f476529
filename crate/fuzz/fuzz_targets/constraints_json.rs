#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq::sqlgen::SqlConfig;
use relaxq::{render_bundle, ConstraintSet, QueryMode};
use relaxq_rowmatch::Database;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cs) = ConstraintSet::from_json(text) else {
        return;
    };
    assert_eq!(ConstraintSet::from_json(&cs.to_json()).unwrap(), cs);
    // every generated query must be accepted by the engine
    for mode in [QueryMode::Paper, QueryMode::Violation] {
        let script = render_bundle(&cs, mode, &SqlConfig::default()).script();
        Database::new()
            .execute(&script)
            .expect("generated SQL executes");
    }
});
