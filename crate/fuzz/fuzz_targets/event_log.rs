#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq::{check_log, parse_event_log, Constraint, ConstraintSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(traces) = parse_event_log(text) else {
        return;
    };
    assert!(traces.iter().all(|t| !t.is_empty()));
    let mut cs = ConstraintSet::new();
    cs.insert(Constraint::init(["a"]));
    cs.insert(Constraint::chain_response(["a"], ["b"]));
    cs.insert(Constraint::alternate_response(["a", "b"], ["c"]));
    let report = check_log(&traces, &cs).expect("non-empty log");
    assert!((0.0..=1.0).contains(&report.rate()));
});
