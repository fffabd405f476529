#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq::{constraints_from_matrix, RelationMatrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = RelationMatrix::from_json(text) {
        let back = RelationMatrix::from_json(&m.to_json()).expect("round trip");
        assert_eq!(back, m);
        let _ = constraints_from_matrix(&m);
    }
});
