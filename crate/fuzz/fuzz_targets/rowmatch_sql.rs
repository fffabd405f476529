#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq_rowmatch::Database;

fuzz_target!(|data: &[u8]| {
    if let Ok(sql) = std::str::from_utf8(data) {
        let mut db = Database::with_step_limit(100_000);
        let _ = db.execute(sql);
    }
});
