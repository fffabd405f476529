#![no_main]

use libfuzzer_sys::fuzz_target;
use relaxq::net::check_soundness;
use relaxq::parse_pnml;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(net) = parse_pnml(text) else {
        return;
    };
    // whatever parses must survive a write/read cycle unchanged
    let again = parse_pnml(&net.to_pnml()).expect("written PNML parses");
    assert_eq!(again.to_pnml(), net.to_pnml());
    let _ = relaxq::check_free_choice(&net);
    let _ = check_soundness(&net, 2_000);
});
