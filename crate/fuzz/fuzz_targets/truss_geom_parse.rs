#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(geometry) = isra::benchmarks::truss::TrussGeometry::parse(text) {
            // a parsed geometry must either assemble or report a structured error
            let _ = isra::benchmarks::truss::TrussModel::new(geometry);
        }
    }
});
