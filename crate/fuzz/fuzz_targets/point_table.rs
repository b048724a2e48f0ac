#![no_main]

use fermat::io::{read_path, read_points, write_points};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(points) = read_points(text) {
        assert!(points.is_finite());
        let again = read_points(&write_points(&points)).expect("written tables parse");
        assert_eq!(again, points);
    }
    let _ = read_path(text);
});
