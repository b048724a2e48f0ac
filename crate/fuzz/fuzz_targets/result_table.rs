#![no_main]

use fermat::experiments::ResultTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = ResultTable::from_tsv(text) {
        let again = ResultTable::from_tsv(&table.to_tsv()).expect("written tables parse");
        assert_eq!(again.to_tsv(), table.to_tsv());
    }
});
