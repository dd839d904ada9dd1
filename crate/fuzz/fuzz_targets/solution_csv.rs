#![no_main]

use libfuzzer_sys::fuzz_target;
use psi_hilfer::export::{read_solution_csv, write_rows};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_solution_csv(data) {
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_solution_csv(buf.as_slice()).unwrap(), rows);
    }
});
