#![no_main]

use libfuzzer_sys::fuzz_target;
use psi_hilfer::expr::{Bindings, Context, Expr};

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else {
        return;
    };
    let ctx = match tag % 4 {
        0 => Context::Rhs,
        1 => Context::Delay,
        2 => Context::History,
        _ => Context::Impulse,
    };
    if let Ok(s) = std::str::from_utf8(rest) {
        if let Ok(e) = Expr::parse(s, ctx) {
            let _ = e.eval(&Bindings::default());
            // Printing must give back the same tree.
            let again = Expr::parse(&e.to_string(), ctx).expect("display output reparses");
            assert_eq!(again, e);
        }
    }
});
