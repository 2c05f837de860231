//! Guard and action language: parse, print canonically, evaluate.

use std::fmt::Write;

use mbt_core::guard::{apply_actions, eval_guard, parse_guard, parse_stmt, Context, Value};

pub fn run() -> String {
    let mut out = String::new();
    let ctx = Context::new()
        .with("attempts", Value::Int(2))
        .with("loggedIn", Value::Bool(false));
    for text in [
        "attempts < 3",
        "!loggedIn && (attempts + 1) * 2 >= 6",
        "attempts == 2 || undefinedVar",
    ] {
        let expr = parse_guard(text).expect("example guards parse");
        let _ = writeln!(
            out,
            "{text:<40} => {expr:<36} = {}",
            eval_guard(&expr, &ctx).unwrap()
        );
    }
    for text in ["attempts <", "loggedIn + 1", "x = = 1"] {
        match parse_guard(text) {
            Ok(e) => match eval_guard(&e, &ctx) {
                Ok(v) => {
                    let _ = writeln!(out, "{text:<40} => {v}");
                }
                Err(err) => {
                    let _ = writeln!(out, "{text:<40} => evaluation error: {err}");
                }
            },
            Err(err) => {
                let _ = writeln!(out, "{text:<40} => syntax error: {err}");
            }
        }
    }

    let actions: Vec<_> = ["attempts = attempts + 1", "loggedIn = attempts > 2"]
        .iter()
        .map(|s| parse_stmt(s).unwrap())
        .collect();
    let after = apply_actions(&actions, &ctx).unwrap();
    let _ = writeln!(out, "before: {}", ctx.digest());
    let _ = writeln!(out, "after:  {}", after.digest());
    out
}

fn main() {
    print!("{}", run());
}
