//! Whole-trace vs windowed happens-before detection on a four-event trace.

use shortrace::detector::{run_trace, RunOptions};
use shortrace::hb::{FastTrack, ShortFastTrack};
use shortrace::trace::Trace;

fn main() {
    let tr = Trace::parse("T1|w(y)\nT1|w(x)\nT2|w(x)\nT2|w(y)\n").expect("valid trace");
    let opts = RunOptions::default();

    let all = run_trace(FastTrack::<i32>::new(), &tr, opts).expect("well-formed");
    println!("FastTrack:");
    for p in &all.pairs {
        println!("  race ({}, {}) on {} span {}", p.i, p.j, tr.symbols().var_name(p.var), p.span());
    }

    for w in [2, 4] {
        let short = run_trace(ShortFastTrack::<i8>::new(w), &tr, opts).expect("well-formed");
        println!("ShortFastTrack w={w}:");
        for p in &short.pairs {
            println!("  race ({}, {}) on {}", p.i, p.j, tr.symbols().var_name(p.var));
        }
    }
}
