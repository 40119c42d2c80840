//! Sync-preserving races, which happens-before misses, found with bounded windows.

use shortrace::detector::{run_trace, RunOptions};
use shortrace::hb::FastTrack;
use shortrace::oracle;
use shortrace::sp::ShortSyncP;
use shortrace::trace::Trace;

const TRACE: &str = "\
T3|acq(l)
T1|w(x)
T3|r(x)
T3|rel(l)
T2|acq(l)
T2|rel(l)
T2|w(x)
";

fn main() {
    let tr = Trace::parse(TRACE).expect("valid trace");
    let opts = RunOptions::default();

    let hb = run_trace(FastTrack::<i32>::new(), &tr, opts).expect("well-formed");
    println!("happens-before races: {:?}", hb.pair_set());

    let ideal = oracle::sp_ideal(&tr, 1, 6);
    println!("ideal of (1, 6): {:?}", ideal.iter().collect::<Vec<_>>());

    for w in [3, 5, 6, 7] {
        let f = run_trace(ShortSyncP::new(w), &tr, opts).expect("well-formed");
        println!("ShortSyncP w={w}: {:?}", f.pair_set());
    }
}
