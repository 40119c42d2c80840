//! The circular order on window slots used by the windowed HB detector.

use shortrace::clocks::{VectorTimestamp, WindowOrderCtx};

fn main() {
    let ctx = WindowOrderCtx::new(2, 5).expect("head inside window");
    println!("window of {} slots, newest event in slot {}", ctx.capacity(), ctx.head());
    // slots from oldest to newest: 3, 4, 0, 1, 2
    let order: Vec<i64> = (0..5).map(|k| ((ctx.head() + 1 + k) % ctx.capacity()) as i64).collect();
    println!("age order: {order:?}");
    for (a, b) in [(3, 4), (4, 0), (0, 3), (-1, 3), (2, 2)] {
        println!("  {a:>2} <=_W {b}: {}", ctx.widx_leq(a, b).expect("valid slots"));
    }

    let older = VectorTimestamp::<i8>::from_values(&[3, -1, 0]);
    let newer = VectorTimestamp::<i8>::from_values(&[0, 4, 1]);
    println!("{:?} <=_W {:?}: {}", older.as_slice(), newer.as_slice(), older.window_leq(&newer, &ctx).unwrap());
}
