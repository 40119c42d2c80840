//! Writes a small seeded corpus of traces, one with a planted short race.

use std::fs;
use std::path::PathBuf;

use shortrace::tracegen::{gen_trace, plant_short_race, GenParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "corpus".into()).into();
    fs::create_dir_all(&dir)?;
    for seed in 0..5 {
        let p = GenParams { threads: 4, vars: 8, locks: 2, length: 2000, lock_density: 0.2, seed, ..GenParams::default() };
        let tr = gen_trace(&p)?;
        let path = dir.join(format!("random_{seed}.trace"));
        fs::write(&path, tr.serialize())?;
        println!("{}: {} events, hash {}", path.display(), tr.len(), &tr.content_hash()[..12]);
    }
    let p = GenParams { threads: 4, vars: 8, locks: 2, length: 2000, lock_density: 0.4, seed: 99, ..GenParams::default() };
    let (tr, (i, j)) = plant_short_race(&p, 12)?;
    let path = dir.join("planted.trace");
    fs::write(&path, tr.serialize())?;
    println!("{}: planted race ({i}, {j})", path.display());
    Ok(())
}
