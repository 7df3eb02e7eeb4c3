//! Simulates and decodes a bundled scenario, printing the match against
//! ground truth. Usage: `cargo run --release --example closed_loop -- pong`.

use std::time::Instant;

use fsbs_core::pipeline::{compare_events, decode_all, simulate, MATCH_TOLERANCE};
use fsbs_core::presets;

fn main() -> fsbs_core::Result<()> {
    let names: Vec<String> = std::env::args().skip(1).collect();
    let names = if names.is_empty() {
        presets::BUNDLED.iter().map(|s| s.to_string()).collect()
    } else {
        names
    };
    for name in names {
        let t0 = Instant::now();
        let prepared = presets::bundled(&name)?.prepare()?;
        let sim = simulate(&prepared, None)?;
        let t1 = Instant::now();
        let out = decode_all(&sim.iq, &sim.bands)?;
        let m = compare_events(&sim.truth, &out.events, MATCH_TOLERANCE);
        println!(
            "{name}: truth {} decoded {} matched {} missed {} spurious {} (sim {:.1}s, decode {:.1}s)",
            sim.truth.len(),
            out.events.len(),
            m.matched.len(),
            m.missed.len(),
            m.spurious.len(),
            (t1 - t0).as_secs_f64(),
            t1.elapsed().as_secs_f64()
        );
        for e in m.missed.iter().take(5) {
            println!("  missed   {e}");
        }
        for e in m.spurious.iter().take(5) {
            println!("  spurious {e}");
        }
    }
    Ok(())
}
