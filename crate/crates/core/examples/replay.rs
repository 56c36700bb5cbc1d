//! Writes a run directory and checks that every saved snapshot reproduces
//! its series row bit for bit.
//!
//! cargo run --release --example replay -- [dir]

use std::path::PathBuf;

use bsch::artifacts::{replay_check, write_run_dir};
use bsch::diagnostics::Recorder;
use bsch::experiments::generate;
use bsch::stepper::run;
use bsch::RunConfig;

fn main() -> bsch::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("bsch-replay"), PathBuf::from);
    let mut cfg = RunConfig::default();
    cfg.grid.nx = 16;
    cfg.grid.ny = 8;
    cfg.grid.lx = 4.0;
    cfg.grid.ly = 2.0;
    cfg.time.t_end = 0.2;
    cfg.time.snapshots = 5;
    let g = cfg.grid()?;
    let p = cfg.params()?;
    let s0 = generate(&g, &cfg.init)?;
    let mut rec = Recorder::new(&g, &p);
    run(
        &g,
        &p,
        &cfg.stepper()?,
        &s0,
        cfg.time.t_end,
        &cfg.run_options(),
        &mut rec,
    )?;
    write_run_dir(&dir, &cfg, &rec)?;
    let rep = replay_check(&dir)?;
    println!(
        "{}: {} snapshots checked, {} mismatches",
        dir.display(),
        rep.snapshots_checked,
        rep.mismatches.len()
    );
    for v in &rep.mismatches {
        println!("  {v}");
    }
    Ok(())
}
