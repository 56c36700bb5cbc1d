//! Spinodal decomposition from small noise; the step grows once the fast
//! transient is over.
//!
//! cargo run --release --example spinodal -- [seed] [K]

use bsch::diagnostics::Recorder;
use bsch::experiments::{generate, spinodal_scenario};
use bsch::stepper::{run, DtGrowth};
use bsch::Potential;

fn main() -> bsch::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(1, |a| a.parse().expect("seed"));
    let k = args.next().map_or(1.0, |a| a.parse().expect("K"));
    let mut cfg = spinodal_scenario(seed, k, Potential::logarithmic(1.0, 2.0)?);
    cfg.grid.nx = 48;
    cfg.grid.ny = 24;
    cfg.grid.lx = 12.0;
    cfg.grid.ly = 6.0;
    cfg.time.t_end = 40.0;
    cfg.time.dt_growth = Some(DtGrowth {
        factor: 1.02,
        max_dt: 0.05,
    });
    cfg.time.snapshots = 9;

    let g = cfg.grid()?;
    let p = cfg.params()?;
    let s0 = generate(&g, &cfg.init)?;
    let mut rec = Recorder::new(&g, &p);
    let traj = run(
        &g,
        &p,
        &cfg.stepper()?,
        &s0,
        cfg.time.t_end,
        &cfg.run_options(),
        &mut rec,
    )?;
    println!(
        "{:>8} {:>12} {:>10} {:>10}",
        "t", "energy", "sep_bulk", "std(mu)"
    );
    for s in &rec.snapshots {
        let r = rec
            .records
            .iter()
            .find(|r| r.t == s.t)
            .expect("snapshot has a record");
        println!(
            "{:>8.3} {:>12.6} {:>10.3e} {:>10.3e}",
            r.t, r.energy.total, r.sep_bulk, r.mu_std
        );
    }
    println!("{} steps, final dt {}", traj.steps, traj.final_dt);
    Ok(())
}
