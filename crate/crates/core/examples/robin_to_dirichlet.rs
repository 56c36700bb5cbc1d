//! Sweeps the transmission coefficient toward zero and prints how far each
//! member lies from the next and from the limit.
//!
//! cargo run --release --example robin_to_dirichlet

use bsch::experiments::{run_sweep, SweepParam, SweepSpec};
use bsch::{InitialData, RunConfig};

fn main() -> bsch::Result<()> {
    let mut base = RunConfig::default();
    base.grid.nx = 32;
    base.grid.ny = 16;
    base.grid.lx = 8.0;
    base.grid.ly = 4.0;
    base.time.t_end = 0.5;
    base.time.snapshots = 6;
    base.init = InitialData::SeededNoise {
        mean_bulk: 0.0,
        mean_surf: 0.0,
        amplitude: 0.2,
        seed: 8,
        generator: bsch::experiments::NOISE_GENERATOR.into(),
    };
    let spec = SweepSpec {
        base,
        param: SweepParam::RobinK,
        values: vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.0],
    };
    let rep = run_sweep(&spec, None)?;
    print!("{}", rep.summary_csv());
    println!();
    for (m, d) in rep.members.iter().zip(&rep.to_last) {
        println!(
            "K = {:<7} distance to K = 0: bulk {:.4e}, surf {:.4e}",
            m.value, d.bulk, d.surf
        );
    }
    Ok(())
}
