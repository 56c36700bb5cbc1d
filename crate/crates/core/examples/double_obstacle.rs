//! Lowers the temperature of the logarithmic potential and reads off the
//! quantities that stay bounded in the double-obstacle limit.
//!
//! Pure phases sit about `2 exp(-2 theta_c / theta)` from `±1`. Below
//! `theta ≈ 0.11` (with `theta_c = 2`) that gap is smaller than the spacing of
//! doubles near one, so separated states stop being representable.
//!
//! cargo run --release --example double_obstacle

use bsch::experiments::{obstacle_limit_checks, run_sweep, SweepParam, SweepSpec, NOISE_GENERATOR};
use bsch::stepper::DtGrowth;
use bsch::{InitialData, RunConfig};

fn main() -> bsch::Result<()> {
    let mut base = RunConfig::default();
    base.grid.nx = 32;
    base.grid.ny = 16;
    base.grid.lx = 8.0;
    base.grid.ly = 4.0;
    base.time.t_end = 20.0;
    base.time.dt_growth = Some(DtGrowth {
        factor: 1.02,
        max_dt: 0.05,
    });
    base.time.snapshots = 21;
    base.init = InitialData::SeededNoise {
        mean_bulk: 0.0,
        mean_surf: 0.0,
        amplitude: 0.2,
        seed: 9,
        generator: NOISE_GENERATOR.into(),
    };
    let spec = SweepSpec {
        base,
        param: SweepParam::Theta,
        values: vec![0.8, 0.4, 0.2, 0.15],
    };
    let rep = run_sweep(&spec, None)?;
    let g = spec.base.grid()?;
    println!(
        "{:>6} {:>12} {:>14} {:>12} {:>8}",
        "theta", "|xi|_L2", "max|phi|", "energy", "contact"
    );
    for m in &rep.members {
        let pot = spec.member(m.value).model.potential;
        let o = obstacle_limit_checks(&g, &pot, &m.snapshots)?;
        println!(
            "{:>6} {:>12.5} {:>14.12} {:>12.6} {:>8}",
            m.value, o.xi_l2, o.max_abs_phi, m.final_energy, o.near_contact
        );
    }
    for (k, d) in rep.pairwise.iter().enumerate() {
        println!("d[{k}] = {:.4e}", d.combined);
    }
    Ok(())
}
