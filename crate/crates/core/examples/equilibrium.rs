//! Runs a two-phase band to rest and compares the limiting chemical
//! potentials with the values predicted from the final state.
//!
//! cargo run --release --example equilibrium

use bsch::diagnostics::{detect_steady, fit_rate, h1_distance};
use bsch::experiments::run_member;
use bsch::stepper::DtGrowth;
use bsch::{InitialData, RunConfig};

fn main() -> bsch::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.grid.nx = 32;
    cfg.grid.ny = 16;
    cfg.grid.lx = 8.0;
    cfg.grid.ly = 4.0;
    cfg.init = InitialData::TwoPhaseBand {
        position: 4.0,
        width: 3.0,
        plateau: 0.7,
        interface: 0.8,
    };
    cfg.time.t_end = 400.0;
    cfg.time.dt_growth = Some(DtGrowth {
        factor: 1.05,
        max_dt: 2.0,
    });
    cfg.time.stop_rate = Some(1e-8);
    cfg.time.snapshots = 401;

    let g = cfg.grid()?;
    let p = cfg.params()?;
    let m = run_member(&cfg, f64::NAN, "band".into(), None)?;
    let fin = &m.trajectory.final_state;
    let rep = detect_steady(&g, &p, &m.records, fin, 1e-8)?;
    println!(
        "stopped at t = {} after {} steps (converged: {})",
        fin.t, m.trajectory.steps, rep.converged
    );
    println!(
        "mu_inf    measured {:.10}  predicted {:.10}",
        rep.mu_inf_measured, rep.mu_inf_formula
    );
    println!(
        "theta_inf measured {:.10}  predicted {:.10}",
        rep.theta_inf_measured, rep.theta_inf_formula
    );
    let tail: Vec<_> = m
        .snapshots
        .iter()
        .filter(|s| s.t >= 0.1 * fin.t && s.t < fin.t)
        .cloned()
        .collect();
    for s in tail.iter().step_by(5) {
        println!(
            "  t {:>8.3}  distance to rest {:.3e}",
            s.t,
            h1_distance(&g, s, fin)?
        );
    }
    println!("decay fit: {:?}", fit_rate(&g, &tail, fin)?);
    Ok(())
}
