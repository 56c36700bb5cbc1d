//! One implicit step from seeded noise, with both linear solvers.
//!
//! cargo run --release --example single_step

use bsch::experiments::generate;
use bsch::stepper::Stepper;
use bsch::{Grid, InitialData, LinearSolver, ModelParams, Potential, StepperConfig};

fn main() -> bsch::Result<()> {
    let g = Grid::new(32, 16, 8.0, 4.0)?;
    let p = ModelParams::new(1.0, Potential::logarithmic(1.0, 2.0)?);
    let s0 = generate(&g, &InitialData::default())?;
    for solver in [
        LinearSolver::DirectSparse,
        LinearSolver::BiCGStab {
            tol: 1e-12,
            max_iter: 200,
        },
    ] {
        let cfg = StepperConfig::new(1e-2)?.with_solver(solver);
        let mut stepper = Stepper::new(&g, &p, &cfg)?;
        let out = stepper.step(&s0)?;
        let r = out.report;
        println!("{solver:?}");
        println!(
            "  newton {} residual {:.2e} energy {:.10} -> {:.10} rate {:.3e}",
            r.newton_iters, r.final_residual, r.energy_before, r.energy_after, r.rate
        );
        println!(
            "  bulk mass {:.3e} -> {:.3e}",
            g.integrate_bulk(&s0.phi)?,
            g.integrate_bulk(&out.state.phi)?
        );
    }
    Ok(())
}
