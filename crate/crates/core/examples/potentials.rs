//! Logarithmic and quartic potentials next to their Yosida regularizations.
//!
//! cargo run --release --example potentials

use bsch::{Potential, YosidaApprox};

fn main() -> bsch::Result<()> {
    let log = Potential::logarithmic(1.0, 2.0)?;
    println!("{:>8} {:>12} {:>12} {:>12}", "r", "F", "F'", "beta'");
    for r in [-0.999, -0.9, -0.5, 0.0, 0.5, 0.9, 0.999] {
        println!(
            "{r:>8} {:>12.6} {:>12.6} {:>12.4}",
            log.density(r)?,
            log.derivative(r)?,
            log.beta_prime(r)?
        );
    }

    println!("\nregularized beta at r = 0.9 and r = 1.5");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let y = YosidaApprox::new(log, eps)?;
        let (b9, j9) = y.eval(0.9)?;
        let (b15, j15) = y.eval(1.5)?;
        println!("  eps {eps:e}: beta_eps(0.9) = {b9:.6} (J = {j9:.6}), beta_eps(1.5) = {b15:.4} (J = {j15:.9})");
    }
    println!("  exact beta(0.9) = {:.6}", log.beta(0.9)?);

    let q = Potential::Quartic;
    println!(
        "\nquartic: F(0) = {}, F(1) = {}, F'(0.5) = {}",
        q.density(0.0)?,
        q.density(1.0)?,
        q.derivative(0.5)?
    );
    Ok(())
}
