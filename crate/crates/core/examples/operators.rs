//! Discrete operators on the periodic strip: second-order convergence of the
//! bulk Laplacian and the flux term of the mass balance.
//!
//! cargo run --release --example operators

use std::f64::consts::TAU;

use bsch::{Flux, Grid};

fn main() -> bsch::Result<()> {
    let (lx, ly) = (4.0, 2.0);
    let kx = TAU / lx;
    let ky = std::f64::consts::PI / ly;
    let mut prev: Option<f64> = None;
    for n in [16, 32, 64, 128] {
        let g = Grid::new(n, n / 2 + 1, lx, ly)?;
        // Zero normal derivative at both rows, so no flux is needed.
        let u = g.bulk_from_fn(|x, y| (kx * x).sin() * (ky * y).cos());
        let exact = u.map(|v| -(kx * kx + ky * ky) * v);
        let err = g
            .laplace_bulk(&u, Flux::NoFlux)?
            .lin_comb(1.0, &exact, -1.0)
            .max_abs();
        let order = prev.map(|p| (p / err).log2());
        println!(
            "{n:>4} x {:<4} max error {err:.3e}  order {}",
            n / 2 + 1,
            order.map_or("-".into(), |o| format!("{o:.3}"))
        );
        prev = Some(err);
    }

    let g = Grid::new(32, 9, lx, ly)?;
    let u = g.bulk_from_fn(|x, y| (kx * x).cos() + y * y);
    let flux = g.surf_from_fn(|_, x| 0.5 + 0.1 * (kx * x).sin());
    let lap = g.laplace_bulk(&u, Flux::Supplied(&flux))?;
    println!(
        "\nmass balance: integral of Laplacian {:.15}, boundary flux {:.15}",
        g.integrate_bulk(&lap)?,
        g.integrate_surface(&flux)?
    );
    Ok(())
}
