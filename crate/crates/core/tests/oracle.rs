mod common;

use bsch::grid::Flux;
use bsch::model::{chemical_potentials, energy};
use bsch::stepper::Stepper;
use bsch::{Grid, LinearSolver, ModelParams, Potential, StepperConfig};
use common::{log_beta, log_pi, max_diff, oracle_step, random_state, Dense};
use nalgebra::DVector;

fn grids() -> Vec<Grid> {
    vec![
        Grid::new(8, 4, 2.0, 1.5).unwrap(),
        Grid::new(12, 7, 3.0, 2.0).unwrap(),
        Grid::new(16, 5, 6.0, 1.0).unwrap(),
    ]
}

fn vec_of(s: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(s)
}

#[test]
fn laplacians_match_dense_energy_gradients() {
    for g in grids() {
        let d = Dense::new(&g);
        let s = random_state(&g, 3, 0.0, 1.0, false);
        let flux = s.psi.map(|v| 2.0 * v - 0.3);
        let lap = g.laplace_bulk(&s.phi, Flux::NoFlux).unwrap();
        let dense = d.lap() * vec_of(s.phi.as_slice());
        assert!(max_diff(lap.as_slice(), dense.as_slice()) < 1e-10);
        let lap_g = g.laplace_bulk(&s.phi, Flux::Supplied(&flux)).unwrap();
        let dense_g = dense + d.flux_map() * vec_of(flux.as_slice());
        assert!(max_diff(lap_g.as_slice(), dense_g.as_slice()) < 1e-10);
        let ls = g.laplace_surface(&s.psi).unwrap();
        let dense_s = d.lap_gamma() * vec_of(s.psi.as_slice());
        assert!(max_diff(ls.as_slice(), dense_s.as_slice()) < 1e-10);
    }
}

#[test]
fn energy_matches_dense_sum() {
    let pot = Potential::logarithmic(1.0, 2.0).unwrap();
    for g in grids() {
        let d = Dense::new(&g);
        let s = random_state(&g, 9, 0.1, 0.6, false);
        for k in [0.5, 2.0] {
            let p = ModelParams::new(k, pot);
            let e = energy(&g, &p, &s).unwrap().total;
            let de = d.energy(pot, k, &vec_of(s.phi.as_slice()), &vec_of(s.psi.as_slice()));
            assert!((e - de).abs() < 1e-12 * de.abs().max(1.0), "{e} vs {de}");
        }
    }
}

#[test]
fn chemical_potentials_match_dense_formula() {
    let pot = Potential::logarithmic(0.8, 2.0).unwrap();
    for g in grids() {
        let d = Dense::new(&g);
        let s = random_state(&g, 5, -0.1, 0.5, false);
        let k = 0.7;
        let p = ModelParams::new(k, pot);
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let phi = vec_of(s.phi.as_slice());
        let psi = vec_of(s.psi.as_slice());
        let flux = (&psi - d.trace_map() * &phi) / k;
        let mu = -(d.lap() * &phi + d.flux_map() * &flux)
            + phi.map(|r| log_beta(pot, r) + log_pi(pot, r));
        let theta =
            -(d.lap_gamma() * &psi) + &flux + psi.map(|r| log_beta(pot, r) + log_pi(pot, r));
        assert!(max_diff(c.mu.as_slice(), mu.as_slice()) < 1e-9);
        assert!(max_diff(c.theta.as_slice(), theta.as_slice()) < 1e-9);
    }
}

#[test]
fn implicit_step_matches_dense_fixed_point() {
    let g = Grid::new(8, 4, 2.0, 1.5).unwrap();
    let d = Dense::new(&g);
    let pot = Potential::logarithmic(1.0, 2.0).unwrap();
    for k in [0.0, 0.5, 2.0] {
        for sigma in [0.0, 0.1] {
            for solver in [
                LinearSolver::DirectSparse,
                LinearSolver::BiCGStab {
                    tol: 1e-13,
                    max_iter: 100,
                },
            ] {
                let p = ModelParams::new(k, pot).with_sigma(sigma);
                let old = random_state(&g, 17, 0.1, 0.4, k == 0.0);
                let dt = 0.01;
                let cfg = StepperConfig::new(dt).unwrap().with_solver(solver);
                let out = Stepper::new(&g, &p, &cfg).unwrap().step(&old).unwrap();
                let o = oracle_step(&d, &p, &old, dt);
                assert!(
                    o.residual < 1e-13,
                    "oracle did not converge: {}",
                    o.residual
                );
                let e_phi = max_diff(out.state.phi.as_slice(), o.phi.as_slice());
                let e_psi = max_diff(out.state.psi.as_slice(), o.psi.as_slice());
                assert!(
                    e_phi < 1e-8 && e_psi < 1e-8,
                    "K={k} sigma={sigma}: {e_phi:e} {e_psi:e}"
                );
                let e_mu = max_diff(out.chem.mu.as_slice(), o.mu.as_slice());
                let e_theta = max_diff(out.chem.theta.as_slice(), o.theta.as_slice());
                let e_g = max_diff(out.flux.as_slice(), o.flux.as_slice());
                assert!(
                    e_mu < 1e-7 && e_theta < 1e-7 && e_g < 1e-7,
                    "K={k}: {e_mu:e} {e_theta:e} {e_g:e}"
                );
            }
        }
    }
}
