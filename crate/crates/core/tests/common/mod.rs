//! Dense reference model built from the discrete energy, independent of the
//! library's stencil code.

#![allow(dead_code)]

use bsch::{Grid, ModelParams, PhaseState, Potential};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Dense {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Bulk lumped mass, diagonal.
    pub w: DVector<f64>,
    /// Bulk stiffness: `½ uᵀ S u` is the discrete Dirichlet energy.
    pub s: DMatrix<f64>,
    pub s_gamma: DMatrix<f64>,
    /// Trace: ring node `m` ↔ bulk node `trace[m]`.
    pub trace: Vec<usize>,
}

impl Dense {
    pub fn new(g: &Grid) -> Self {
        let (nx, ny) = (g.nx(), g.ny());
        let hx = g.lx() / nx as f64;
        let hy = g.ly() / (ny - 1) as f64;
        let nb = nx * ny;
        let id = |i: usize, j: usize| j * nx + i;
        let mut w = DVector::zeros(nb);
        let mut s = DMatrix::zeros(nb, nb);
        let edge = |m: &mut DMatrix<f64>, a: usize, b: usize, c: f64| {
            m[(a, a)] += c;
            m[(b, b)] += c;
            m[(a, b)] -= c;
            m[(b, a)] -= c;
        };
        for j in 0..ny {
            let ring = j == 0 || j == ny - 1;
            for i in 0..nx {
                w[id(i, j)] = hx * hy * if ring { 0.5 } else { 1.0 };
                let cx = hy / hx * if ring { 0.5 } else { 1.0 };
                edge(&mut s, id(i, j), id((i + 1) % nx, j), cx);
                if j + 1 < ny {
                    edge(&mut s, id(i, j), id(i, j + 1), hx / hy);
                }
            }
        }
        let mut s_gamma = DMatrix::zeros(2 * nx, 2 * nx);
        for r in 0..2 {
            for i in 0..nx {
                edge(&mut s_gamma, r * nx + i, r * nx + (i + 1) % nx, 1.0 / hx);
            }
        }
        let trace = (0..nx)
            .map(|i| id(i, 0))
            .chain((0..nx).map(|i| id(i, ny - 1)))
            .collect();
        Self {
            nx,
            ny,
            hx,
            hy,
            w,
            s,
            s_gamma,
            trace,
        }
    }

    pub fn nb(&self) -> usize {
        self.nx * self.ny
    }

    pub fn ns(&self) -> usize {
        2 * self.nx
    }

    /// No-flux Laplacian `−W⁻¹S`.
    pub fn lap(&self) -> DMatrix<f64> {
        let mut l = -self.s.clone();
        for (k, mut row) in l.row_iter_mut().enumerate() {
            row /= self.w[k];
        }
        l
    }

    pub fn lap_gamma(&self) -> DMatrix<f64> {
        -&self.s_gamma / self.hx
    }

    /// `W⁻¹Tᵀ`: a boundary flux `g` enters the bulk equation as `hx·g/w`.
    pub fn flux_map(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nb(), self.ns());
        for (r, &k) in self.trace.iter().enumerate() {
            m[(k, r)] = self.hx / self.w[k];
        }
        m
    }

    pub fn trace_map(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ns(), self.nb());
        for (r, &k) in self.trace.iter().enumerate() {
            m[(r, k)] = 1.0;
        }
        m
    }

    /// Discrete energy with the Robin penalty (`K > 0`).
    pub fn energy(&self, pot: Potential, k: f64, phi: &DVector<f64>, psi: &DVector<f64>) -> f64 {
        let f = |r: f64| log_density(pot, r);
        let mut e = 0.5 * phi.dot(&(&self.s * phi)) + 0.5 * psi.dot(&(&self.s_gamma * psi));
        e += phi
            .iter()
            .zip(self.w.iter())
            .map(|(&r, &w)| w * f(r))
            .sum::<f64>();
        e += psi.iter().map(|&r| self.hx * f(r)).sum::<f64>();
        if k > 0.0 {
            let pen: f64 = self
                .trace
                .iter()
                .zip(psi.iter())
                .map(|(&b, &v)| (v - phi[b]).powi(2))
                .sum();
            e += 0.5 / k * self.hx * pen;
        }
        e
    }
}

/// `(Θ/2)[(1+r)ln(1+r) + (1−r)ln(1−r)] − (Θc/2)r²`.
pub fn log_density(pot: Potential, r: f64) -> f64 {
    let Potential::Logarithmic { theta, theta_c } = pot else {
        panic!("logarithmic only");
    };
    0.5 * theta * ((1.0 + r) * (1.0 + r).ln() + (1.0 - r) * (1.0 - r).ln()) - 0.5 * theta_c * r * r
}

pub fn log_beta(pot: Potential, r: f64) -> f64 {
    let Potential::Logarithmic { theta, .. } = pot else {
        panic!("logarithmic only");
    };
    0.5 * theta * ((1.0 + r) / (1.0 - r)).ln()
}

pub fn log_beta_prime(pot: Potential, r: f64) -> f64 {
    let Potential::Logarithmic { theta, .. } = pot else {
        panic!("logarithmic only");
    };
    theta / (1.0 - r * r)
}

pub fn log_pi(pot: Potential, r: f64) -> f64 {
    let Potential::Logarithmic { theta_c, .. } = pot else {
        panic!("logarithmic only");
    };
    -theta_c * r
}

pub struct StepSolution {
    pub phi: DVector<f64>,
    pub mu: DVector<f64>,
    pub psi: DVector<f64>,
    pub theta: DVector<f64>,
    pub flux: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves one implicit step of the bulk-surface system by a damped
/// fixed-point iteration `x ← x − ω A⁻¹F(x)`, with `A` the system matrix
/// frozen at the old state.
pub fn oracle_step(d: &Dense, p: &ModelParams, old: &PhaseState, dt: f64) -> StepSolution {
    let pot = p.potential_bulk;
    let pot_s = p.potential_surf;
    let (nb, ns) = (d.nb(), d.ns());
    let n = 2 * nb + 3 * ns;
    let (o_phi, o_mu, o_psi, o_theta, o_g) = (0, nb, 2 * nb, 2 * nb + ns, 2 * nb + 2 * ns);
    let phi_o = DVector::from_column_slice(old.phi.as_slice());
    let psi_o = DVector::from_column_slice(old.psi.as_slice());
    let lap = d.lap();
    let lap_g = d.lap_gamma();
    let fmap = d.flux_map();
    let tmap = d.trace_map();
    let sig = p.sigma / dt;

    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let phi = x.rows(o_phi, nb).into_owned();
        let mu = x.rows(o_mu, nb).into_owned();
        let psi = x.rows(o_psi, ns).into_owned();
        let theta = x.rows(o_theta, ns).into_owned();
        let g = x.rows(o_g, ns).into_owned();
        let mut f = DVector::zeros(n);
        let r1 = (&phi - &phi_o) / dt - &lap * &mu;
        let beta = phi.map(|r| log_beta(pot, r));
        let pi = phi_o.map(|r| log_pi(pot, r));
        let r2 = &mu - (&phi - &phi_o) * sig + &lap * &phi + &fmap * &g - beta - pi;
        let r3 = (&psi - &psi_o) / dt - &lap_g * &theta;
        let beta_s = psi.map(|r| log_beta(pot_s, r));
        let pi_s = psi_o.map(|r| log_pi(pot_s, r));
        let r4 = &theta - (&psi - &psi_o) * sig - &g + &lap_g * &psi - beta_s - pi_s;
        let r5 = &g * p.k - &psi + &tmap * &phi;
        f.rows_mut(o_phi, nb).copy_from(&r1);
        f.rows_mut(o_mu, nb).copy_from(&r2);
        f.rows_mut(o_psi, ns).copy_from(&r3);
        f.rows_mut(o_theta, ns).copy_from(&r4);
        f.rows_mut(o_g, ns).copy_from(&r5);
        f
    };

    let mut a = DMatrix::<f64>::zeros(n, n);
    let eye_b = DMatrix::<f64>::identity(nb, nb);
    let eye_s = DMatrix::<f64>::identity(ns, ns);
    let db = DMatrix::from_diagonal(&phi_o.map(|r| log_beta_prime(pot, r)));
    let ds = DMatrix::from_diagonal(&psi_o.map(|r| log_beta_prime(pot_s, r)));
    a.view_mut((o_phi, o_phi), (nb, nb))
        .copy_from(&(&eye_b / dt));
    a.view_mut((o_phi, o_mu), (nb, nb)).copy_from(&(-&lap));
    a.view_mut((o_mu, o_mu), (nb, nb)).copy_from(&eye_b);
    a.view_mut((o_mu, o_phi), (nb, nb))
        .copy_from(&(-&eye_b * sig + &lap - db));
    a.view_mut((o_mu, o_g), (nb, ns)).copy_from(&fmap);
    a.view_mut((o_psi, o_psi), (ns, ns))
        .copy_from(&(&eye_s / dt));
    a.view_mut((o_psi, o_theta), (ns, ns)).copy_from(&(-&lap_g));
    a.view_mut((o_theta, o_theta), (ns, ns)).copy_from(&eye_s);
    a.view_mut((o_theta, o_psi), (ns, ns))
        .copy_from(&(-&eye_s * sig + &lap_g - ds));
    a.view_mut((o_theta, o_g), (ns, ns)).copy_from(&(-&eye_s));
    a.view_mut((o_g, o_g), (ns, ns)).copy_from(&(&eye_s * p.k));
    a.view_mut((o_g, o_psi), (ns, ns)).copy_from(&(-&eye_s));
    a.view_mut((o_g, o_phi), (ns, nb)).copy_from(&tmap);
    let lu = a.lu();

    let mut x = DVector::zeros(n);
    x.rows_mut(o_phi, nb).copy_from(&phi_o);
    x.rows_mut(o_psi, ns).copy_from(&psi_o);
    let omega = 0.9;
    let mut iterations = 0;
    let mut res = f64::INFINITY;
    while iterations < 20_000 {
        let f = residual(&x);
        res = f.amax();
        if res < 1e-13 {
            break;
        }
        let dx = lu.solve(&f).expect("frozen system is regular");
        x -= dx * omega;
        iterations += 1;
    }
    StepSolution {
        phi: x.rows(o_phi, nb).into_owned(),
        mu: x.rows(o_mu, nb).into_owned(),
        psi: x.rows(o_psi, ns).into_owned(),
        theta: x.rows(o_theta, ns).into_owned(),
        flux: x.rows(o_g, ns).into_owned(),
        iterations,
        residual: res,
    }
}

/// Smooth random state with values in `center ± spread`; for `identified`
/// the ring rows of `φ` equal `ψ`.
pub fn random_state(g: &Grid, seed: u64, center: f64, spread: f64, identified: bool) -> PhaseState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c): (f64, f64, f64) = (
        rng.gen_range(0.0..6.3),
        rng.gen_range(0.0..6.3),
        rng.gen_range(0.5..1.0),
    );
    let kx = std::f64::consts::TAU / g.lx();
    let mut phi = g.bulk_from_fn(|x, y| center + spread * c * ((kx * x + a).sin() * (y + b).cos()));
    for v in phi.as_mut_slice() {
        *v += 0.1 * spread * rng.gen_range(-1.0..1.0);
    }
    let psi = if identified {
        g.trace(&phi).unwrap()
    } else {
        g.surf_from_fn(|_, x| {
            center
                + 0.5 * spread * (2.0 * kx * x + b).cos()
                + 0.1 * spread * rng.gen_range(-1.0..1.0)
        })
    };
    PhaseState::new(g, phi, psi, 0.0).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
