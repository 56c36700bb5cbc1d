//! Coupled state, total free energy, chemical potentials and the residual of
//! the time-discrete system.
//!
//! The discrete energy is
//!
//! ```text
//! E_h = D_Ω(φ) + Σ w F(φ) + D_Γ(ψ) + Σ h_x G(ψ) + (χ(K)/2) Σ h_x (ψ − φ|_Γ)²
//! ```
//!
//! and `(μ, θ)` are its gradients with respect to the quadrature inner
//! products. The bulk–surface coupling enters through one outward flux `g`
//! per ring node: it sets the mirror ghosts of `φ` inside `−Δ_h φ` and is
//! the `∂_n φ` term of the surface chemical potential. For `K > 0` it is
//! `g = (ψ − φ|_Γ)/K`; for `K = 0` the ring rows of `φ` are identified with
//! `ψ` and `g` becomes a multiplier fixed by the bulk mass balance on the
//! ring rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BulkField, Flux, Grid, SurfField};
use crate::potentials::{Potential, YosidaApprox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Transmission parameter `K ≥ 0`; `K = 0` is the Dirichlet transmission
    /// `φ|_Γ = ψ`.
    pub k: f64,
    /// Viscous regularization `σ ≥ 0`.
    pub sigma: f64,
    pub potential_bulk: Potential,
    pub potential_surf: Potential,
    /// Moreau-Yosida parameter; `None` uses the exact `β`.
    pub yosida_eps: Option<f64>,
    /// Scaling `ϱ ≥ 1` of the surface regularization.
    pub yosida_rho: f64,
}

impl ModelParams {
    /// Same potential in the bulk and on the boundary, `σ = 0`, exact `β`.
    pub fn new(k: f64, potential: Potential) -> Self {
        Self {
            k,
            sigma: 0.0,
            potential_bulk: potential,
            potential_surf: potential,
            yosida_eps: None,
            yosida_rho: 1.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_yosida(mut self, eps: f64) -> Self {
        self.yosida_eps = Some(eps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "K must be >= 0, got {}",
                self.k
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        self.potential_bulk.validate()?;
        self.potential_surf.validate()?;
        if let Some(eps) = self.yosida_eps {
            YosidaApprox::with_rho(self.potential_surf, eps, self.yosida_rho)?;
        } else if matches!(self.potential_bulk, Potential::DoubleObstacle { .. })
            || matches!(self.potential_surf, Potential::DoubleObstacle { .. })
        {
            return Err(Error::KindMismatch(
                "the double-obstacle potential needs a Yosida regularization to be simulated"
                    .into(),
            ));
        }
        Ok(())
    }

    /// `χ(K)`: 0 for `K = 0`, `1/K` otherwise.
    pub fn chi(&self) -> f64 {
        if self.k == 0.0 {
            0.0
        } else {
            1.0 / self.k
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.k == 0.0
    }

    pub fn bulk(&self) -> Result<Nonlinearity> {
        Ok(match self.yosida_eps {
            None => Nonlinearity::Exact(self.potential_bulk),
            Some(eps) => Nonlinearity::Regularized(YosidaApprox::new(self.potential_bulk, eps)?),
        })
    }

    pub fn surf(&self) -> Result<Nonlinearity> {
        Ok(match self.yosida_eps {
            None => Nonlinearity::Exact(self.potential_surf),
            Some(eps) => Nonlinearity::Regularized(YosidaApprox::with_rho(
                self.potential_surf,
                eps,
                self.yosida_rho,
            )?),
        })
    }

    /// True when the exact singular `β` confines the state to `(−1, 1)`.
    pub fn has_barrier(&self) -> bool {
        self.yosida_eps.is_none()
            && (self.potential_bulk.is_singular() || self.potential_surf.is_singular())
    }
}

/// Convex/concave pair as used by the solver: exact `β` or its Yosida
/// regularization, plus the explicit `π`.
#[derive(Debug, Clone, Copy)]
pub enum Nonlinearity {
    Exact(Potential),
    Regularized(YosidaApprox),
}

impl Nonlinearity {
    pub fn potential(&self) -> Potential {
        match self {
            Nonlinearity::Exact(p) => *p,
            Nonlinearity::Regularized(y) => y.base,
        }
    }

    pub fn convex(&self, r: f64) -> Result<f64> {
        match self {
            Nonlinearity::Exact(p) => p.beta(r),
            Nonlinearity::Regularized(y) => y.beta(r),
        }
    }

    pub fn convex_prime(&self, r: f64) -> Result<f64> {
        match self {
            Nonlinearity::Exact(p) => p.beta_prime(r),
            Nonlinearity::Regularized(y) => y.beta_prime(r),
        }
    }

    pub fn convex_energy(&self, r: f64) -> Result<f64> {
        match self {
            Nonlinearity::Exact(p) => p.beta_hat(r),
            Nonlinearity::Regularized(y) => y.envelope(r),
        }
    }

    pub fn concave(&self, r: f64) -> f64 {
        self.potential().pi(r)
    }

    pub fn concave_energy(&self, r: f64) -> f64 {
        self.potential().pi_hat(r)
    }

    pub fn density(&self, r: f64) -> Result<f64> {
        Ok(self.convex_energy(r)? + self.concave_energy(r))
    }

    pub fn derivative(&self, r: f64) -> Result<f64> {
        Ok(self.convex(r)? + self.concave(r))
    }
}

/// `(φ, ψ)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phi: BulkField,
    pub psi: SurfField,
    pub t: f64,
}

impl PhaseState {
    pub fn new(g: &Grid, phi: BulkField, psi: SurfField, t: f64) -> Result<Self> {
        g.check_bulk(&phi)?;
        g.check_surf(&psi)?;
        Ok(Self { phi, psi, t })
    }

    pub fn constant(g: &Grid, m: f64, m_surf: f64) -> Self {
        Self {
            phi: BulkField::constant(g.nx(), g.ny(), m),
            psi: SurfField::constant(g.nx(), m_surf),
            t: 0.0,
        }
    }

    /// `max(‖φ‖_∞, ‖ψ‖_∞)`.
    pub fn sup_norm(&self) -> f64 {
        self.phi.max_abs().max(self.psi.max_abs())
    }

    /// Copy with the ring rows of `φ` replaced by `ψ`.
    pub fn trace_identified(&self, g: &Grid) -> Result<Self> {
        let mut out = self.clone();
        g.set_trace(&mut out.phi, &self.psi)?;
        Ok(out)
    }
}

/// `(μ, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemState {
    pub mu: BulkField,
    pub theta: SurfField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub bulk_dirichlet: f64,
    pub bulk_potential: f64,
    pub surf_dirichlet: f64,
    pub surf_potential: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Previous state and step for the viscous terms `σ(s − s_prev)/dt`.
#[derive(Debug, Clone, Copy)]
pub struct Previous<'a> {
    pub state: &'a PhaseState,
    pub dt: f64,
}

fn check_state(g: &Grid, s: &PhaseState) -> Result<()> {
    g.check_bulk(&s.phi)?;
    g.check_surf(&s.psi)
}

pub fn energy(g: &Grid, p: &ModelParams, s: &PhaseState) -> Result<EnergyBreakdown> {
    check_state(g, s)?;
    let nb = p.bulk()?;
    let ns = p.surf()?;
    let bulk_dirichlet = g.dirichlet_energy_bulk(&s.phi)?;
    let surf_dirichlet = g.dirichlet_energy_surface(&s.psi)?;
    let mut bulk_potential = 0.0;
    for j in 0..g.ny() {
        let mut row = 0.0;
        for &v in s.phi.row(j) {
            row += nb.density(v)?;
        }
        bulk_potential += g.bulk_weight(j) * row;
    }
    let mut surf_potential = 0.0;
    for &v in s.psi.as_slice() {
        surf_potential += ns.density(v)?;
    }
    surf_potential *= g.surf_weight();
    let penalty = if p.is_dirichlet() {
        0.0
    } else {
        let tr = g.trace(&s.phi)?;
        let mismatch = s.psi.lin_comb(1.0, &tr, -1.0);
        0.5 * p.chi() * g.inner_surface(&mismatch, &mismatch)?
    };
    Ok(EnergyBreakdown {
        bulk_dirichlet,
        bulk_potential,
        surf_dirichlet,
        surf_potential,
        penalty,
        total: bulk_dirichlet + bulk_potential + surf_dirichlet + surf_potential + penalty,
    })
}

/// Robin flux `(ψ − φ|_Γ)/K` (only meaningful for `K > 0`).
pub fn robin_flux(g: &Grid, k: f64, s: &PhaseState) -> Result<SurfField> {
    let tr = g.trace(&s.phi)?;
    Ok(s.psi.lin_comb(1.0 / k, &tr, -1.0 / k))
}

/// Everything the pointwise chemical-potential formulas need.
pub(crate) struct Assembly<'a> {
    pub phi: &'a BulkField,
    pub psi: &'a SurfField,
    /// State at which `π` is evaluated (the implicit one, or the old one for
    /// the convex split).
    pub explicit: &'a PhaseState,
    pub viscous: Option<Previous<'a>>,
    pub flux: &'a SurfField,
}

/// `μ = σ(φ − φ_p)/dt − Δ_h^g φ + β(φ) + π(φ_e)` and
/// `θ = σ(ψ − ψ_p)/dt + g − Δ_Γ ψ + β_Γ(ψ) + π_Γ(ψ_e)`.
pub(crate) fn assemble(g: &Grid, p: &ModelParams, a: &Assembly<'_>) -> Result<ChemState> {
    let nb = p.bulk()?;
    let ns = p.surf()?;
    let lap = g.laplace_bulk(a.phi, Flux::Supplied(a.flux))?;
    let mut mu = lap.map(|v| -v);
    {
        let m = mu.as_mut_slice();
        let phi = a.phi.as_slice();
        let phi_e = a.explicit.phi.as_slice();
        for k in 0..m.len() {
            m[k] += nb.convex(phi[k])? + nb.concave(phi_e[k]);
        }
        if p.sigma > 0.0 {
            let prev = a.viscous.ok_or(Error::MissingPrev)?;
            let c = p.sigma / prev.dt;
            for (k, &old) in prev.state.phi.as_slice().iter().enumerate() {
                m[k] += c * (phi[k] - old);
            }
        }
    }
    let lap_s = g.laplace_surface(a.psi)?;
    let mut theta = lap_s.map(|v| -v);
    {
        let t = theta.as_mut_slice();
        let psi = a.psi.as_slice();
        let psi_e = a.explicit.psi.as_slice();
        let flux = a.flux.as_slice();
        for k in 0..t.len() {
            t[k] += flux[k] + ns.convex(psi[k])? + ns.concave(psi_e[k]);
        }
        if p.sigma > 0.0 {
            let prev = a.viscous.ok_or(Error::MissingPrev)?;
            let c = p.sigma / prev.dt;
            for (k, &old) in prev.state.psi.as_slice().iter().enumerate() {
                t[k] += c * (psi[k] - old);
            }
        }
    }
    Ok(ChemState { mu, theta })
}

/// Chemical potentials of a state.
///
/// `π` is evaluated at `s` itself. For `K > 0` the ghosts carry the Robin
/// flux. For `K = 0` the ring rows of `φ` are replaced by `ψ` and the flux
/// is the one-sided normal derivative of the identified field; inside a time
/// step the flux is instead the multiplier returned by [`residual`].
pub fn chemical_potentials(
    g: &Grid,
    p: &ModelParams,
    s: &PhaseState,
    prev: Option<Previous<'_>>,
) -> Result<ChemState> {
    check_state(g, s)?;
    if p.sigma > 0.0 && prev.is_none() {
        return Err(Error::MissingPrev);
    }
    if p.is_dirichlet() {
        let ident = s.trace_identified(g)?;
        let flux = g.normal_derivative(&ident.phi)?;
        assemble(
            g,
            p,
            &Assembly {
                phi: &ident.phi,
                psi: &ident.psi,
                explicit: &ident,
                viscous: prev,
                flux: &flux,
            },
        )
    } else {
        let flux = robin_flux(g, p.k, s)?;
        assemble(
            g,
            p,
            &Assembly {
                phi: &s.phi,
                psi: &s.psi,
                explicit: s,
                viscous: prev,
                flux: &flux,
            },
        )
    }
}

/// Residual of one convex-split step together with the chemical potentials
/// and boundary flux it was evaluated with.
#[derive(Debug, Clone)]
pub struct Residual {
    pub r_phi: BulkField,
    pub r_psi: SurfField,
    pub chem: ChemState,
    pub flux: SurfField,
}

impl Residual {
    pub fn max_norm(&self) -> f64 {
        self.r_phi.max_abs().max(self.r_psi.max_abs())
    }
}

/// `r_φ = (φ_new − φ_old)/dt − Δ_h μ`, `r_ψ = (ψ_new − ψ_old)/dt − Δ_Γ θ`,
/// with `β` at the new state and `π` at the old one.
///
/// For `K = 0` the ring rows of `φ_new` are identified with `ψ_new` and the
/// ring values of `μ` are eliminated through the bulk equation on the ring
/// rows, so `r_φ` vanishes there and the transmission enters through `r_ψ`.
pub fn residual(
    g: &Grid,
    p: &ModelParams,
    s_new: &PhaseState,
    s_old: &PhaseState,
    dt: f64,
) -> Result<Residual> {
    check_state(g, s_new)?;
    check_state(g, s_old)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let viscous = Some(Previous { state: s_old, dt });
    let (phi, chem, flux) = if p.is_dirichlet() {
        let ident = s_new.trace_identified(g)?;
        let zero = g.surf_zeros();
        let mut chem = assemble(
            g,
            p,
            &Assembly {
                phi: &ident.phi,
                psi: &ident.psi,
                explicit: s_old,
                viscous,
                flux: &zero,
            },
        )?;
        let flux = eliminate_ring_mu(g, &ident.phi, &s_old.phi, dt, &mut chem.mu)?;
        for (t, f) in chem.theta.as_mut_slice().iter_mut().zip(flux.as_slice()) {
            *t += f;
        }
        (ident.phi, chem, flux)
    } else {
        let flux = robin_flux(g, p.k, s_new)?;
        let chem = assemble(
            g,
            p,
            &Assembly {
                phi: &s_new.phi,
                psi: &s_new.psi,
                explicit: s_old,
                viscous,
                flux: &flux,
            },
        )?;
        (s_new.phi.clone(), chem, flux)
    };
    let lap_mu = g.laplace_bulk(&chem.mu, Flux::NoFlux)?;
    let r_phi = phi
        .lin_comb(1.0 / dt, &s_old.phi, -1.0 / dt)
        .lin_comb(1.0, &lap_mu, -1.0);
    let lap_theta = g.laplace_surface(&chem.theta)?;
    let r_psi = s_new
        .psi
        .lin_comb(1.0 / dt, &s_old.psi, -1.0 / dt)
        .lin_comb(1.0, &lap_theta, -1.0);
    Ok(Residual {
        r_phi,
        r_psi,
        chem,
        flux,
    })
}

/// Given `μ` assembled with zero flux, solve the bulk equation on each ring
/// row for the ring values of `μ`, write them into `mu` and return the flux
/// `g = (h_y/2)(μ_noflux − μ_ring)` that produces them.
fn eliminate_ring_mu(
    g: &Grid,
    phi: &BulkField,
    phi_old: &BulkField,
    dt: f64,
    mu: &mut BulkField,
) -> Result<SurfField> {
    let (nx, ny) = (g.nx(), g.ny());
    let cx = 1.0 / (g.hx() * g.hx());
    let cy = 1.0 / (g.hy() * g.hy());
    let mut flux = g.surf_zeros();
    for (ring, row, next) in [(0usize, 0usize, 1usize), (1, ny - 1, ny - 2)] {
        let rhs: Vec<f64> = (0..nx)
            .map(|i| (phi.get(i, row) - phi_old.get(i, row)) / dt - 2.0 * cy * mu.get(i, next))
            .collect();
        let ring_mu = solve_circulant_tridiagonal(-2.0 * cx - 2.0 * cy, cx, &rhs);
        for (i, &m) in ring_mu.iter().enumerate() {
            let noflux = mu.get(i, row);
            flux.as_mut_slice()[ring * nx + i] = 0.5 * g.hy() * (noflux - m);
            mu.set(i, row, m);
        }
    }
    Ok(flux)
}

/// Solve the periodic system `o·x[i−1] + d·x[i] + o·x[i+1] = rhs[i]`
/// (cyclic Thomas with a Sherman-Morrison correction).
pub(crate) fn solve_circulant_tridiagonal(d: f64, o: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -d;
    let mut diag = vec![d; n];
    diag[0] = d - gamma;
    diag[n - 1] = d - o * o / gamma;
    let thomas = |r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut beta = diag[0];
        x[0] = r[0] / beta;
        for i in 1..n {
            c[i] = o / beta;
            beta = diag[i] - o * c[i];
            x[i] = (r[i] - o * x[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i + 1] * x[i + 1];
        }
        x
    };
    let mut x = thomas(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = o;
    let z = thomas(&u);
    let fact = (x[0] + o * x[n - 1] / gamma) / (1.0 + z[0] + o * z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= fact * zi;
    }
    x
}

/// Flux `g` implied by an assembled `μ` on the ring rows:
/// `g = (h_y/2)(β(φ) + π(φ) − Δ_h φ − μ)` with no-flux `Δ_h`.
///
/// `explicit` is the state at which `π` was evaluated (`s` itself outside a
/// step). Viscous terms are not included.
pub fn recovered_flux(
    g: &Grid,
    p: &ModelParams,
    s: &PhaseState,
    explicit: &PhaseState,
    chem: &ChemState,
) -> Result<SurfField> {
    let nb = p.bulk()?;
    let lap = g.laplace_bulk(&s.phi, Flux::NoFlux)?;
    let mut flux = g.surf_zeros();
    let nx = g.nx();
    for (ring, row) in [(0usize, 0usize), (1, g.ny() - 1)] {
        for i in 0..nx {
            let v = s.phi.get(i, row);
            let local = nb.convex(v)? + nb.concave(explicit.phi.get(i, row)) - lap.get(i, row);
            flux.as_mut_slice()[ring * nx + i] = 0.5 * g.hy() * (local - chem.mu.get(i, row));
        }
    }
    Ok(flux)
}

/// Discrete steady-state constants `(μ∞, θ∞)` evaluated from a state:
/// `μ∞ = |Ω|⁻¹[∫(β + π)(φ) − ∫_Γ ∂_nφ]`, `θ∞ = |Γ|⁻¹∫_Γ(β_Γ + π_Γ)(ψ) + ∂_nφ`.
///
/// For `K > 0`, `∂_nφ` is the Robin flux. For `K = 0` the flux is eliminated
/// using the stationary bulk equation on the ring rows, which turns the bulk
/// formula into the interior-row mean of `β(φ) + π(φ) − Δ_h φ`.
pub fn stationary_constants(g: &Grid, p: &ModelParams, s: &PhaseState) -> Result<(f64, f64)> {
    check_state(g, s)?;
    let nb = p.bulk()?;
    let ns = p.surf()?;
    let flux = if p.is_dirichlet() {
        let ident = s.trace_identified(g)?;
        let lap = g.laplace_bulk(&ident.phi, Flux::NoFlux)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 1..g.ny() - 1 {
            for i in 0..g.nx() {
                let v = ident.phi.get(i, j);
                num += g.bulk_weight(j) * (nb.derivative(v)? - lap.get(i, j));
                den += g.bulk_weight(j);
            }
        }
        let mu_inf = num / den;
        let mut flux = g.surf_zeros();
        let nx = g.nx();
        for (ring, row) in [(0usize, 0usize), (1, g.ny() - 1)] {
            for i in 0..nx {
                let v = ident.phi.get(i, row);
                flux.as_mut_slice()[ring * nx + i] =
                    0.5 * g.hy() * (nb.derivative(v)? - lap.get(i, row) - mu_inf);
            }
        }
        flux
    } else {
        robin_flux(g, p.k, s)?
    };
    let mut bulk = 0.0;
    for j in 0..g.ny() {
        let mut row = 0.0;
        for &v in s.phi.row(j) {
            row += nb.derivative(v)?;
        }
        bulk += g.bulk_weight(j) * row;
    }
    let flux_total = g.integrate_surface(&flux)?;
    let mu_inf = (bulk - flux_total) / g.bulk_measure();
    let mut surf = 0.0;
    for &v in s.psi.as_slice() {
        surf += ns.derivative(v)?;
    }
    let theta_inf = (g.surf_weight() * surf + flux_total) / g.surf_measure();
    Ok((mu_inf, theta_inf))
}

/// `(∫_Γ ∂_nφ (φ|_Γ − ψ), −(1/K)∫_Γ (ψ − φ|_Γ)²)` with `∂_nφ` recovered from
/// the assembled chemical potential. Both entries agree for `K > 0`.
pub fn robin_exchange(g: &Grid, p: &ModelParams, s: &PhaseState) -> Result<(f64, f64)> {
    if p.is_dirichlet() {
        return Err(Error::InvalidParameter(
            "the Robin exchange needs K > 0".into(),
        ));
    }
    let chem = chemical_potentials(g, &ModelParams { sigma: 0.0, ..*p }, s, None)?;
    let dn = recovered_flux(g, p, s, s, &chem)?;
    let tr = g.trace(&s.phi)?;
    let jump = tr.lin_comb(1.0, &s.psi, -1.0);
    let lhs = g.inner_surface(&dn, &jump)?;
    let rhs = -p.chi() * g.inner_surface(&jump, &jump)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log12() -> Potential {
        Potential::logarithmic(1.0, 2.0).unwrap()
    }

    fn wavy(g: &Grid, amp: f64) -> PhaseState {
        let phi = g.bulk_from_fn(|x, y| amp * ((1.3 * x).sin() + (0.7 * y + x).cos()));
        let psi = g.surf_from_fn(|r, x| {
            amp * if r == crate::grid::Ring::Top {
                (2.0 * x).cos()
            } else {
                (x + 0.3).sin()
            }
        });
        PhaseState::new(g, phi, psi, 0.0).unwrap()
    }

    #[test]
    fn constant_state_energy_and_chemistry() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        let pot = log12();
        for k in [0.0, 0.5, 3.0] {
            let p = ModelParams::new(k, pot);
            let s = PhaseState::constant(&g, 0.3, 0.3);
            let e = energy(&g, &p, &s).unwrap();
            assert_eq!(e.bulk_dirichlet, 0.0);
            assert_eq!(e.surf_dirichlet, 0.0);
            assert_eq!(e.penalty, 0.0);
            let f = pot.density(0.3).unwrap();
            assert!((e.total - (8.0 * f + 8.0 * f)).abs() < 1e-12);
            let c = chemical_potentials(&g, &p, &s, None).unwrap();
            let fp = pot.derivative(0.3).unwrap();
            assert!(c.mu.as_slice().iter().all(|m| (m - fp).abs() < 1e-12));
            assert!(c.theta.as_slice().iter().all(|t| (t - fp).abs() < 1e-12));
        }
    }

    #[test]
    fn dirichlet_transmission_has_no_penalty() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        let s = PhaseState::constant(&g, 0.1, 0.4);
        let e = energy(&g, &ModelParams::new(0.0, log12()), &s).unwrap();
        assert_eq!(e.penalty, 0.0);
        let e = energy(&g, &ModelParams::new(2.0, log12()), &s).unwrap();
        assert!((e.penalty - 0.25 * 0.09 * 8.0).abs() < 1e-14);
        let parts =
            e.bulk_dirichlet + e.bulk_potential + e.surf_dirichlet + e.surf_potential + e.penalty;
        assert!((parts - e.total).abs() < 1e-12);
    }

    #[test]
    fn robin_flux_enters_theta() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        let p = ModelParams::new(2.0, log12());
        let s = PhaseState::constant(&g, 0.1, 0.3);
        let flux = robin_flux(&g, p.k, &s).unwrap();
        assert!(flux.as_slice().iter().all(|f| (f - 0.1).abs() < 1e-15));
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let expect = log12().derivative(0.3).unwrap() + 0.1;
        assert!(c
            .theta
            .as_slice()
            .iter()
            .all(|t| (t - expect).abs() < 1e-12));
        let back = recovered_flux(&g, &p, &s, &s, &c).unwrap();
        assert!(back.as_slice().iter().all(|f| (f - 0.1).abs() < 1e-12));
    }

    #[test]
    fn viscous_terms_need_previous_state() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        let p = ModelParams::new(1.0, log12()).with_sigma(0.1);
        let s = PhaseState::constant(&g, 0.1, 0.1);
        assert!(matches!(
            chemical_potentials(&g, &p, &s, None),
            Err(Error::MissingPrev)
        ));
        assert!(chemical_potentials(&g, &p, &s, Some(Previous { state: &s, dt: 0.1 })).is_ok());
    }

    #[test]
    fn domain_errors_propagate() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        let p = ModelParams::new(1.0, log12());
        let s = PhaseState::constant(&g, 1.0, 0.0);
        assert!(matches!(energy(&g, &p, &s), Err(Error::Domain { .. })));
        assert!(energy(&g, &p.with_yosida(0.1), &s).is_ok());
    }

    #[test]
    fn stationary_residual_vanishes() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        for k in [0.0, 1.0] {
            let p = ModelParams::new(k, log12()).with_sigma(0.2);
            let s = PhaseState::constant(&g, -0.2, -0.2);
            let r = residual(&g, &p, &s, &s, 0.01).unwrap();
            assert!(r.max_norm() < 1e-12, "K={k}: {}", r.max_norm());
        }
    }

    #[test]
    fn residual_mass_compatibility() {
        let g = Grid::new(10, 6, 5.0, 3.0).unwrap();
        let old = wavy(&g, 0.3);
        let new = wavy(&g, 0.25);
        for k in [0.0, 0.7] {
            let p = ModelParams::new(k, log12());
            let r = residual(
                &g,
                &p,
                &new.trace_identified(&g).unwrap(),
                &old.trace_identified(&g).unwrap(),
                0.05,
            )
            .unwrap();
            let mass = g.integrate_bulk(&r.r_phi).unwrap()
                - g.integrate_bulk(&new.trace_identified(&g).unwrap().phi.lin_comb(
                    1.0 / 0.05,
                    &old.trace_identified(&g).unwrap().phi,
                    -1.0 / 0.05,
                ))
                .unwrap();
            assert!(mass.abs() < 1e-12, "K={k}: {mass}");
        }
    }

    #[test]
    fn dirichlet_residual_vanishes_on_ring_rows() {
        let g = Grid::new(10, 6, 5.0, 3.0).unwrap();
        let old = wavy(&g, 0.3).trace_identified(&g).unwrap();
        let new = wavy(&g, 0.2).trace_identified(&g).unwrap();
        let r = residual(&g, &ModelParams::new(0.0, log12()), &new, &old, 0.05).unwrap();
        for row in [0, g.ny() - 1] {
            assert!(r.r_phi.row(row).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn circulant_solver() {
        let rhs: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let (d, o) = (-5.0, 1.5);
        let x = solve_circulant_tridiagonal(d, o, &rhs);
        let n = rhs.len();
        for i in 0..n {
            let lhs = o * x[(i + n - 1) % n] + d * x[i] + o * x[(i + 1) % n];
            assert!((lhs - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn steady_formulas_at_constant_state() {
        let g = Grid::new(8, 5, 4.0, 2.0).unwrap();
        for k in [0.0, 1.0] {
            let p = ModelParams::new(k, log12());
            let s = PhaseState::constant(&g, 0.4, 0.4);
            let (mu, th) = stationary_constants(&g, &p, &s).unwrap();
            let fp = log12().derivative(0.4).unwrap();
            assert!((mu - fp).abs() < 1e-12 && (th - fp).abs() < 1e-12);
        }
    }

    #[test]
    fn robin_exchange_sign() {
        let g = Grid::new(10, 6, 5.0, 3.0).unwrap();
        let s = wavy(&g, 0.4);
        let (lhs, rhs) = robin_exchange(&g, &ModelParams::new(0.5, log12()), &s).unwrap();
        assert!(lhs <= 0.0);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
