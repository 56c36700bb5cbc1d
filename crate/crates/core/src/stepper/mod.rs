//! Convex-split implicit time stepping.
//!
//! One step solves, for the unknowns `x = [φ, μ, ψ, θ, g]`,
//!
//! ```text
//! (φ − φ_o)/dt − Δ_h μ = 0
//! μ − σ(φ − φ_o)/dt + Δ_h^g φ − β(φ) − π(φ_o) = 0
//! (ψ − ψ_o)/dt − Δ_Γ θ = 0
//! θ − σ(ψ − ψ_o)/dt − g + Δ_Γ ψ − β_Γ(ψ) − π_Γ(ψ_o) = 0
//! K g − ψ + φ|_Γ = 0
//! ```
//!
//! where `g` is the outward flux carried by the ghosts of `Δ_h^g`. The last
//! row is the Robin condition for `K > 0` and the trace identification for
//! `K = 0`, so one sparsity pattern serves every `K`.

mod linear;

pub use linear::{solve_linearized, LinearSolver, LinearStats, LinearWorkspace, SparseSystem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BulkField, Flux, Grid, SurfField};
use crate::model::{
    chemical_potentials, energy, ChemState, ModelParams, Nonlinearity, PhaseState, Previous,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub dt: f64,
    /// Max-norm of the combined Newton residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linesearch_shrink: f64,
    /// Trial iterates must satisfy `|φ|, |ψ| ≤ guard + (1 − guard)·current`.
    pub separation_guard: f64,
    pub linear_solver: LinearSolver,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton_tol: 1e-11,
            newton_max_iter: 50,
            linesearch_shrink: 0.5,
            separation_guard: 0.9,
            linear_solver: LinearSolver::DirectSparse,
        }
    }
}

impl StepperConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: LinearSolver) -> Self {
        self.linear_solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "newton_tol must be > 0, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "newton_max_iter must be positive".into(),
            ));
        }
        if !(self.linesearch_shrink > 0.0 && self.linesearch_shrink < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "linesearch_shrink must be in (0, 1), got {}",
                self.linesearch_shrink
            )));
        }
        if !(self.separation_guard > 0.0 && self.separation_guard < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "separation_guard must be in (0, 1), got {}",
                self.separation_guard
            )));
        }
        self.linear_solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    /// Residual evaluations of the Newton loop; a state that already solves
    /// the system takes one.
    pub newton_iters: usize,
    pub final_residual: f64,
    pub linesearch_backtracks: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub dt_used: f64,
    /// `max(‖φ_new − φ_old‖_∞, ‖ψ_new − ψ_old‖_∞)/dt`.
    pub rate: f64,
}

/// Result of one step: the new state, its chemical potentials and the
/// boundary flux `g`.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: PhaseState,
    pub chem: ChemState,
    pub flux: SurfField,
    pub report: StepReport,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    nb: usize,
    ns: usize,
}

impl Layout {
    fn mu(&self) -> usize {
        self.nb
    }
    fn psi(&self) -> usize {
        2 * self.nb
    }
    fn theta(&self) -> usize {
        2 * self.nb + self.ns
    }
    fn flux(&self) -> usize {
        2 * self.nb + 2 * self.ns
    }
    fn len(&self) -> usize {
        2 * self.nb + 3 * self.ns
    }
}

/// Reusable integrator for one grid and parameter set. Keeps the sparse
/// factorization cache between steps.
pub struct Stepper {
    grid: Grid,
    params: ModelParams,
    cfg: StepperConfig,
    bulk: Nonlinearity,
    surf: Nonlinearity,
    layout: Layout,
    linear: LinearWorkspace,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;
/// Ulps of `φ`, `ψ` a chemical-potential row may be off by and still count as
/// solved. Near `±1` the convex part is so steep that one ulp of `φ` moves
/// `β(φ)` by more than any fixed tolerance.
const ROUNDING_ULPS: f64 = 16.0;

impl Stepper {
    pub fn new(g: &Grid, p: &ModelParams, cfg: &StepperConfig) -> Result<Self> {
        p.validate()?;
        cfg.validate()?;
        Ok(Self {
            grid: *g,
            params: *p,
            cfg: *cfg,
            bulk: p.bulk()?,
            surf: p.surf()?,
            layout: Layout {
                nb: g.bulk_len(),
                ns: g.surf_len(),
            },
            linear: LinearWorkspace::new(cfg.linear_solver),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn linear_stats(&self) -> LinearStats {
        self.linear.stats()
    }

    /// Step with the configured `dt`.
    pub fn step(&mut self, s_old: &PhaseState) -> Result<StepOutcome> {
        self.step_with(s_old, self.cfg.dt)
    }

    pub fn step_with(&mut self, s_old: &PhaseState, dt: f64) -> Result<StepOutcome> {
        let g = self.grid;
        g.check_bulk(&s_old.phi)?;
        g.check_surf(&s_old.psi)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let old = if self.params.is_dirichlet() {
            s_old.trace_identified(&g)?
        } else {
            s_old.clone()
        };
        let energy_before = energy(&g, &self.params, &old)?.total;
        let lay = self.layout;

        let mut x = self.initial_guess(&old, dt)?;
        let mut f = self.residual(&x, &old, dt)?;
        let mut fnorm = norm2(&f);
        let mut iters = 1;
        let mut backtracks = 0;
        while !self.converged(&x, &f)? {
            if iters >= self.cfg.newton_max_iter {
                return Err(Error::NewtonDivergence {
                    iterations: iters,
                    residual: max_abs(&f),
                });
            }
            iters += 1;
            let jac = self.jacobian(&x, dt)?;
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let dx = self
                .linear
                .solve(&jac, &rhs)
                .map_err(|_| Error::NewtonDivergence {
                    iterations: iters,
                    residual: max_abs(&f),
                })?;
            let (phi_bound, psi_bound) = self.guard_bounds(&x);
            let mut alpha = 1.0;
            let mut guarded = false;
            loop {
                if alpha < MIN_STEP {
                    if guarded {
                        let trial_sup = sup_after(&x, &dx, 1.0, lay);
                        return Err(Error::SeparationBreach {
                            bound: phi_bound.min(psi_bound),
                            trial: trial_sup,
                        });
                    }
                    return Err(Error::NewtonDivergence {
                        iterations: iters,
                        residual: max_abs(&f),
                    });
                }
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                let inside = max_abs(&trial[..lay.nb]) <= phi_bound
                    && max_abs(&trial[lay.psi()..lay.theta()]) <= psi_bound;
                if !inside {
                    guarded = true;
                    alpha *= self.cfg.linesearch_shrink;
                    backtracks += 1;
                    continue;
                }
                match self.residual(&trial, &old, dt) {
                    Ok(ft) => {
                        let tn = norm2(&ft);
                        if tn <= (1.0 - ARMIJO * alpha) * fnorm || self.converged(&trial, &ft)? {
                            x = trial;
                            f = ft;
                            fnorm = tn;
                            break;
                        }
                    }
                    Err(Error::Domain { .. }) => guarded = true,
                    Err(e) => return Err(e),
                }
                alpha *= self.cfg.linesearch_shrink;
                backtracks += 1;
            }
        }

        let nb = lay.nb;
        let mut phi = BulkField::from_vec(g.nx(), g.ny(), x[..nb].to_vec())?;
        let psi = SurfField::from_vec(g.nx(), x[lay.psi()..lay.theta()].to_vec())?;
        if self.params.is_dirichlet() {
            g.set_trace(&mut phi, &psi)?;
        }
        let state = PhaseState {
            phi,
            psi,
            t: s_old.t + dt,
        };
        let chem = ChemState {
            mu: BulkField::from_vec(g.nx(), g.ny(), x[lay.mu()..lay.psi()].to_vec())?,
            theta: SurfField::from_vec(g.nx(), x[lay.theta()..lay.flux()].to_vec())?,
        };
        let flux = SurfField::from_vec(g.nx(), x[lay.flux()..].to_vec())?;
        let energy_after = energy(&g, &self.params, &state)?.total;
        let change = state
            .phi
            .as_slice()
            .iter()
            .zip(old.phi.as_slice())
            .chain(state.psi.as_slice().iter().zip(old.psi.as_slice()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(StepOutcome {
            state,
            chem,
            flux,
            report: StepReport {
                newton_iters: iters,
                final_residual: max_abs(&f),
                linesearch_backtracks: backtracks,
                energy_before,
                energy_after,
                dt_used: dt,
                rate: change / dt,
            },
        })
    }

    fn initial_guess(&self, old: &PhaseState, dt: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let lay = self.layout;
        let flux = if self.params.is_dirichlet() {
            g.surf_zeros()
        } else {
            crate::model::robin_flux(g, self.params.k, old)?
        };
        let mut x = Vec::with_capacity(lay.len());
        x.extend_from_slice(old.phi.as_slice());
        x.extend(std::iter::repeat_n(0.0, lay.nb));
        x.extend_from_slice(old.psi.as_slice());
        x.extend(std::iter::repeat_n(0.0, lay.ns));
        x.extend_from_slice(flux.as_slice());
        // μ and θ consistent with the guess, so the algebraic rows start at 0.
        let chem = self.chemistry(&x, old, dt)?;
        x[lay.mu()..lay.psi()].copy_from_slice(chem.mu.as_slice());
        x[lay.theta()..lay.flux()].copy_from_slice(chem.theta.as_slice());
        Ok(x)
    }

    fn split(&self, x: &[f64]) -> Result<(BulkField, BulkField, SurfField, SurfField, SurfField)> {
        let g = &self.grid;
        let lay = self.layout;
        Ok((
            BulkField::from_vec(g.nx(), g.ny(), x[..lay.nb].to_vec())?,
            BulkField::from_vec(g.nx(), g.ny(), x[lay.mu()..lay.psi()].to_vec())?,
            SurfField::from_vec(g.nx(), x[lay.psi()..lay.theta()].to_vec())?,
            SurfField::from_vec(g.nx(), x[lay.theta()..lay.flux()].to_vec())?,
            SurfField::from_vec(g.nx(), x[lay.flux()..].to_vec())?,
        ))
    }

    /// `(μ, θ)` defined by the algebraic rows at the unknowns in `x`.
    fn chemistry(&self, x: &[f64], old: &PhaseState, dt: f64) -> Result<ChemState> {
        let (phi, _, psi, _, flux) = self.split(x)?;
        crate::model::assemble(
            &self.grid,
            &self.params,
            &crate::model::Assembly {
                phi: &phi,
                psi: &psi,
                explicit: old,
                viscous: Some(Previous { state: old, dt }),
                flux: &flux,
            },
        )
    }

    fn residual(&self, x: &[f64], old: &PhaseState, dt: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let lay = self.layout;
        let (phi, mu, psi, theta, flux) = self.split(x)?;
        let chem = self.chemistry(x, old, dt)?;
        let lap_mu = g.laplace_bulk(&mu, Flux::NoFlux)?;
        let lap_theta = g.laplace_surface(&theta)?;
        let mut r = Vec::with_capacity(lay.len());
        for k in 0..lay.nb {
            r.push((phi.as_slice()[k] - old.phi.as_slice()[k]) / dt - lap_mu.as_slice()[k]);
        }
        for k in 0..lay.nb {
            r.push(mu.as_slice()[k] - chem.mu.as_slice()[k]);
        }
        for k in 0..lay.ns {
            r.push((psi.as_slice()[k] - old.psi.as_slice()[k]) / dt - lap_theta.as_slice()[k]);
        }
        for k in 0..lay.ns {
            r.push(theta.as_slice()[k] - chem.theta.as_slice()[k]);
        }
        let trace = g.trace(&phi)?;
        for k in 0..lay.ns {
            r.push(self.params.k * flux.as_slice()[k] - psi.as_slice()[k] + trace.as_slice()[k]);
        }
        Ok(r)
    }

    fn jacobian(&self, x: &[f64], dt: f64) -> Result<SparseSystem> {
        let g = &self.grid;
        let lay = self.layout;
        let (nx, ny) = (g.nx(), g.ny());
        let cx = 1.0 / (g.hx() * g.hx());
        let cy = 1.0 / (g.hy() * g.hy());
        let visc = self.params.sigma / dt;
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(12 * lay.nb + 12 * lay.ns);
        // Bulk Laplacian row `k` as (column, value) pairs, diagonal first.
        let stencil = |i: usize, j: usize| -> [(usize, f64); 5] {
            let k = g.idx(i, j);
            let e = g.idx((i + 1) % nx, j);
            let w = g.idx((i + nx - 1) % nx, j);
            if j == 0 {
                [
                    (k, -2.0 * cx - 2.0 * cy),
                    (e, cx),
                    (w, cx),
                    (g.idx(i, 1), 2.0 * cy),
                    (k, 0.0),
                ]
            } else if j == ny - 1 {
                [
                    (k, -2.0 * cx - 2.0 * cy),
                    (e, cx),
                    (w, cx),
                    (g.idx(i, ny - 2), 2.0 * cy),
                    (k, 0.0),
                ]
            } else {
                [
                    (k, -2.0 * cx - 2.0 * cy),
                    (e, cx),
                    (w, cx),
                    (g.idx(i, j + 1), cy),
                    (g.idx(i, j - 1), cy),
                ]
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                let k = g.idx(i, j);
                let row = stencil(i, j);
                let bprime = self.bulk.convex_prime(x[k])?;
                // R1 = (φ − φ_o)/dt − L μ
                t.push((k, k, 1.0 / dt));
                for &(c, v) in &row {
                    t.push((k, lay.mu() + c, -v));
                }
                // R2 = μ − σ(φ − φ_o)/dt + L φ + (2/hy) B g − β(φ) − π(φ_o)
                let r2 = lay.mu() + k;
                t.push((r2, lay.mu() + k, 1.0));
                t.push((r2, k, row[0].1 - visc - bprime));
                for &(c, v) in &row[1..] {
                    if c != k {
                        t.push((r2, c, v));
                    }
                }
            }
        }
        let hy2 = 2.0 / g.hy();
        for i in 0..nx {
            t.push((lay.mu() + g.idx(i, 0), lay.flux() + i, hy2));
            t.push((lay.mu() + g.idx(i, ny - 1), lay.flux() + nx + i, hy2));
        }
        for r in 0..2 {
            for i in 0..nx {
                let s = r * nx + i;
                let e = r * nx + (i + 1) % nx;
                let w = r * nx + (i + nx - 1) % nx;
                let bprime = self.surf.convex_prime(x[lay.psi() + s])?;
                // R3 = (ψ − ψ_o)/dt − L_Γ θ
                let r3 = lay.psi() + s;
                t.push((r3, lay.psi() + s, 1.0 / dt));
                t.push((r3, lay.theta() + s, 2.0 * cx));
                t.push((r3, lay.theta() + e, -cx));
                t.push((r3, lay.theta() + w, -cx));
                // R4 = θ − σ(ψ − ψ_o)/dt − g + L_Γ ψ − β_Γ(ψ) − π_Γ(ψ_o)
                let r4 = lay.theta() + s;
                t.push((r4, lay.theta() + s, 1.0));
                t.push((r4, lay.psi() + s, -2.0 * cx - visc - bprime));
                t.push((r4, lay.psi() + e, cx));
                t.push((r4, lay.psi() + w, cx));
                t.push((r4, lay.flux() + s, -1.0));
                // R5 = K g − ψ + φ|_Γ; the K entry stays in the pattern at K = 0.
                let r5 = lay.flux() + s;
                let row = if r == 0 { 0 } else { ny - 1 };
                t.push((r5, lay.flux() + s, self.params.k));
                t.push((r5, lay.psi() + s, -1.0));
                t.push((r5, g.idx(i, row), 1.0));
            }
        }
        SparseSystem::from_triplets(lay.len(), &t)
    }

    /// `newton_tol` on every row, widened on the `μ`, `θ` rows by the change a
    /// few ulps of `φ`, `ψ` cause in the convex part.
    fn converged(&self, x: &[f64], f: &[f64]) -> Result<bool> {
        let tol = self.cfg.newton_tol;
        let lay = self.layout;
        let floor = |n: &Nonlinearity, r: f64| -> Result<f64> {
            Ok(ROUNDING_ULPS * f64::EPSILON * r.abs() * n.convex_prime(r)?.abs())
        };
        for (k, &v) in f.iter().enumerate() {
            let v = v.abs();
            if v <= tol {
                continue;
            }
            let slack = if (lay.mu()..lay.psi()).contains(&k) {
                floor(&self.bulk, x[k - lay.mu()])?
            } else if (lay.theta()..lay.flux()).contains(&k) {
                floor(&self.surf, x[k - lay.theta() + lay.psi()])?
            } else {
                0.0
            };
            if v > tol + slack {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn guard_bounds(&self, x: &[f64]) -> (f64, f64) {
        let lay = self.layout;
        let guard = self.cfg.separation_guard;
        let bound = |barrier: bool, cur: f64| {
            if barrier {
                guard + (1.0 - guard) * cur
            } else {
                f64::INFINITY
            }
        };
        (
            bound(self.barrier(&self.bulk), max_abs(&x[..lay.nb])),
            bound(
                self.barrier(&self.surf),
                max_abs(&x[lay.psi()..lay.theta()]),
            ),
        )
    }

    fn barrier(&self, n: &Nonlinearity) -> bool {
        matches!(n, Nonlinearity::Exact(p) if p.is_singular())
    }
}

fn sup_after(x: &[f64], dx: &[f64], alpha: f64, lay: Layout) -> f64 {
    let phi = (0..lay.nb).map(|k| (x[k] + alpha * dx[k]).abs());
    let psi = (lay.psi()..lay.theta()).map(|k| (x[k] + alpha * dx[k]).abs());
    phi.chain(psi).fold(0.0, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One step with a throwaway [`Stepper`].
pub fn step(
    g: &Grid,
    p: &ModelParams,
    cfg: &StepperConfig,
    s_old: &PhaseState,
) -> Result<(PhaseState, ChemState, StepReport)> {
    let out = Stepper::new(g, p, cfg)?.step(s_old)?;
    Ok((out.state, out.chem, out.report))
}

/// Geometric time-step growth for long runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtGrowth {
    pub factor: f64,
    pub max_dt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Record spacing in time; `None` records every step.
    pub record_interval: Option<f64>,
    /// Times at which snapshots are taken (sorted). A fixed step snapshots
    /// the first state at or past each time; a growing step is shortened to
    /// land on it.
    pub snapshot_times: Vec<f64>,
    pub growth: Option<DtGrowth>,
    /// Stop early once a step's rate falls to this value.
    pub stop_rate: Option<f64>,
}

/// Observer of a run. Both hooks default to no-ops.
///
/// A snapshot is always preceded by a record of the same state.
pub trait Monitor {
    fn record(&mut self, _s: &PhaseState, _c: &ChemState, _rpt: &StepReport) -> Result<()> {
        Ok(())
    }

    fn snapshot(&mut self, _index: usize, _s: &PhaseState) -> Result<()> {
        Ok(())
    }
}

impl Monitor for () {}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: PhaseState,
    pub final_chem: ChemState,
    pub steps: usize,
    pub substeps: usize,
    pub halvings: usize,
    pub min_dt: f64,
    pub final_dt: f64,
    pub steady_at: Option<f64>,
    pub linear: LinearStats,
}

/// Advance `s0` to `t_end`, halving the step on Newton failure down to
/// `dt/1024`.
pub fn run(
    g: &Grid,
    p: &ModelParams,
    cfg: &StepperConfig,
    s0: &PhaseState,
    t_end: f64,
    opts: &RunOptions,
    monitor: &mut dyn Monitor,
) -> Result<Trajectory> {
    if !(t_end >= s0.t) {
        return Err(Error::InvalidParameter(format!(
            "t_end {t_end} precedes the initial time {}",
            s0.t
        )));
    }
    if let Some(iv) = opts.record_interval {
        if !(iv > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "record interval must be > 0, got {iv}"
            )));
        }
    }
    let mut stepper = Stepper::new(g, p, cfg)?;
    let dt_floor = cfg.dt / 1024.0;
    let t0 = s0.t;
    let mut state = if p.is_dirichlet() {
        s0.trace_identified(g)?
    } else {
        s0.clone()
    };
    let mut chem = chemical_potentials(
        g,
        p,
        &state,
        Some(Previous {
            state: &state,
            dt: cfg.dt,
        }),
    )?;
    let e0 = energy(g, p, &state)?.total;
    let initial = StepReport {
        newton_iters: 0,
        final_residual: 0.0,
        linesearch_backtracks: 0,
        energy_before: e0,
        energy_after: e0,
        dt_used: 0.0,
        rate: 0.0,
    };
    monitor.record(&state, &chem, &initial)?;
    let mut next_record = 1usize;
    let mut snaps = opts.snapshot_times.iter().copied().enumerate().peekable();
    let eps_t = 1e-9 * cfg.dt;
    while let Some(&(idx, ts)) = snaps.peek() {
        if ts <= t0 + eps_t {
            monitor.snapshot(idx, &state)?;
            snaps.next();
        } else {
            break;
        }
    }

    let mut traj = Trajectory {
        final_state: state.clone(),
        final_chem: chem.clone(),
        steps: 0,
        substeps: 0,
        halvings: 0,
        min_dt: cfg.dt,
        final_dt: cfg.dt,
        steady_at: None,
        linear: LinearStats::default(),
    };
    let mut dt = cfg.dt;
    let mut t = t0;
    let mut last = initial;
    let mut last_recorded = true;
    while t < t_end - eps_t {
        let mut h = if t + dt > t_end - eps_t {
            t_end - t
        } else {
            dt
        };
        let mut land = None;
        // With a growing step, land on snapshot times instead of overshooting them.
        if opts.growth.is_some() {
            if let Some(&(_, ts)) = snaps.peek() {
                if ts > t + eps_t && ts < t + h - eps_t {
                    h = ts - t;
                    land = Some(ts);
                }
            }
        }
        let halvings_before = traj.halvings;
        let (out, rpt) = advance(&mut stepper, &state, h, dt_floor, &mut traj)?;
        traj.steps += 1;
        t = if opts.growth.is_none() && h == cfg.dt {
            t0 + traj.steps as f64 * cfg.dt
        } else {
            t + h
        };
        if t > t_end {
            t = t_end;
        }
        if let Some(ts) = land {
            t = ts;
        }
        state = out.state;
        state.t = t;
        chem = out.chem;
        last = rpt;
        last_recorded = false;
        let snap_due = snaps.peek().is_some_and(|&(_, ts)| ts <= t + eps_t);
        let due = match opts.record_interval {
            None => true,
            Some(iv) => t >= t0 + next_record as f64 * iv - eps_t,
        };
        if due || snap_due || t >= t_end - eps_t {
            monitor.record(&state, &chem, &last)?;
            last_recorded = true;
            if let Some(iv) = opts.record_interval {
                while t0 + next_record as f64 * iv <= t + eps_t {
                    next_record += 1;
                }
            }
        }
        while let Some(&(idx, ts)) = snaps.peek() {
            if ts <= t + eps_t {
                monitor.snapshot(idx, &state)?;
                snaps.next();
            } else {
                break;
            }
        }
        if let Some(rate) = opts.stop_rate {
            if last.rate <= rate {
                traj.steady_at = Some(t);
                break;
            }
        }
        if let Some(gr) = opts.growth {
            dt = if traj.halvings > halvings_before {
                (dt * 0.5).max(dt_floor)
            } else {
                (dt * gr.factor).min(gr.max_dt)
            };
        }
    }
    if !last_recorded {
        monitor.record(&state, &chem, &last)?;
    }
    traj.final_state = state;
    traj.final_chem = chem;
    traj.final_dt = dt;
    traj.linear = stepper.linear_stats();
    Ok(traj)
}

/// Covers `[t, t + h]` with one step, or two half-size covers on Newton
/// failure. The returned report aggregates the energy change and rate over
/// the whole interval.
fn advance(
    stepper: &mut Stepper,
    s: &PhaseState,
    h: f64,
    floor: f64,
    traj: &mut Trajectory,
) -> Result<(StepOutcome, StepReport)> {
    match stepper.step_with(s, h) {
        Ok(out) => {
            traj.substeps += 1;
            traj.min_dt = traj.min_dt.min(h);
            let rpt = out.report;
            Ok((out, rpt))
        }
        Err(Error::NewtonDivergence { .. }) => {
            let half = 0.5 * h;
            if half < floor * (1.0 - 1e-12) {
                return Err(Error::Aborted {
                    t: s.t,
                    dt_floor: floor,
                });
            }
            traj.halvings += 1;
            let (a, ra) = advance(stepper, s, half, floor, traj)?;
            let (b, rb) = advance(stepper, &a.state, half, floor, traj)?;
            let change = b
                .state
                .phi
                .as_slice()
                .iter()
                .zip(s.phi.as_slice())
                .chain(b.state.psi.as_slice().iter().zip(s.psi.as_slice()))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let rpt = StepReport {
                newton_iters: ra.newton_iters + rb.newton_iters,
                final_residual: rb.final_residual,
                linesearch_backtracks: ra.linesearch_backtracks + rb.linesearch_backtracks,
                energy_before: ra.energy_before,
                energy_after: rb.energy_after,
                dt_used: half.min(ra.dt_used).min(rb.dt_used),
                rate: change / h,
            };
            Ok((b, rpt))
        }
        Err(e) => Err(e),
    }
}
