//! Runtime readouts: conservation, dissipation, separation, steady states
//! and decay-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BulkField, Grid, SurfField};
use crate::model::{
    energy, stationary_constants, ChemState, EnergyBreakdown, ModelParams, PhaseState,
};
use crate::stepper::{Monitor, StepReport};

/// Column order of the time-series CSV.
pub const SERIES_HEADER: &str = "t,mass_bulk,mass_surf,energy,e_bulk_dir,e_bulk_pot,e_surf_dir,e_surf_pot,e_penalty,grad_mu_sq,grad_theta_sq,sep_bulk,sep_surf,mu_mean,mu_std,theta_mean,theta_std,newton_iters";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    /// `⟨φ⟩_Ω`.
    pub mass_bulk: f64,
    /// `⟨ψ⟩_Γ`.
    pub mass_surf: f64,
    pub energy: EnergyBreakdown,
    /// `‖∇_h μ‖²`.
    pub grad_mu_sq: f64,
    /// `‖∇_Γ θ‖²`.
    pub grad_theta_sq: f64,
    pub sep_bulk: f64,
    pub sep_surf: f64,
    pub mu_mean: f64,
    pub mu_std: f64,
    pub theta_mean: f64,
    pub theta_std: f64,
    pub newton_iters: usize,
    /// Step size and rate of the step that produced the record; absent for
    /// records read back from CSV.
    pub dt: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    mass_bulk: f64,
    mass_surf: f64,
    energy: f64,
    e_bulk_dir: f64,
    e_bulk_pot: f64,
    e_surf_dir: f64,
    e_surf_pot: f64,
    e_penalty: f64,
    grad_mu_sq: f64,
    grad_theta_sq: f64,
    sep_bulk: f64,
    sep_surf: f64,
    mu_mean: f64,
    mu_std: f64,
    theta_mean: f64,
    theta_std: f64,
    newton_iters: usize,
}

fn weighted_std(mean: f64, second: f64) -> f64 {
    (second - mean * mean).max(0.0).sqrt()
}

fn bulk_stats(g: &Grid, u: &BulkField) -> Result<(f64, f64)> {
    let mean = g.mean_bulk(u)?;
    let centered = u.map(|v| v - mean);
    let var = g.inner_bulk(&centered, &centered)? / g.bulk_measure();
    Ok((mean, weighted_std(0.0, var)))
}

fn surf_stats(g: &Grid, v: &SurfField) -> Result<(f64, f64)> {
    let mean = g.mean_surface(v)?;
    let centered = v.map(|x| x - mean);
    let var = g.inner_surface(&centered, &centered)? / g.surf_measure();
    Ok((mean, weighted_std(0.0, var)))
}

/// Columns that depend on the state alone (no chemical potentials).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateColumns {
    pub mass_bulk: f64,
    pub mass_surf: f64,
    pub energy: EnergyBreakdown,
    pub sep_bulk: f64,
    pub sep_surf: f64,
}

pub fn state_columns(g: &Grid, p: &ModelParams, s: &PhaseState) -> Result<StateColumns> {
    Ok(StateColumns {
        mass_bulk: g.mean_bulk(&s.phi)?,
        mass_surf: g.mean_surface(&s.psi)?,
        energy: energy(g, p, s)?,
        sep_bulk: 1.0 - s.phi.max_abs(),
        sep_surf: 1.0 - s.psi.max_abs(),
    })
}

impl TimeSeriesRecord {
    pub fn state_columns(&self) -> StateColumns {
        StateColumns {
            mass_bulk: self.mass_bulk,
            mass_surf: self.mass_surf,
            energy: self.energy,
            sep_bulk: self.sep_bulk,
            sep_surf: self.sep_surf,
        }
    }

    pub fn min_separation(&self) -> f64 {
        self.sep_bulk.min(self.sep_surf)
    }
}

pub fn record(
    g: &Grid,
    p: &ModelParams,
    s: &PhaseState,
    c: &ChemState,
    rpt: &StepReport,
) -> Result<TimeSeriesRecord> {
    let sc = state_columns(g, p, s)?;
    let (mu_mean, mu_std) = bulk_stats(g, &c.mu)?;
    let (theta_mean, theta_std) = surf_stats(g, &c.theta)?;
    Ok(TimeSeriesRecord {
        t: s.t,
        mass_bulk: sc.mass_bulk,
        mass_surf: sc.mass_surf,
        energy: sc.energy,
        grad_mu_sq: 2.0 * g.dirichlet_energy_bulk(&c.mu)?,
        grad_theta_sq: 2.0 * g.dirichlet_energy_surface(&c.theta)?,
        sep_bulk: sc.sep_bulk,
        sep_surf: sc.sep_surf,
        mu_mean,
        mu_std,
        theta_mean,
        theta_std,
        newton_iters: rpt.newton_iters,
        dt: Some(rpt.dt_used),
        rate: Some(rpt.rate),
    })
}

pub fn write_series(records: &[TimeSeriesRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in records {
        let e = r.energy;
        w.serialize(Row {
            t: r.t,
            mass_bulk: r.mass_bulk,
            mass_surf: r.mass_surf,
            energy: e.total,
            e_bulk_dir: e.bulk_dirichlet,
            e_bulk_pot: e.bulk_potential,
            e_surf_dir: e.surf_dirichlet,
            e_surf_pot: e.surf_potential,
            e_penalty: e.penalty,
            grad_mu_sq: r.grad_mu_sq,
            grad_theta_sq: r.grad_theta_sq,
            sep_bulk: r.sep_bulk,
            sep_surf: r.sep_surf,
            mu_mean: r.mu_mean,
            mu_std: r.mu_std,
            theta_mean: r.theta_mean,
            theta_std: r.theta_std,
            newton_iters: r.newton_iters,
        })
        .map_err(|e| Error::Format(format!("series CSV: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("series CSV: {e}")))?;
    let mut out = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    if records.is_empty() {
        out = format!("{SERIES_HEADER}\n");
    }
    Ok(out)
}

/// Parses a series CSV; errors name the offending data row (1-based).
pub fn read_series(text: &str) -> Result<Vec<TimeSeriesRecord>> {
    let first = text.lines().next().unwrap_or_default();
    if first != SERIES_HEADER {
        return Err(Error::Format(format!(
            "series CSV: unexpected header `{first}`"
        )));
    }
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rd.deserialize::<Row>().enumerate() {
        let r = row.map_err(|e| Error::Format(format!("series CSV row {}: {e}", i + 1)))?;
        out.push(TimeSeriesRecord {
            t: r.t,
            mass_bulk: r.mass_bulk,
            mass_surf: r.mass_surf,
            energy: EnergyBreakdown {
                bulk_dirichlet: r.e_bulk_dir,
                bulk_potential: r.e_bulk_pot,
                surf_dirichlet: r.e_surf_dir,
                surf_potential: r.e_surf_pot,
                penalty: r.e_penalty,
                total: r.energy,
            },
            grad_mu_sq: r.grad_mu_sq,
            grad_theta_sq: r.grad_theta_sq,
            sep_bulk: r.sep_bulk,
            sep_surf: r.sep_surf,
            mu_mean: r.mu_mean,
            mu_std: r.mu_std,
            theta_mean: r.theta_mean,
            theta_std: r.theta_std,
            newton_iters: r.newton_iters,
            dt: None,
            rate: None,
        });
    }
    Ok(out)
}

/// `E(tⁿ⁺¹) − E(tⁿ) + (tⁿ⁺¹ − tⁿ)(‖∇μ‖² + ‖∇_Γθ‖²)ⁿ⁺¹` for consecutive records.
pub fn dissipation_residual(history: &[TimeSeriesRecord]) -> Vec<f64> {
    history
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            w[1].energy.total - w[0].energy.total + dt * (w[1].grad_mu_sq + w[1].grad_theta_sq)
        })
        .collect()
}

/// Discrete `ℋ¹` distance: Dirichlet forms plus `L²` mass terms on the bulk
/// and on the boundary.
pub fn h1_distance(g: &Grid, a: &PhaseState, b: &PhaseState) -> Result<f64> {
    let dphi = a.phi.lin_comb(1.0, &b.phi, -1.0);
    let dpsi = a.psi.lin_comb(1.0, &b.psi, -1.0);
    let sq = 2.0 * g.dirichlet_energy_bulk(&dphi)?
        + g.inner_bulk(&dphi, &dphi)?
        + 2.0 * g.dirichlet_energy_surface(&dpsi)?
        + g.inner_surface(&dpsi, &dpsi)?;
    Ok(sq.sqrt())
}

/// `(‖φ_a − φ_b‖_{L²(Ω)}, ‖ψ_a − ψ_b‖_{L²(Γ)})`.
pub fn l2_distances(g: &Grid, a: &PhaseState, b: &PhaseState) -> Result<(f64, f64)> {
    let dphi = a.phi.lin_comb(1.0, &b.phi, -1.0);
    let dpsi = a.psi.lin_comb(1.0, &b.psi, -1.0);
    Ok((
        g.inner_bulk(&dphi, &dphi)?.sqrt(),
        g.inner_surface(&dpsi, &dpsi)?.sqrt(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayFit {
    /// `d ≈ C(1 + t)^{−exponent}`.
    Power { exponent: f64 },
    /// `d ≈ C e^{−rate·t}`; super-polynomial decay.
    Exponential { rate: f64 },
}

impl DecayFit {
    /// Polynomial exponent, `+∞` for exponential decay.
    pub fn exponent(&self) -> f64 {
        match *self {
            DecayFit::Power { exponent } => exponent,
            DecayFit::Exponential { .. } => f64::INFINITY,
        }
    }
}

const MIN_FIT_POINTS: usize = 10;

/// Least-squares fits of `ln d` against `ln(1 + t)` and against `t`; the
/// better fit (smaller residual) wins.
pub fn fit_decay(ts: &[f64], ds: &[f64]) -> Result<DecayFit> {
    let dmax = ds.iter().copied().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ds)
        .filter(|(t, d)| t.is_finite() && d.is_finite() && **d > 1e-14 * dmax && **d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} positive distances, need at least {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let log_t: Vec<f64> = pts.iter().map(|p| (1.0 + p.0).ln()).collect();
    let lin_t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let rss = |xs: &[f64]| {
        let (a, b, _) = crate::potentials::linear_fit(xs, &ys);
        let r: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - a - b * x).powi(2))
            .sum();
        (b, r)
    };
    let (bp, rp) = rss(&log_t);
    let (be, re) = rss(&lin_t);
    Ok(if re < rp {
        DecayFit::Exponential { rate: -be }
    } else {
        DecayFit::Power { exponent: -bp }
    })
}

/// Fits the decay of the `ℋ¹` distance between the snapshots and `s_inf`.
pub fn fit_rate(g: &Grid, snapshots: &[PhaseState], s_inf: &PhaseState) -> Result<DecayFit> {
    let mut ts = Vec::with_capacity(snapshots.len());
    let mut ds = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        ts.push(s.t);
        ds.push(h1_distance(g, s, s_inf)?);
    }
    fit_decay(&ts, &ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub converged: bool,
    pub t_detect: Option<f64>,
    pub mu_inf_measured: f64,
    pub theta_inf_measured: f64,
    pub mu_inf_formula: f64,
    pub theta_inf_formula: f64,
    pub mu_std: f64,
    pub theta_std: f64,
    pub fitted_rate_exponent: Option<f64>,
}

/// Steady-state readout from the last record and the state it describes.
///
/// The run counts as converged when the last step's max-norm rate is at most
/// `tol_rate`. The measured constants are the spatial means of `μ`, `θ`; the
/// formula constants come from [`stationary_constants`].
pub fn detect_steady(
    g: &Grid,
    p: &ModelParams,
    history: &[TimeSeriesRecord],
    s: &PhaseState,
    tol_rate: f64,
) -> Result<SteadyStateReport> {
    let (mu_f, theta_f) = stationary_constants(g, p, s)?;
    let last = history.last();
    let converged = history.len() >= 2 && last.and_then(|r| r.rate).is_some_and(|r| r <= tol_rate);
    Ok(SteadyStateReport {
        converged,
        t_detect: if converged { last.map(|r| r.t) } else { None },
        mu_inf_measured: last.map_or(f64::NAN, |r| r.mu_mean),
        theta_inf_measured: last.map_or(f64::NAN, |r| r.theta_mean),
        mu_inf_formula: mu_f,
        theta_inf_formula: theta_f,
        mu_std: last.map_or(f64::NAN, |r| r.mu_std),
        theta_std: last.map_or(f64::NAN, |r| r.theta_std),
        fitted_rate_exponent: None,
    })
}

/// A broken run invariant and the record it was detected at.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    /// 1-based data row of the series.
    pub row: usize,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} violated at series row {}: {}",
            self.invariant, self.row, self.detail
        )
    }
}

/// Tolerances of [`check_run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunChecks {
    pub mass_tol: f64,
    pub energy_tol: f64,
    /// Require positive separation on every record.
    pub separated: bool,
}

impl Default for RunChecks {
    fn default() -> Self {
        Self {
            mass_tol: 1e-10,
            energy_tol: 1e-10,
            separated: true,
        }
    }
}

pub fn check_run(history: &[TimeSeriesRecord], checks: RunChecks) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = history.first() else {
        return out;
    };
    for (i, r) in history.iter().enumerate() {
        let row = i + 1;
        let dm = (r.mass_bulk - first.mass_bulk).abs();
        if dm > checks.mass_tol {
            out.push(Violation {
                invariant: "bulk mass conservation",
                row,
                detail: format!("|<phi> - m0| = {dm:e} > {:e}", checks.mass_tol),
            });
        }
        let ds = (r.mass_surf - first.mass_surf).abs();
        if ds > checks.mass_tol {
            out.push(Violation {
                invariant: "surface mass conservation",
                row,
                detail: format!("|<psi> - m_surf0| = {ds:e} > {:e}", checks.mass_tol),
            });
        }
        if i > 0 {
            let de = r.energy.total - history[i - 1].energy.total;
            if de > checks.energy_tol {
                out.push(Violation {
                    invariant: "energy dissipation",
                    row,
                    detail: format!("energy increased by {de:e}"),
                });
            }
        }
        if checks.separated && !(r.min_separation() > 0.0) {
            out.push(Violation {
                invariant: "strict separation",
                row,
                detail: format!("sep_bulk = {}, sep_surf = {}", r.sep_bulk, r.sep_surf),
            });
        }
    }
    out
}

/// In-memory [`Monitor`] collecting records and snapshot states.
pub struct Recorder {
    grid: Grid,
    params: ModelParams,
    pub records: Vec<TimeSeriesRecord>,
    pub snapshots: Vec<PhaseState>,
    /// Record row of each snapshot.
    pub snapshot_rows: Vec<usize>,
}

impl Recorder {
    pub fn new(g: &Grid, p: &ModelParams) -> Self {
        Self {
            grid: *g,
            params: *p,
            records: Vec::new(),
            snapshots: Vec::new(),
            snapshot_rows: Vec::new(),
        }
    }
}

impl Monitor for Recorder {
    fn record(&mut self, s: &PhaseState, c: &ChemState, rpt: &StepReport) -> Result<()> {
        self.records
            .push(record(&self.grid, &self.params, s, c, rpt)?);
        Ok(())
    }

    fn snapshot(&mut self, _index: usize, s: &PhaseState) -> Result<()> {
        self.snapshots.push(s.clone());
        self.snapshot_rows
            .push(self.records.len().saturating_sub(1));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::chemical_potentials;
    use crate::potentials::Potential;

    fn setup() -> (Grid, ModelParams) {
        (
            Grid::new(8, 5, 4.0, 2.0).unwrap(),
            ModelParams::new(1.0, Potential::logarithmic(1.0, 2.0).unwrap()),
        )
    }

    fn blank(t: f64) -> StepReport {
        StepReport {
            newton_iters: 1,
            final_residual: 0.0,
            linesearch_backtracks: 0,
            energy_before: 0.0,
            energy_after: 0.0,
            dt_used: t,
            rate: 0.0,
        }
    }

    #[test]
    fn constant_state_record() {
        let (g, p) = setup();
        let s = PhaseState::constant(&g, 0.3, 0.3);
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let r = record(&g, &p, &s, &c, &blank(0.1)).unwrap();
        assert_eq!(r.grad_mu_sq, 0.0);
        assert_eq!(r.grad_theta_sq, 0.0);
        assert!(r.mu_std < 1e-14);
        assert!((r.mass_bulk - 0.3).abs() < 1e-15 && (r.mass_surf - 0.3).abs() < 1e-15);
        assert_eq!(r.energy, energy(&g, &p, &s).unwrap());
        assert!((r.sep_bulk - 0.7).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (g, p) = setup();
        let s = PhaseState::new(
            &g,
            g.bulk_from_fn(|x, y| 0.1 * (x + 2.0 * y).sin()),
            g.surf_from_fn(|_, x| 0.2 * x.cos()),
            0.1 / 3.0,
        )
        .unwrap();
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let recs = vec![record(&g, &p, &s, &c, &blank(0.1)).unwrap(); 3];
        let text = write_series(&recs).unwrap();
        assert_eq!(text.lines().next().unwrap(), SERIES_HEADER);
        assert!(!text.contains('\r'));
        let back = read_series(&text).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.state_columns(), b.state_columns());
            assert_eq!(a.mu_std.to_bits(), b.mu_std.to_bits());
        }
    }

    #[test]
    fn bad_rows_are_located() {
        let text = format!("{SERIES_HEADER}\n{}\n", ["1"; 17].join(",") + ",x");
        let err = read_series(&text).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        assert!(read_series("t,x\n").is_err());
    }

    #[test]
    fn dissipation_residual_of_constant_history() {
        let (g, p) = setup();
        let s = PhaseState::constant(&g, 0.3, 0.3);
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let mut recs = Vec::new();
        for k in 0..4 {
            let mut r = record(&g, &p, &s, &c, &blank(0.1)).unwrap();
            r.t = 0.1 * k as f64;
            recs.push(r);
        }
        assert!(dissipation_residual(&recs).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decay_fits() {
        let ts: Vec<f64> = (0..40).map(|k| 0.5 * k as f64).collect();
        let power: Vec<f64> = ts.iter().map(|t| 3.0 * (1.0 + t).powf(-2.0)).collect();
        match fit_decay(&ts, &power).unwrap() {
            DecayFit::Power { exponent } => assert!((exponent - 2.0).abs() < 0.02),
            other => panic!("{other:?}"),
        }
        let expo: Vec<f64> = ts.iter().map(|t| (-t).exp()).collect();
        let fit = fit_decay(&ts, &expo).unwrap();
        assert!(matches!(fit, DecayFit::Exponential { rate } if (rate - 1.0).abs() < 1e-9));
        assert_eq!(fit.exponent(), f64::INFINITY);
        assert!(matches!(
            fit_decay(&ts, &vec![0.0; 40]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_rate_on_synthetic_states() {
        let (g, _) = setup();
        let s_inf = PhaseState::constant(&g, 0.1, 0.1);
        let bump = g.bulk_from_fn(|x, _| x.sin());
        let snaps: Vec<PhaseState> = (0..20)
            .map(|k| {
                let t = k as f64;
                let mut s = s_inf.clone();
                s.phi = s.phi.lin_comb(1.0, &bump, (1.0 + t).powi(-2));
                s.t = t;
                s
            })
            .collect();
        let fit = fit_rate(&g, &snaps, &s_inf).unwrap();
        assert!((fit.exponent() - 2.0).abs() < 0.02, "{fit:?}");
        assert!(fit_rate(&g, &vec![s_inf.clone(); 12], &s_inf).is_err());
    }

    #[test]
    fn steady_detection() {
        let (g, p) = setup();
        let s = PhaseState::constant(&g, 0.4, 0.4);
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let r = record(&g, &p, &s, &c, &blank(0.1)).unwrap();
        let rep = detect_steady(&g, &p, &[r, r], &s, 1e-8).unwrap();
        assert!(rep.converged);
        let fp = Potential::logarithmic(1.0, 2.0)
            .unwrap()
            .derivative(0.4)
            .unwrap();
        assert!((rep.mu_inf_formula - fp).abs() < 1e-12);
        assert!((rep.mu_inf_measured - rep.mu_inf_formula).abs() < 1e-12);
        let moving = TimeSeriesRecord {
            rate: Some(0.5),
            ..r
        };
        assert!(
            !detect_steady(&g, &p, &[r, moving], &s, 1e-8)
                .unwrap()
                .converged
        );
    }

    #[test]
    fn run_checks_flag_offending_rows() {
        let (g, p) = setup();
        let s = PhaseState::constant(&g, 0.4, 0.4);
        let c = chemical_potentials(&g, &p, &s, None).unwrap();
        let r = record(&g, &p, &s, &c, &blank(0.1)).unwrap();
        let mut bad = r;
        bad.mass_bulk += 1e-6;
        bad.energy.total += 1.0;
        let v = check_run(&[r, r, bad], RunChecks::default());
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.row == 3));
        assert!(v[0].to_string().contains("row 3"));
    }
}
